#include "atesmpc/problem.hpp"

#include <algorithm>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "atesmpc/format.hpp"

namespace atesmpc {

int MiqpProblem::num_binaries() const
{
    return static_cast<int>(std::count(integrality.begin(), integrality.end(), 1));
}

double MiqpProblem::objective(const Eigen::VectorXd& x) const
{
    return 0.5 * x.dot(hessian * x) + linear.dot(x) + constant;
}

double MiqpProblem::max_violation(const Eigen::VectorXd& x) const
{
    double v = 0.0;
    if (num_ineq() > 0)
        v = std::max(v, (ineq * x - ineq_rhs).maxCoeff());
    if (num_eq() > 0)
        v = std::max(v, (eq * x - eq_rhs).cwiseAbs().maxCoeff());
    if (num_vars() > 0) {
        v = std::max(v, (lower - x).maxCoeff());
        v = std::max(v, (x - upper).maxCoeff());
    }
    return v;
}

void MiqpProblem::validate() const
{
    const int n = num_vars();
    auto fail = [](const std::string& m) { throw std::invalid_argument("MiqpProblem: " + m); };
    if (hessian.rows() != n || hessian.cols() != n)
        fail("hessian dimension mismatch");
    if (ineq.cols() != n || ineq.rows() != ineq_rhs.size())
        fail("inequality dimension mismatch");
    if (eq.cols() != n || eq.rows() != eq_rhs.size())
        fail("equality dimension mismatch");
    if (static_cast<int>(integrality.size()) != n || lower.size() != n || upper.size() != n)
        fail("variable attribute length mismatch");
    if (!var_labels.empty() && static_cast<int>(var_labels.size()) != n)
        fail("variable label count mismatch");
    if (!ineq_labels.empty() && static_cast<int>(ineq_labels.size()) != num_ineq())
        fail("inequality label count mismatch");
    if (!eq_labels.empty() && static_cast<int>(eq_labels.size()) != num_eq())
        fail("equality label count mismatch");
    SparseMat ht = hessian.transpose();
    SparseMat diff = hessian - ht;
    for (int k = 0; k < diff.outerSize(); ++k)
        for (SparseMat::InnerIterator it(diff, k); it; ++it)
            if (std::abs(it.value()) > 1e-9 * (1.0 + std::abs(hessian.coeff(it.row(), it.col()))))
                fail("hessian is not symmetric");
    for (int j = 0; j < n; ++j) {
        if (lower(j) > upper(j))
            fail("crossed bounds on variable " + std::to_string(j));
        if (integrality[j] && (lower(j) < 0.0 || upper(j) > 1.0))
            fail("binary variable " + std::to_string(j) + " has bounds outside [0,1]");
    }
}

namespace {

void write_vector(std::ostream& os, const char* name, const Eigen::VectorXd& v)
{
    os << name;
    for (Eigen::Index j = 0; j < v.size(); ++j)
        os << ' ' << format_double(v(j));
    os << '\n';
}

void write_rows(std::ostream& os, const SparseMat& a, const Eigen::VectorXd* rhs)
{
    Eigen::SparseMatrix<double, Eigen::RowMajor> r = a;
    Eigen::VectorXd row(a.cols());
    for (Eigen::Index i = 0; i < r.rows(); ++i) {
        row.setZero();
        for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(r, i); it; ++it)
            row(it.col()) = it.value();
        for (Eigen::Index j = 0; j < row.size(); ++j)
            os << (j ? " " : "") << format_double(row(j));
        if (rhs)
            os << (row.size() ? " " : "") << format_double((*rhs)(i));
        os << '\n';
    }
}

void write_labels(std::ostream& os, const char* name, const std::vector<std::string>& labels,
                  Eigen::Index count)
{
    os << name << '\n';
    for (Eigen::Index i = 0; i < count; ++i)
        os << (labels.empty() ? std::string("-") : labels[i]) << '\n';
}

std::string next_line(std::istream& is)
{
    std::string line;
    if (!std::getline(is, line))
        throw std::runtime_error("read_problem: unexpected end of input");
    return line;
}

std::vector<double> numbers(const std::string& line, std::size_t skip_tokens, std::size_t expect)
{
    std::istringstream ss(line);
    std::string tok;
    for (std::size_t k = 0; k < skip_tokens; ++k)
        ss >> tok;
    std::vector<double> out;
    while (ss >> tok)
        out.push_back(parse_double(tok));
    if (out.size() != expect)
        throw std::runtime_error("read_problem: expected " + std::to_string(expect) +
                                 " numbers in line '" + line.substr(0, 40) + "'");
    return out;
}

void expect_keyword(const std::string& line, const std::string& key)
{
    if (line.compare(0, key.size(), key) != 0)
        throw std::runtime_error("read_problem: expected '" + key + "', got '" +
                                 line.substr(0, 40) + "'");
}

Eigen::VectorXd as_vector(const std::vector<double>& v)
{
    return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

SparseMat read_rows(std::istream& is, int rows, int n, Eigen::VectorXd* rhs)
{
    std::vector<Eigen::Triplet<double>> trip;
    if (rhs)
        rhs->resize(rows);
    for (int i = 0; i < rows; ++i) {
        auto vals = numbers(next_line(is), 0, n + (rhs ? 1 : 0));
        for (int j = 0; j < n; ++j)
            if (vals[j] != 0.0)
                trip.emplace_back(i, j, vals[j]);
        if (rhs)
            (*rhs)(i) = vals[n];
    }
    SparseMat m(rows, n);
    m.setFromTriplets(trip.begin(), trip.end());
    return m;
}

std::vector<std::string> read_labels(std::istream& is, const std::string& key, int count)
{
    expect_keyword(next_line(is), key);
    std::vector<std::string> out;
    bool all_blank = true;
    for (int i = 0; i < count; ++i) {
        out.push_back(next_line(is));
        all_blank = all_blank && out.back() == "-";
    }
    if (all_blank)
        out.clear();
    return out;
}

} // namespace

void write_problem(std::ostream& os, const MiqpProblem& p)
{
    os << "# atesmpc-miqp 1\n";
    os << "dims " << p.num_vars() << ' ' << p.num_ineq() << ' ' << p.num_eq() << '\n';
    os << "objective_constant " << format_double(p.constant) << '\n';
    os << "integrality";
    for (char b : p.integrality)
        os << ' ' << (b ? 1 : 0);
    os << '\n';
    write_vector(os, "lower", p.lower);
    write_vector(os, "upper", p.upper);
    write_vector(os, "linear", p.linear);
    os << "hessian\n";
    write_rows(os, p.hessian, nullptr);
    os << "ineq\n";
    write_rows(os, p.ineq, &p.ineq_rhs);
    os << "eq\n";
    write_rows(os, p.eq, &p.eq_rhs);
    write_labels(os, "var_labels", p.var_labels, p.num_vars());
    write_labels(os, "ineq_labels", p.ineq_labels, p.num_ineq());
    write_labels(os, "eq_labels", p.eq_labels, p.num_eq());
    os << "end\n";
}

MiqpProblem read_problem(std::istream& is)
{
    if (next_line(is) != "# atesmpc-miqp 1")
        throw std::runtime_error("read_problem: missing or unsupported header");
    std::string line = next_line(is);
    expect_keyword(line, "dims");
    auto dims = numbers(line, 1, 3);
    const int n = static_cast<int>(dims[0]);
    const int mi = static_cast<int>(dims[1]);
    const int me = static_cast<int>(dims[2]);
    if (n < 0 || mi < 0 || me < 0)
        throw std::runtime_error("read_problem: negative dimension");

    MiqpProblem p;
    line = next_line(is);
    expect_keyword(line, "objective_constant");
    p.constant = numbers(line, 1, 1)[0];
    line = next_line(is);
    expect_keyword(line, "integrality");
    for (double b : numbers(line, 1, n)) {
        if (b != 0.0 && b != 1.0)
            throw std::runtime_error("read_problem: integrality flags must be 0 or 1");
        p.integrality.push_back(b != 0.0 ? 1 : 0);
    }
    line = next_line(is);
    expect_keyword(line, "lower");
    p.lower = as_vector(numbers(line, 1, n));
    line = next_line(is);
    expect_keyword(line, "upper");
    p.upper = as_vector(numbers(line, 1, n));
    line = next_line(is);
    expect_keyword(line, "linear");
    p.linear = as_vector(numbers(line, 1, n));
    expect_keyword(next_line(is), "hessian");
    p.hessian = read_rows(is, n, n, nullptr);
    expect_keyword(next_line(is), "ineq");
    p.ineq = read_rows(is, mi, n, &p.ineq_rhs);
    expect_keyword(next_line(is), "eq");
    p.eq = read_rows(is, me, n, &p.eq_rhs);
    p.var_labels = read_labels(is, "var_labels", n);
    p.ineq_labels = read_labels(is, "ineq_labels", mi);
    p.eq_labels = read_labels(is, "eq_labels", me);
    expect_keyword(next_line(is), "end");
    p.validate();
    return p;
}

std::string to_text(const MiqpProblem& p)
{
    std::ostringstream os;
    write_problem(os, p);
    return os.str();
}

} // namespace atesmpc
