// Convex QP relaxations: presolve (fixed variables, singleton rows), Ruiz
// equilibration, and a Mehrotra predictor-corrector interior-point method on
// a regularized augmented system. Infeasibility is certified with a phase-1 LP.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

#include <Eigen/SparseCholesky>

#include "atesmpc/miqp.hpp"

namespace atesmpc {

namespace {

using RowMat = Eigen::SparseMatrix<double, Eigen::RowMajor>;
using Vec = Eigen::VectorXd;

constexpr double kInf = std::numeric_limits<double>::infinity();

double inf_norm(const Vec& v)
{
    return v.size() ? v.cwiseAbs().maxCoeff() : 0.0;
}

// ---------------------------------------------------------------------------
// Presolve

constexpr int kSrcBound = -1;

struct Presolve
{
    bool infeasible = false;
    Vec lb, ub;
    std::vector<int> lb_src, ub_src;  // kSrcBound, ineq row r >= 0, or -(r + 2) for eq row r
    std::vector<char> fixed;
    Vec value;                        // value of fixed variables
    std::vector<char> ineq_kept, eq_kept;
};

bool is_fixed(double lo, double hi)
{
    return std::isfinite(lo) && std::isfinite(hi) && hi - lo <= 1e-12 * std::max(1.0, std::abs(lo));
}

Presolve presolve(const MiqpProblem& p, const Vec& lower, const Vec& upper)
{
    const int n = p.num_vars();
    Presolve ps;
    ps.lb = lower;
    ps.ub = upper;
    ps.lb_src.assign(n, kSrcBound);
    ps.ub_src.assign(n, kSrcBound);
    ps.fixed.assign(n, 0);
    ps.value = Vec::Zero(n);
    ps.ineq_kept.assign(p.num_ineq(), 1);
    ps.eq_kept.assign(p.num_eq(), 1);

    auto check_var = [&](int j) {
        const double tol = 1e-9 * std::max(1.0, std::abs(ps.ub(j)));
        if (ps.lb(j) > ps.ub(j) + tol) {
            ps.infeasible = true;
            return;
        }
        if (!ps.fixed[j] && (ps.lb(j) >= ps.ub(j) || is_fixed(ps.lb(j), ps.ub(j)))) {
            ps.fixed[j] = 1;
            ps.value(j) = ps.lb(j) == ps.ub(j) ? ps.lb(j) : 0.5 * (ps.lb(j) + ps.ub(j));
        }
    };
    for (int j = 0; j < n && !ps.infeasible; ++j)
        check_var(j);

    const RowMat g = p.ineq;
    const RowMat e = p.eq;
    bool changed = true;
    for (int pass = 0; changed && pass < 100 && !ps.infeasible; ++pass) {
        changed = false;
        for (int r = 0; r < g.rows() && !ps.infeasible; ++r) {
            if (!ps.ineq_kept[r])
                continue;
            int count = 0, col = -1;
            double a = 0.0, contrib = 0.0;
            for (RowMat::InnerIterator it(g, r); it; ++it) {
                if (ps.fixed[it.col()]) {
                    contrib += it.value() * ps.value(it.col());
                } else {
                    ++count;
                    col = static_cast<int>(it.col());
                    a = it.value();
                }
            }
            if (count > 1)
                continue;
            const double rest = p.ineq_rhs(r) - contrib;
            ps.ineq_kept[r] = 0;
            changed = true;
            if (count == 0) {
                if (rest < -1e-9 * (1.0 + std::abs(p.ineq_rhs(r))))
                    ps.infeasible = true;
                continue;
            }
            const double bound = rest / a;
            if (a > 0.0 && bound < ps.ub(col)) {
                ps.ub(col) = bound;
                ps.ub_src[col] = r;
            } else if (a < 0.0 && bound > ps.lb(col)) {
                ps.lb(col) = bound;
                ps.lb_src[col] = r;
            }
            check_var(col);
        }
        for (int r = 0; r < e.rows() && !ps.infeasible; ++r) {
            if (!ps.eq_kept[r])
                continue;
            int count = 0, col = -1;
            double a = 0.0, contrib = 0.0;
            for (RowMat::InnerIterator it(e, r); it; ++it) {
                if (ps.fixed[it.col()]) {
                    contrib += it.value() * ps.value(it.col());
                } else {
                    ++count;
                    col = static_cast<int>(it.col());
                    a = it.value();
                }
            }
            if (count > 1)
                continue;
            const double rest = p.eq_rhs(r) - contrib;
            ps.eq_kept[r] = 0;
            changed = true;
            if (count == 0) {
                if (std::abs(rest) > 1e-9 * (1.0 + std::abs(p.eq_rhs(r))))
                    ps.infeasible = true;
                continue;
            }
            const double v = rest / a;
            const double tol = 1e-9 * std::max(1.0, std::abs(v));
            if (v < ps.lb(col) - tol || v > ps.ub(col) + tol) {
                ps.infeasible = true;
                continue;
            }
            ps.lb(col) = ps.ub(col) = v;
            ps.lb_src[col] = ps.ub_src[col] = -(r + 2);
            ps.fixed[col] = 1;
            ps.value(col) = v;
        }
    }
    return ps;
}

// ---------------------------------------------------------------------------
// Reduced, scaled problem:  min 0.5 x'Hx + c'x  s.t.  G x <= h,  E x = f

struct Reduced
{
    SparseMat H, G, E;
    Vec c, h, f;
};

// Regularized quasidefinite system
//   [H + rho I   G'              E'    ] [dx]
//   [G           -S/Z - rho I    0     ] [dz]
//   [E           0               -rho I] [dy]
// refined against the unregularized matrix.
class AugmentedSystem
{
public:
    AugmentedSystem(const SparseMat& H, const SparseMat& G, const SparseMat& E)
        : n_(static_cast<int>(H.rows())), m_(static_cast<int>(G.rows())), p_(static_cast<int>(E.rows()))
    {
        const int dim = n_ + m_ + p_;
        std::vector<Eigen::Triplet<double>> trip;
        for (int k = 0; k < H.outerSize(); ++k)
            for (SparseMat::InnerIterator it(H, k); it; ++it)
                if (it.row() != it.col())
                    trip.emplace_back(it.row(), it.col(), it.value());
        auto add_block = [&](const SparseMat& a, int off) {
            for (int k = 0; k < a.outerSize(); ++k)
                for (SparseMat::InnerIterator it(a, k); it; ++it) {
                    trip.emplace_back(off + it.row(), it.col(), it.value());
                    trip.emplace_back(it.col(), off + it.row(), it.value());
                }
        };
        add_block(G, n_);
        add_block(E, n_ + m_);
        offdiag_.resize(dim, dim);
        offdiag_.setFromTriplets(trip.begin(), trip.end());
        hdiag_ = H.diagonal();
        for (int i = 0; i < dim; ++i)
            trip.emplace_back(i, i, 1.0);
        pattern_.resize(dim, dim);
        pattern_.setFromTriplets(trip.begin(), trip.end());
        dense_ = dim <= 300 || static_cast<double>(pattern_.nonZeros()) > 0.2 * double(dim) * double(dim);
        if (!dense_)
            sparse_.analyzePattern(pattern_);
    }

    // `zdiag` holds the (negative) unregularized diagonal of the middle block.
    bool factor(const Vec& zdiag)
    {
        const int dim = n_ + m_ + p_;
        diag_.resize(dim);
        diag_ << hdiag_, zdiag, Vec::Zero(p_);
        for (double rho = 1e-10; rho < 1e-2; rho *= 100.0) {
            reg_.resize(dim);
            reg_ << Vec::Constant(n_, rho), Vec::Constant(m_, -rho), Vec::Constant(p_, -rho);
            const Vec d = diag_ + reg_;
            if (dense_) {
                Eigen::MatrixXd k = Eigen::MatrixXd(offdiag_);
                k.diagonal() += d;
                dense_ldlt_.compute(k);
                if (dense_ldlt_.info() == Eigen::Success && dense_ldlt_.vectorD().allFinite() &&
                    (dense_ldlt_.vectorD().array() != 0.0).all())
                    return true;
            } else {
                SparseMat dm(dim, dim);
                dm.setIdentity();
                dm.diagonal() = d;
                sparse_.factorize(SparseMat(offdiag_ + dm));
                if (sparse_.info() == Eigen::Success && sparse_.vectorD().allFinite() &&
                    (sparse_.vectorD().array() != 0.0).all())
                    return true;
            }
        }
        return false;
    }

    Vec solve(const Vec& b) const
    {
        Vec x = raw_solve(b);
        const double scale = 1.0 + inf_norm(b);
        double prev = kInf;
        for (int k = 0; k < 10; ++k) {
            const Vec r = b - multiply(x);
            const double res = inf_norm(r);
            if (res <= 1e-15 * scale || res >= 0.5 * prev)
                break;
            prev = res;
            x += raw_solve(r);
        }
        return x;
    }

private:
    Vec raw_solve(const Vec& b) const
    {
        return dense_ ? Vec(dense_ldlt_.solve(b)) : Vec(sparse_.solve(b));
    }

    Vec multiply(const Vec& v) const
    {
        return offdiag_ * v + diag_.cwiseProduct(v);
    }

    int n_, m_, p_;
    SparseMat offdiag_, pattern_;
    Vec hdiag_, diag_, reg_;
    bool dense_ = false;
    Eigen::SimplicialLDLT<SparseMat> sparse_;
    Eigen::LDLT<Eigen::MatrixXd> dense_ldlt_;
};

struct IpmOutcome
{
    bool converged = false;
    bool loose = false;
    int iterations = 0;
    Vec x, s, z, y;
    double pres = 0.0, dres = 0.0, gap = 0.0;
};

class Ipm
{
public:
    Ipm(const Reduced& r, const QpSettings& st) : r_(r), st_(st), kkt_(r.H, r.G, r.E)
    {
        n_ = static_cast<int>(r.c.size());
        m_ = static_cast<int>(r.h.size());
        p_ = static_cast<int>(r.f.size());
        gt_ = r.G.transpose();
        et_ = r.E.transpose();
        hnorm_ = inf_norm(r.h);
        fnorm_ = inf_norm(r.f);
        cnorm_ = inf_norm(r.c);
    }

    IpmOutcome run()
    {
        IpmOutcome out;
        Vec x = Vec::Zero(n_), y = Vec::Zero(p_);
        // Starting point: min 0.5 x'Hx + c'x + 0.5 |Gx - h|^2 subject to Ex = f.
        if (!kkt_.factor(Vec::Constant(m_, -1.0)))
            return out;
        {
            Vec rhs(n_ + m_ + p_);
            rhs << -r_.c, r_.h, r_.f;
            const Vec sol = kkt_.solve(rhs);
            x = sol.head(n_);
            y = sol.tail(p_);
        }
        Vec s = (r_.h - r_.G * x).cwiseMax(1.0);
        Vec z = Vec::Ones(m_);

        std::vector<double> pres_hist;
        double best_merit = kInf;
        int since_best = 0;
        IpmOutcome best;
        int tiny_steps = 0;
        for (int it = 0; it < st_.max_iter; ++it) {
            const Vec rd = r_.H * x + r_.c + gt_ * z + (p_ ? Vec(et_ * y) : Vec::Zero(n_));
            const Vec rp = r_.G * x + s - r_.h;
            const Vec re = p_ ? Vec(r_.E * x - r_.f) : Vec();
            const double mu = m_ ? s.dot(z) / m_ : 0.0;
            const double pobj = 0.5 * x.dot(r_.H * x) + r_.c.dot(x);
            out.pres = std::max(inf_norm(rp) / (1.0 + hnorm_), p_ ? inf_norm(re) / (1.0 + fnorm_) : 0.0);
            out.dres = inf_norm(rd) / (1.0 + cnorm_);
            out.gap = m_ ? s.dot(z) / (1.0 + std::abs(pobj)) : 0.0;
            out.iterations = it;
            out.x = x;
            out.s = s;
            out.z = z;
            out.y = y;
            if (out.pres <= st_.tol && out.dres <= st_.tol && out.gap <= st_.tol) {
                out.converged = true;
                return out;
            }
            const double merit = std::max({out.pres, out.dres, out.gap});
            if (merit < best_merit) {
                best_merit = merit;
                best = out;
                since_best = 0;
            } else if (++since_best >= 8 && best_merit <= st_.loose_tol) {
                break;  // no further progress near the optimum
            }
            // Stalled primal progress or exploding duals point to infeasibility.
            pres_hist.push_back(out.pres);
            if (it > 25 && out.pres > 1e-6 && out.pres > 0.9 * pres_hist[it - 15])
                break;
            if (inf_norm(z) > 1e14 * (1.0 + cnorm_))
                break;

            if (!kkt_.factor(-s.cwiseQuotient(z)))
                break;

            // Predictor.
            Vec dx, dy, ds, dz;
            const Vec rc_aff = s.cwiseProduct(z);
            direction(rd, rp, re, rc_aff, z, dx, dy, ds, dz);
            const double a_aff = step_length(s, z, ds, dz, 1.0);
            const double mu_aff = m_ ? (s + a_aff * ds).dot(z + a_aff * dz) / m_ : 0.0;
            const double sigma = mu > 0.0 ? std::pow(mu_aff / mu, 3) : 0.0;

            // Corrector.
            const Vec rc = rc_aff + ds.cwiseProduct(dz) - Vec::Constant(m_, sigma * mu);
            direction(rd, rp, re, rc, z, dx, dy, ds, dz);
            const double alpha = step_length(s, z, ds, dz, 0.995);
            if (alpha < 1e-10) {
                if (++tiny_steps >= 3)
                    break;
            } else {
                tiny_steps = 0;
            }
            x += alpha * dx;
            y += alpha * dy;
            s += alpha * ds;
            z += alpha * dz;
        }
        if (best.x.size() && std::max({best.pres, best.dres, best.gap}) <= std::max({out.pres, out.dres, out.gap}))
            out = best;
        out.loose = out.pres <= st_.loose_tol && out.dres <= st_.loose_tol && out.gap <= st_.loose_tol;
        return out;
    }

private:
    void direction(const Vec& rd, const Vec& rp, const Vec& re, const Vec& rc, const Vec& z,
                   Vec& dx, Vec& dy, Vec& ds, Vec& dz) const
    {
        Vec rhs(n_ + m_ + p_);
        rhs << -rd, -rp + rc.cwiseQuotient(z), (p_ ? Vec(-re) : Vec());
        const Vec sol = kkt_.solve(rhs);
        dx = sol.head(n_);
        dz = sol.segment(n_, m_);
        dy = sol.tail(p_);
        ds = -rp - r_.G * dx;
    }

    double step_length(const Vec& s, const Vec& z, const Vec& ds, const Vec& dz, double frac) const
    {
        double a = 1.0;
        for (int i = 0; i < m_; ++i) {
            if (ds(i) < 0.0)
                a = std::min(a, -frac * s(i) / ds(i));
            if (dz(i) < 0.0)
                a = std::min(a, -frac * z(i) / dz(i));
        }
        return a;
    }

    const Reduced& r_;
    const QpSettings& st_;
    AugmentedSystem kkt_;
    int n_ = 0, m_ = 0, p_ = 0;
    SparseMat gt_, et_;
    double hnorm_ = 0.0, fnorm_ = 0.0, cnorm_ = 0.0;
};

// Active-set polish: rows with z > s are treated as equalities and the
// resulting KKT system is solved directly. The polished point replaces the
// interior iterate only if it is primal and dual feasible and no worse.
void polish(const Reduced& r, const QpSettings& st, IpmOutcome& out)
{
    const int n = static_cast<int>(r.c.size());
    const int m = static_cast<int>(r.h.size());
    const int p = static_cast<int>(r.f.size());
    std::vector<int> active;
    for (int i = 0; i < m; ++i)
        if (out.z(i) > out.s(i))
            active.push_back(i);
    const int ma = static_cast<int>(active.size());
    SparseMat ga(ma, n);
    {
        std::vector<int> pos(m, -1);
        for (int k = 0; k < ma; ++k)
            pos[active[k]] = k;
        std::vector<Eigen::Triplet<double>> trip;
        for (int k = 0; k < r.G.outerSize(); ++k)
            for (SparseMat::InnerIterator it(r.G, k); it; ++it)
                if (pos[it.row()] >= 0)
                    trip.emplace_back(pos[it.row()], it.col(), it.value());
        ga.setFromTriplets(trip.begin(), trip.end());
    }
    AugmentedSystem kkt(r.H, ga, r.E);
    if (!kkt.factor(Vec::Zero(ma)))
        return;
    Vec rhs(n + ma + p);
    Vec ha(ma);
    for (int k = 0; k < ma; ++k)
        ha(k) = r.h(active[k]);
    rhs << -r.c, ha, r.f;
    const Vec sol = kkt.solve(rhs);
    if (!sol.allFinite())
        return;
    const Vec x = sol.head(n);
    Vec z = Vec::Zero(m);
    for (int k = 0; k < ma; ++k)
        z(active[k]) = std::max(0.0, sol(n + k));
    const Vec y = sol.tail(p);
    const Vec s = r.h - r.G * x;

    const double hn = inf_norm(r.h), fn = inf_norm(r.f), cn = inf_norm(r.c);
    double viol = 0.0;
    for (int i = 0; i < m; ++i)
        viol = std::max(viol, -s(i));
    const double pres = std::max(viol / (1.0 + hn), p ? inf_norm(Vec(r.E * x - r.f)) / (1.0 + fn) : 0.0);
    const Vec rd = r.H * x + r.c + r.G.transpose() * z + (p ? Vec(r.E.transpose() * y) : Vec::Zero(n));
    const double dres = inf_norm(rd) / (1.0 + cn);
    double comp = 0.0;
    for (int i = 0; i < m; ++i)
        comp = std::max(comp, std::abs(z(i) * s(i)));
    const double pobj = 0.5 * x.dot(r.H * x) + r.c.dot(x);
    const double gap = comp * m / (1.0 + std::abs(pobj));
    const double merit = std::max({pres, dres, gap});
    if (merit > std::max(st.tol, std::max({out.pres, out.dres, out.gap})))
        return;
    out.x = x;
    out.z = z;
    out.y = y;
    out.s = s.cwiseMax(0.0);
    out.pres = pres;
    out.dres = dres;
    out.gap = gap;
    out.converged = merit <= st.tol;
    out.loose = merit <= st.loose_tol;
}

// Diagonal equilibration of [H G' E'; G 0 0; E 0 0] plus objective scaling.
struct Scaling
{
    Vec d, rg, re;
    double cost = 1.0;
};

Vec col_inf_norms(const SparseMat& a)
{
    Vec out = Vec::Zero(a.cols());
    for (int k = 0; k < a.outerSize(); ++k)
        for (SparseMat::InnerIterator it(a, k); it; ++it)
            out(it.col()) = std::max(out(it.col()), std::abs(it.value()));
    return out;
}

Vec row_inf_norms(const SparseMat& a)
{
    Vec out = Vec::Zero(a.rows());
    for (int k = 0; k < a.outerSize(); ++k)
        for (SparseMat::InnerIterator it(a, k); it; ++it)
            out(it.row()) = std::max(out(it.row()), std::abs(it.value()));
    return out;
}

Vec inv_sqrt(const Vec& v)
{
    Vec out(v.size());
    for (Eigen::Index i = 0; i < v.size(); ++i)
        out(i) = v(i) > 0.0 ? 1.0 / std::sqrt(v(i)) : 1.0;
    return out;
}

Scaling equilibrate(Reduced& r, int iters)
{
    Scaling sc;
    sc.d = Vec::Ones(r.c.size());
    sc.rg = Vec::Ones(r.h.size());
    sc.re = Vec::Ones(r.f.size());
    for (int k = 0; k < iters; ++k) {
        Vec cn = col_inf_norms(r.H).cwiseMax(col_inf_norms(r.G)).cwiseMax(col_inf_norms(r.E));
        const Vec dd = inv_sqrt(cn);
        const Vec dg = inv_sqrt(row_inf_norms(r.G));
        const Vec de = inv_sqrt(row_inf_norms(r.E));
        r.H = dd.asDiagonal() * r.H * dd.asDiagonal();
        r.G = dg.asDiagonal() * r.G * dd.asDiagonal();
        r.E = de.asDiagonal() * r.E * dd.asDiagonal();
        r.c = dd.cwiseProduct(r.c);
        r.h = dg.cwiseProduct(r.h);
        r.f = de.cwiseProduct(r.f);
        sc.d = sc.d.cwiseProduct(dd);
        sc.rg = sc.rg.cwiseProduct(dg);
        sc.re = sc.re.cwiseProduct(de);
    }
    const double cn = inf_norm(r.c);
    sc.cost = 1.0 / std::clamp(cn, 1.0, 1e8);
    r.H *= sc.cost;
    r.c *= sc.cost;
    return sc;
}

// min t  s.t.  G x - t <= h,  +-(E x - f) - t <= 0,  t >= -1
double phase_one(const Reduced& r, const QpSettings& st, bool& ok)
{
    const int n = static_cast<int>(r.c.size());
    const int m = static_cast<int>(r.h.size());
    const int p = static_cast<int>(r.f.size());
    Reduced q;
    q.H.resize(n + 1, n + 1);
    q.c = Vec::Zero(n + 1);
    q.c(n) = 1.0;
    std::vector<Eigen::Triplet<double>> trip;
    for (int k = 0; k < r.G.outerSize(); ++k)
        for (SparseMat::InnerIterator it(r.G, k); it; ++it)
            trip.emplace_back(it.row(), it.col(), it.value());
    for (int k = 0; k < r.E.outerSize(); ++k)
        for (SparseMat::InnerIterator it(r.E, k); it; ++it) {
            trip.emplace_back(m + it.row(), it.col(), it.value());
            trip.emplace_back(m + p + it.row(), it.col(), -it.value());
        }
    for (int i = 0; i < m + 2 * p; ++i)
        trip.emplace_back(i, n, -1.0);
    trip.emplace_back(m + 2 * p, n, -1.0);
    q.G.resize(m + 2 * p + 1, n + 1);
    q.G.setFromTriplets(trip.begin(), trip.end());
    q.h.resize(m + 2 * p + 1);
    q.h << r.h, r.f, -r.f, 1.0;
    q.E.resize(0, n + 1);
    q.f.resize(0);
    QpSettings s1 = st;
    s1.max_iter = std::max(st.max_iter, 150);
    Ipm ipm(q, s1);
    IpmOutcome out = ipm.run();
    ok = out.converged || out.loose;
    return out.x.size() ? out.x(n) : kInf;
}

} // namespace

QpResult solve_qp(const MiqpProblem& p, const QpSettings& settings, const Vec* lower_override,
                  const Vec* upper_override)
{
    const int n = p.num_vars();
    const Vec& lower = lower_override ? *lower_override : p.lower;
    const Vec& upper = upper_override ? *upper_override : p.upper;
    if (lower.size() != n || upper.size() != n)
        throw std::invalid_argument("solve_qp: bound vectors have wrong length");

    QpResult res;
    Presolve ps = presolve(p, lower, upper);
    if (ps.infeasible) {
        res.status = QpStatus::Infeasible;
        res.infeasible_in_presolve = true;
        return res;
    }

    // Map free variables and kept rows.
    std::vector<int> pos(n, -1), free_idx;
    for (int j = 0; j < n; ++j)
        if (!ps.fixed[j]) {
            pos[j] = static_cast<int>(free_idx.size());
            free_idx.push_back(j);
        }
    const int nr = static_cast<int>(free_idx.size());
    std::vector<int> gmap(p.num_ineq(), -1), emap(p.num_eq(), -1);
    std::vector<int> grow_src, erow_src;
    for (int r = 0; r < p.num_ineq(); ++r)
        if (ps.ineq_kept[r]) {
            gmap[r] = static_cast<int>(grow_src.size());
            grow_src.push_back(r);
        }
    for (int r = 0; r < p.num_eq(); ++r)
        if (ps.eq_kept[r]) {
            emap[r] = static_cast<int>(erow_src.size());
            erow_src.push_back(r);
        }
    // Bound rows: +1 for x <= ub, -1 for -x <= -lb.
    std::vector<std::pair<int, int>> bound_rows;
    for (int k = 0; k < nr; ++k) {
        const int j = free_idx[k];
        if (std::isfinite(ps.lb(j)))
            bound_rows.emplace_back(k, -1);
        if (std::isfinite(ps.ub(j)))
            bound_rows.emplace_back(k, +1);
    }

    const Vec xfix = ps.value;
    Reduced red;
    {
        std::vector<Eigen::Triplet<double>> th, tg, te;
        red.c = Vec::Zero(nr);
        const Vec hx = p.hessian * xfix;
        for (int k = 0; k < nr; ++k)
            red.c(k) = p.linear(free_idx[k]) + hx(free_idx[k]);
        for (int col = 0; col < p.hessian.outerSize(); ++col)
            for (SparseMat::InnerIterator it(p.hessian, col); it; ++it)
                if (pos[it.row()] >= 0 && pos[it.col()] >= 0)
                    th.emplace_back(pos[it.row()], pos[it.col()], it.value());
        const int mk = static_cast<int>(grow_src.size());
        red.h.resize(mk + static_cast<int>(bound_rows.size()));
        for (int i = 0; i < mk; ++i)
            red.h(i) = p.ineq_rhs(grow_src[i]);
        for (int col = 0; col < p.ineq.outerSize(); ++col)
            for (SparseMat::InnerIterator it(p.ineq, col); it; ++it) {
                const int gi = gmap[it.row()];
                if (gi < 0)
                    continue;
                if (pos[it.col()] >= 0)
                    tg.emplace_back(gi, pos[it.col()], it.value());
                else
                    red.h(gi) -= it.value() * xfix(it.col());
            }
        for (std::size_t b = 0; b < bound_rows.size(); ++b) {
            const auto [k, sign] = bound_rows[b];
            tg.emplace_back(mk + static_cast<int>(b), k, static_cast<double>(sign));
            red.h(mk + static_cast<int>(b)) = sign > 0 ? ps.ub(free_idx[k]) : -ps.lb(free_idx[k]);
        }
        const int me = static_cast<int>(erow_src.size());
        red.f.resize(me);
        for (int i = 0; i < me; ++i)
            red.f(i) = p.eq_rhs(erow_src[i]);
        for (int col = 0; col < p.eq.outerSize(); ++col)
            for (SparseMat::InnerIterator it(p.eq, col); it; ++it) {
                const int ei = emap[it.row()];
                if (ei < 0)
                    continue;
                if (pos[it.col()] >= 0)
                    te.emplace_back(ei, pos[it.col()], it.value());
                else
                    red.f(ei) -= it.value() * xfix(it.col());
            }
        red.H.resize(nr, nr);
        red.H.setFromTriplets(th.begin(), th.end());
        red.G.resize(red.h.size(), nr);
        red.G.setFromTriplets(tg.begin(), tg.end());
        red.E.resize(me, nr);
        red.E.setFromTriplets(te.begin(), te.end());
    }

    Vec x = xfix;
    res.z_ineq = Vec::Zero(p.num_ineq());
    res.y_eq = Vec::Zero(p.num_eq());
    res.z_lower = Vec::Zero(n);
    res.z_upper = Vec::Zero(n);

    auto assign_bound_multiplier = [&](int j, double mult, bool upper_side) {
        const int src = upper_side ? ps.ub_src[j] : ps.lb_src[j];
        if (src == kSrcBound) {
            (upper_side ? res.z_upper : res.z_lower)(j) += mult;
            return;
        }
        if (src >= 0) {
            const double a = p.ineq.coeff(src, j);
            res.z_ineq(src) += mult / std::abs(a);
        } else {
            const int r = -src - 2;
            const double a = p.eq.coeff(r, j);
            res.y_eq(r) += (upper_side ? mult : -mult) / a;
        }
    };

    if (nr > 0) {
        Reduced scaled = red;
        const Scaling sc = equilibrate(scaled, settings.ruiz_iter);
        Ipm ipm(scaled, settings);
        IpmOutcome out = ipm.run();
        if ((out.converged || out.loose) && out.z.size())
            polish(scaled, settings, out);
        res.iterations = out.iterations;
        if (!out.converged && !out.loose) {
            bool ok = false;
            const double t = phase_one(scaled, settings, ok);
            if (ok && t > settings.feas_tol) {
                res.status = QpStatus::Infeasible;
                return res;
            }
            throw SolverError("interior-point method did not converge (primal " +
                                  std::to_string(out.pres) + ", dual " + std::to_string(out.dres) +
                                  ", gap " + std::to_string(out.gap) + ")",
                              out.pres, out.dres, out.gap);
        }
        res.reduced_accuracy = !out.converged;
        const Vec xr = sc.d.cwiseProduct(out.x);
        for (int k = 0; k < nr; ++k)
            x(free_idx[k]) = xr(k);
        const Vec zr = sc.rg.cwiseProduct(out.z) / sc.cost;
        const Vec yr = out.y.size() ? Vec(sc.re.cwiseProduct(out.y) / sc.cost) : Vec();
        const int mk = static_cast<int>(grow_src.size());
        for (int i = 0; i < mk; ++i)
            res.z_ineq(grow_src[i]) = zr(i);
        for (int i = 0; i < static_cast<int>(erow_src.size()); ++i)
            res.y_eq(erow_src[i]) = yr(i);
        for (std::size_t b = 0; b < bound_rows.size(); ++b) {
            const auto [k, sign] = bound_rows[b];
            assign_bound_multiplier(free_idx[k], zr(mk + static_cast<int>(b)), sign > 0);
        }
    }

    // Fixed variables: their bound multipliers absorb the remaining stationarity.
    {
        Vec grad = p.hessian * x + p.linear + p.ineq.transpose() * res.z_ineq +
                   p.eq.transpose() * res.y_eq + res.z_upper - res.z_lower;
        for (int j = 0; j < n; ++j) {
            if (!ps.fixed[j])
                continue;
            const double g = grad(j);
            if (g > 0.0)
                assign_bound_multiplier(j, g, false);
            else if (g < 0.0)
                assign_bound_multiplier(j, -g, true);
        }
    }

    res.status = QpStatus::Optimal;
    res.x = x;
    res.objective = p.objective(x);
    const Vec grad = p.hessian * x + p.linear + p.ineq.transpose() * res.z_ineq +
                     p.eq.transpose() * res.y_eq + res.z_upper - res.z_lower;
    res.stationarity = inf_norm(grad);
    res.primal_infeasibility = std::max(0.0, p.max_violation(x));
    double dinf = 0.0, comp = 0.0;
    const Vec gx = p.ineq * x;
    for (int i = 0; i < p.num_ineq(); ++i) {
        dinf = std::max(dinf, -res.z_ineq(i));
        comp = std::max(comp, std::abs(res.z_ineq(i) * (p.ineq_rhs(i) - gx(i))));
    }
    for (int j = 0; j < n; ++j) {
        dinf = std::max({dinf, -res.z_lower(j), -res.z_upper(j)});
        if (std::isfinite(lower(j)))
            comp = std::max(comp, std::abs(res.z_lower(j) * (x(j) - lower(j))));
        if (std::isfinite(upper(j)))
            comp = std::max(comp, std::abs(res.z_upper(j) * (upper(j) - x(j))));
    }
    res.dual_infeasibility = dinf;
    res.complementarity = comp;
    return res;
}

} // namespace atesmpc
