#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

namespace atesmpc {

using SparseMat = Eigen::SparseMatrix<double>;

/// minimize 0.5 x'Hx + c'x + constant
/// subject to G x <= g, E x = f, lower <= x <= upper, x_j in {0,1} where integrality[j].
struct MiqpProblem
{
    SparseMat hessian;
    Eigen::VectorXd linear;
    double constant = 0.0;
    SparseMat ineq;
    Eigen::VectorXd ineq_rhs;
    SparseMat eq;
    Eigen::VectorXd eq_rhs;
    std::vector<char> integrality;
    Eigen::VectorXd lower;
    Eigen::VectorXd upper;
    std::vector<std::string> var_labels;
    std::vector<std::string> ineq_labels;
    std::vector<std::string> eq_labels;

    int num_vars() const { return static_cast<int>(linear.size()); }
    int num_ineq() const { return static_cast<int>(ineq_rhs.size()); }
    int num_eq() const { return static_cast<int>(eq_rhs.size()); }
    int num_binaries() const;

    double objective(const Eigen::VectorXd& x) const;
    /// Largest violation over rows and variable bounds.
    double max_violation(const Eigen::VectorXd& x) const;
    /// Throws std::invalid_argument on inconsistent dimensions, an asymmetric
    /// hessian, crossed bounds or binaries with bounds outside [0,1].
    void validate() const;
};

/// Dense row-major text format:
///
///   # atesmpc-miqp 1
///   dims <n> <m_ineq> <m_eq>
///   objective_constant <c0>
///   integrality <n flags>
///   lower <n>
///   upper <n>
///   linear <n>
///   hessian            followed by n rows of n values
///   ineq               followed by m_ineq rows of n coefficients then rhs
///   eq                 followed by m_eq rows of n coefficients then rhs
///   var_labels         followed by n lines
///   ineq_labels        followed by m_ineq lines
///   eq_labels          followed by m_eq lines
///   end
void write_problem(std::ostream& os, const MiqpProblem& p);
MiqpProblem read_problem(std::istream& is);
std::string to_text(const MiqpProblem& p);

} // namespace atesmpc
