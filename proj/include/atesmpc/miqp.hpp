#pragma once

#include <iosfwd>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "atesmpc/problem.hpp"

namespace atesmpc {

/// Raised when the interior-point method fails to converge on a problem that
/// the phase-1 program reports as feasible.
class SolverError : public std::runtime_error
{
public:
    SolverError(const std::string& what, double primal, double dual, double comp)
        : std::runtime_error(what), primal_residual(primal), dual_residual(dual),
          complementarity(comp)
    {
    }
    double primal_residual;
    double dual_residual;
    double complementarity;
};

struct QpSettings
{
    double tol = 1e-10;        // relative KKT tolerance on the scaled problem
    double loose_tol = 1e-6;   // accepted only if the iteration cap is reached
    int max_iter = 120;
    int ruiz_iter = 15;
    double feas_tol = 1e-7;    // phase-1 threshold
};

enum class QpStatus { Optimal, Infeasible };

struct QpResult
{
    QpStatus status = QpStatus::Infeasible;
    Eigen::VectorXd x;
    Eigen::VectorXd z_ineq;   // multipliers of G x <= g
    Eigen::VectorXd y_eq;     // multipliers of E x = f
    Eigen::VectorXd z_lower;  // multipliers of x >= lower
    Eigen::VectorXd z_upper;  // multipliers of x <= upper
    double objective = 0.0;
    int iterations = 0;
    bool reduced_accuracy = false;
    bool infeasible_in_presolve = false;
    // Residuals of the original problem at (x, z, y).
    double stationarity = 0.0;
    double primal_infeasibility = 0.0;
    double dual_infeasibility = 0.0;
    double complementarity = 0.0;
};

/// Continuous relaxation (integrality ignored). `lower` and `upper` override the
/// variable bounds of `p` when given.
QpResult solve_qp(const MiqpProblem& p, const QpSettings& settings = {},
                  const Eigen::VectorXd* lower = nullptr, const Eigen::VectorXd* upper = nullptr);

struct MiqpLimits
{
    double rel_gap = 1e-4;
    double abs_gap = 1e-7;
    long max_nodes = 20000;
    double time_limit = 0.0;  // seconds; 0 disables and keeps the solve deterministic
    double int_tol = 1e-5;
};

enum class MiqpStatus { Optimal, Infeasible, GapLimit, NodeLimit, TimeLimit };

const char* status_name(MiqpStatus s);

struct MiqpSolution
{
    MiqpStatus status = MiqpStatus::Infeasible;
    Eigen::VectorXd values;
    double objective = 0.0;
    double gap = 0.0;
    long nodes = 0;
    double wall_time = 0.0;
    double root_bound = 0.0;
    double best_bound = 0.0;
    bool has_incumbent = false;
    int numerical_failures = 0;
    /// (parent bound, child bound) for every child relaxation solved.
    std::vector<std::pair<double, double>> bound_log;
};

/// Best-first branch and bound. `binary_guess`, if given, is tried as an
/// incumbent seed (binaries fixed to its rounded values) before branching.
MiqpSolution solve_miqp(const MiqpProblem& p, const MiqpLimits& limits = {},
                        const Eigen::VectorXd* binary_guess = nullptr,
                        const QpSettings& qp = {});

/// Labeled solution vector: header, status line, then "label value" lines.
void write_solution(std::ostream& os, const MiqpProblem& p, const MiqpSolution& s);

} // namespace atesmpc
