#include "atesmpc/miqp.hpp"

#include <algorithm>
#include <chrono>
#include <limits>
#include <memory>
#include <optional>
#include <cmath>
#include <ostream>
#include <queue>
#include <set>

#include "atesmpc/format.hpp"

namespace atesmpc {

const char* status_name(MiqpStatus s)
{
    switch (s) {
    case MiqpStatus::Optimal: return "optimal";
    case MiqpStatus::Infeasible: return "infeasible";
    case MiqpStatus::GapLimit: return "gap_limit";
    case MiqpStatus::NodeLimit: return "node_limit";
    case MiqpStatus::TimeLimit: return "time_limit";
    }
    return "?";
}

namespace {

struct Node
{
    double bound;
    long id;
    Eigen::VectorXd lower, upper;
    Eigen::VectorXd x;  // relaxation solution
};

struct NodeOrder
{
    bool operator()(const Node* a, const Node* b) const
    {
        if (a->bound != b->bound)
            return a->bound > b->bound;
        return a->id > b->id;
    }
};

class BranchAndBound
{
public:
    BranchAndBound(const MiqpProblem& p, const MiqpLimits& lim, const QpSettings& qp)
        : p_(p), lim_(lim), qp_(qp)
    {
        for (int j = 0; j < p.num_vars(); ++j)
            if (p.integrality[j])
                bins_.push_back(j);
    }

    MiqpSolution run(const Eigen::VectorXd* guess)
    {
        const auto t0 = std::chrono::steady_clock::now();
        MiqpSolution sol;

        std::optional<QpResult> root = relax(p_.lower, p_.upper, sol);
        sol.nodes = 1;
        if (!root) {
            sol.status = MiqpStatus::Infeasible;
            sol.wall_time = elapsed(t0);
            return sol;
        }
        sol.root_bound = root->objective;

        if (guess && guess->size() == p_.num_vars())
            try_assignment(*guess, 0.5, sol);
        if (!bins_.empty()) {
            try_assignment(root->x, 0.5, sol);
            try_assignment(root->x, 1e-6, sol);
        }

        std::vector<std::unique_ptr<Node>> store;
        std::priority_queue<Node*, std::vector<Node*>, NodeOrder> open;
        auto push = [&](double bound, Eigen::VectorXd lo, Eigen::VectorXd hi, Eigen::VectorXd x) {
            store.push_back(std::make_unique<Node>(Node{bound, next_id_++, std::move(lo), std::move(hi), std::move(x)}));
            open.push(store.back().get());
        };
        push(root->objective, p_.lower, p_.upper, root->x);

        MiqpStatus limit_status = MiqpStatus::Optimal;
        while (!open.empty()) {
            Node* node = open.top();
            const double lb = node->bound;
            if (sol.has_incumbent && converged(sol.objective, lb, sol))
                break;
            if (lim_.time_limit > 0.0 && elapsed(t0) > lim_.time_limit) {
                limit_status = MiqpStatus::TimeLimit;
                break;
            }
            open.pop();

            const int j = branching_variable(node->x);
            if (j < 0) {
                // Integral relaxation: polish with the binaries fixed.
                try_assignment(node->x, 0.5, sol);
                continue;
            }
            for (int side = 0; side < 2; ++side) {
                if (sol.nodes >= lim_.max_nodes) {
                    limit_status = MiqpStatus::NodeLimit;
                    break;
                }
                Eigen::VectorXd lo = node->lower, hi = node->upper;
                lo(j) = hi(j) = side;
                std::optional<QpResult> r = relax(lo, hi, sol);
                ++sol.nodes;
                if (!r)
                    continue;
                sol.bound_log.emplace_back(node->bound, r->objective);
                const double child = std::max(r->objective, node->bound);
                if (sol.has_incumbent && child >= sol.objective - gap_tolerance(sol.objective))
                    continue;
                push(child, std::move(lo), std::move(hi), r->x);
            }
            if (limit_status == MiqpStatus::NodeLimit)
                break;
        }

        sol.best_bound = open.empty() ? (sol.has_incumbent ? sol.objective : kInfBound)
                                      : std::min(open.top()->bound, sol.has_incumbent ? sol.objective : kInfBound);
        if (!sol.has_incumbent) {
            sol.status = open.empty() && limit_status == MiqpStatus::Optimal ? MiqpStatus::Infeasible
                                                                             : limit_status;
            sol.wall_time = elapsed(t0);
            return sol;
        }
        sol.gap = relative_gap(sol.objective, sol.best_bound);
        if (open.empty() && limit_status == MiqpStatus::Optimal)
            sol.status = MiqpStatus::Optimal;
        else if (converged(sol.objective, sol.best_bound, sol))
            sol.status = sol.gap <= 1e-9 ? MiqpStatus::Optimal : MiqpStatus::GapLimit;
        else
            sol.status = limit_status == MiqpStatus::Optimal ? MiqpStatus::NodeLimit : limit_status;
        sol.wall_time = elapsed(t0);
        return sol;
    }

private:
    static constexpr double kInfBound = std::numeric_limits<double>::infinity();

    static double elapsed(std::chrono::steady_clock::time_point t0)
    {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }

    static double relative_gap(double ub, double lb)
    {
        if (!std::isfinite(lb))
            return 0.0;
        return std::max(0.0, ub - lb) / std::max(1.0, std::abs(ub));
    }

    double gap_tolerance(double ub) const
    {
        return std::max(lim_.abs_gap, lim_.rel_gap * std::max(1.0, std::abs(ub)));
    }

    bool converged(double ub, double lb, const MiqpSolution&) const
    {
        return ub - lb <= gap_tolerance(ub);
    }

    std::optional<QpResult> relax(const Eigen::VectorXd& lo, const Eigen::VectorXd& hi, MiqpSolution& sol)
    {
        try {
            QpResult r = solve_qp(p_, qp_, &lo, &hi);
            if (r.status != QpStatus::Optimal)
                return std::nullopt;
            return r;
        } catch (const SolverError&) {
            ++sol.numerical_failures;
            return std::nullopt;
        }
    }

    // Most fractional binary, lowest index on ties; -1 if all are integral.
    int branching_variable(const Eigen::VectorXd& x) const
    {
        int best = -1;
        double best_dist = 0.5;
        for (int j : bins_) {
            const double f = x(j) - std::floor(x(j));
            const double frac = std::min(f, 1.0 - f);
            if (frac <= lim_.int_tol)
                continue;
            const double dist = std::abs(x(j) - std::floor(x(j)) - 0.5);
            if (best < 0 || dist < best_dist) {
                best = j;
                best_dist = dist;
            }
        }
        return best;
    }

    // Rounds binaries (value > threshold -> 1), solves the remaining QP and
    // keeps the result if it improves the incumbent.
    void try_assignment(const Eigen::VectorXd& x, double threshold, MiqpSolution& sol)
    {
        Eigen::VectorXd lo = p_.lower, hi = p_.upper;
        std::vector<char> key;
        key.reserve(bins_.size());
        for (int j : bins_) {
            double v = x(j) > threshold ? 1.0 : 0.0;
            v = std::clamp(v, p_.lower(j), p_.upper(j));
            lo(j) = hi(j) = v;
            key.push_back(v > 0.5 ? 1 : 0);
        }
        if (!tried_.insert(key).second)
            return;
        std::optional<QpResult> r = relax(lo, hi, sol);
        if (!r)
            return;
        if (!sol.has_incumbent || r->objective < sol.objective) {
            sol.has_incumbent = true;
            sol.objective = r->objective;
            sol.values = r->x;
            for (int j : bins_)
                sol.values(j) = lo(j);
        }
    }

    const MiqpProblem& p_;
    const MiqpLimits& lim_;
    const QpSettings& qp_;
    std::vector<int> bins_;
    std::set<std::vector<char>> tried_;
    long next_id_ = 0;
};

} // namespace

MiqpSolution solve_miqp(const MiqpProblem& p, const MiqpLimits& limits,
                        const Eigen::VectorXd* binary_guess, const QpSettings& qp)
{
    p.validate();
    BranchAndBound bb(p, limits, qp);
    return bb.run(binary_guess);
}

void write_solution(std::ostream& os, const MiqpProblem& p, const MiqpSolution& s)
{
    os << "# atesmpc-solution 1\n";
    os << "status " << status_name(s.status) << '\n';
    os << "objective " << format_double(s.objective) << '\n';
    os << "gap " << format_double(s.gap) << '\n';
    os << "nodes " << s.nodes << '\n';
    os << "values " << s.values.size() << '\n';
    for (Eigen::Index j = 0; j < s.values.size(); ++j) {
        const std::string label = j < static_cast<Eigen::Index>(p.var_labels.size())
                                      ? p.var_labels[j]
                                      : "x" + std::to_string(j);
        os << label << ' ' << format_double(s.values(j)) << '\n';
    }
}

} // namespace atesmpc
