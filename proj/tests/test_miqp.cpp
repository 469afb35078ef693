#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>
#include <sstream>

#include "atesmpc/miqp.hpp"
#include "oracles.hpp"

using namespace atesmpc;

namespace {

// min (u - 1)^2 + 2v  s.t. u <= 2v, u >= 0, v binary
MiqpProblem gated_example()
{
    MiqpProblem p;
    p.hessian.resize(2, 2);
    p.hessian.insert(0, 0) = 2.0;
    p.linear = Eigen::Vector2d(-2.0, 2.0);
    p.constant = 1.0;
    p.ineq.resize(1, 2);
    p.ineq.insert(0, 0) = 1.0;
    p.ineq.insert(0, 1) = -2.0;
    p.ineq_rhs = Eigen::VectorXd::Zero(1);
    p.eq.resize(0, 2);
    p.eq_rhs.resize(0);
    p.integrality = {0, 1};
    p.lower = Eigen::Vector2d(0.0, 0.0);
    p.upper = Eigen::Vector2d(std::numeric_limits<double>::infinity(), 1.0);
    return p;
}

bool binaries_exact(const MiqpProblem& p, const Eigen::VectorXd& x)
{
    for (int j = 0; j < p.num_vars(); ++j)
        if (p.integrality[j] && std::abs(x(j) - std::round(x(j))) > 1e-5)
            return false;
    return true;
}

} // namespace

TEST_CASE("gated example")
{
    const MiqpProblem p = gated_example();
    const MiqpSolution s = solve_miqp(p);
    REQUIRE(s.status == MiqpStatus::Optimal);
    CHECK(s.values(1) == 0.0);
    CHECK(std::abs(s.values(0)) <= 1e-8);
    CHECK(s.objective == doctest::Approx(1.0).epsilon(1e-8));
    // Both branches by hand: v = 0 gives 1, v = 1 gives 2.
    const oracle::OracleResult ref = oracle::brute_force_miqp(p);
    CHECK(ref.objective == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("empty integrality mask reduces to the relaxation")
{
    std::mt19937_64 rng(5);
    for (int k = 0; k < 20; ++k) {
        const MiqpProblem p = oracle::random_miqp(rng, 5, 0, 6);
        const MiqpSolution s = solve_miqp(p);
        const QpResult r = solve_qp(p);
        REQUIRE(s.status == MiqpStatus::Optimal);
        CHECK(s.nodes == 1);
        CHECK(s.objective == r.objective);
        CHECK(s.values == r.x);
    }
}

TEST_CASE("random MIQPs against exhaustive enumeration")
{
    std::mt19937_64 rng(77);
    std::uniform_int_distribution<int> dc(1, 6), db(1, 6), dm(1, 10);
    int feasible = 0;
    for (int trial = 0; trial < 100; ++trial) {
        const int nb = db(rng);
        const MiqpProblem p = oracle::random_miqp(rng, dc(rng), nb, dm(rng));
        const oracle::OracleResult ref = oracle::brute_force_miqp(p);
        const MiqpSolution s = solve_miqp(p);
        REQUIRE(ref.feasible);
        ++feasible;
        REQUIRE(s.has_incumbent);
        CHECK(std::abs(s.objective - ref.objective) <= 1e-6 * std::max(1.0, std::abs(ref.objective)));
        CHECK(p.max_violation(s.values) <= 1e-6);
        CHECK(binaries_exact(p, s.values));
        CHECK(s.objective >= s.root_bound - 1e-8);
        if (s.status == MiqpStatus::Optimal)
            CHECK(std::abs(p.objective(s.values) - s.objective) <= 1e-6 * std::max(1.0, std::abs(s.objective)));
    }
    CHECK(feasible == 100);
}

TEST_CASE("child bounds never drop below the parent")
{
    std::mt19937_64 rng(99);
    for (int trial = 0; trial < 40; ++trial) {
        const MiqpProblem p = oracle::random_miqp(rng, 4, 6, 8);
        MiqpLimits lim;
        lim.rel_gap = 0.0;
        lim.abs_gap = 0.0;
        const MiqpSolution s = solve_miqp(p, lim);
        for (const auto& [parent, child] : s.bound_log)
            CHECK(child >= parent - 1e-9 * std::max(1.0, std::abs(parent)));
    }
}

TEST_CASE("determinism")
{
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 10; ++trial) {
        const MiqpProblem p = oracle::random_miqp(rng, 5, 5, 8);
        std::ostringstream a, b;
        write_solution(a, p, solve_miqp(p));
        // Round trip through the text format first.
        std::istringstream in(to_text(p));
        const MiqpProblem q = read_problem(in);
        write_solution(b, q, solve_miqp(q));
        CHECK(a.str() == b.str());
    }
}

TEST_CASE("sandwich: root bound <= optimum <= any feasible rounding")
{
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 30; ++trial) {
        const MiqpProblem p = oracle::random_miqp(rng, 4, 4, 6);
        const MiqpSolution s = solve_miqp(p);
        REQUIRE(s.has_incumbent);
        const QpResult root = solve_qp(p);
        CHECK(root.objective <= s.objective + 1e-8);
        for (unsigned mask = 0; mask < 16; ++mask) {
            Eigen::VectorXd lo = p.lower, hi = p.upper;
            for (int k = 0; k < 4; ++k)
                lo(4 + k) = hi(4 + k) = (mask >> k) & 1u;
            const QpResult r = solve_qp(p, {}, &lo, &hi);
            if (r.status == QpStatus::Optimal)
                CHECK(s.objective <= r.objective + 1e-6 * std::max(1.0, std::abs(r.objective)));
        }
    }
}

TEST_CASE("infeasible problems and limits")
{
    MiqpProblem p = gated_example();
    // u >= 1 forces v = 1 and u <= 2v; also require v <= 0.4 through a row.
    p.ineq.conservativeResize(3, 2);
    p.ineq.insert(1, 0) = -1.0;
    p.ineq.insert(2, 1) = 1.0;
    p.ineq_rhs.conservativeResize(3);
    p.ineq_rhs(1) = -1.0;
    p.ineq_rhs(2) = 0.4;
    const MiqpSolution s = solve_miqp(p);
    CHECK(s.status == MiqpStatus::Infeasible);
    CHECK_FALSE(s.has_incumbent);

    std::mt19937_64 rng(1234);
    const MiqpProblem q = oracle::random_miqp(rng, 3, 6, 10);
    MiqpLimits lim;
    lim.max_nodes = 1;
    lim.rel_gap = 0.0;
    lim.abs_gap = 0.0;
    const MiqpSolution t = solve_miqp(q, lim);
    CHECK(t.nodes <= 1);
    CHECK((t.status == MiqpStatus::NodeLimit || t.status == MiqpStatus::Optimal));
}

TEST_CASE("binary guess seeds the incumbent")
{
    const MiqpProblem p = gated_example();
    const Eigen::VectorXd guess = Eigen::Vector2d(0.0, 1.0);
    const MiqpSolution s = solve_miqp(p, {}, &guess);
    CHECK(s.status == MiqpStatus::Optimal);
    CHECK(s.objective == doctest::Approx(1.0).epsilon(1e-8));
}
