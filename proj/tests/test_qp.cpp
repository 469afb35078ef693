#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <limits>
#include <random>

#include "atesmpc/miqp.hpp"
#include "oracles.hpp"

using namespace atesmpc;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

MiqpProblem empty_problem(int n)
{
    MiqpProblem p;
    p.hessian.resize(n, n);
    p.linear = Eigen::VectorXd::Zero(n);
    p.ineq.resize(0, n);
    p.ineq_rhs.resize(0);
    p.eq.resize(0, n);
    p.eq_rhs.resize(0);
    p.integrality.assign(n, 0);
    p.lower = Eigen::VectorXd::Constant(n, -kInf);
    p.upper = Eigen::VectorXd::Constant(n, kInf);
    return p;
}

void check_kkt(const QpResult& r)
{
    CHECK(r.stationarity <= 1e-8);
    CHECK(r.primal_infeasibility <= 1e-8);
    CHECK(r.dual_infeasibility <= 1e-8);
    CHECK(r.complementarity <= 1e-8);
}

} // namespace

TEST_CASE("clipped minimizer")
{
    // (u - 1)^2 = u^2 - 2u + 1
    MiqpProblem p = empty_problem(1);
    p.hessian.insert(0, 0) = 2.0;
    p.linear(0) = -2.0;
    p.constant = 1.0;
    p.ineq.resize(1, 1);
    p.ineq.insert(0, 0) = 1.0;
    p.ineq_rhs = Eigen::VectorXd::Constant(1, 0.3);
    const QpResult r = solve_qp(p);
    REQUIRE(r.status == QpStatus::Optimal);
    CHECK(r.x(0) == doctest::Approx(0.3).epsilon(1e-9));
    CHECK(r.objective == doctest::Approx(0.49).epsilon(1e-9));
    CHECK(r.z_ineq(0) == doctest::Approx(1.4).epsilon(1e-7));
    check_kkt(r);
}

TEST_CASE("same minimizer through a variable bound")
{
    MiqpProblem p = empty_problem(1);
    p.hessian.insert(0, 0) = 2.0;
    p.linear(0) = -2.0;
    p.constant = 1.0;
    p.upper(0) = 0.3;
    const QpResult r = solve_qp(p);
    CHECK(r.x(0) == doctest::Approx(0.3).epsilon(1e-9));
    CHECK(r.objective == doctest::Approx(0.49).epsilon(1e-9));
    check_kkt(r);
}

TEST_CASE("symmetric equality")
{
    MiqpProblem p = empty_problem(3);
    for (int j = 0; j < 3; ++j)
        p.hessian.insert(j, j) = 2.0;
    p.eq.resize(1, 3);
    for (int j = 0; j < 3; ++j)
        p.eq.insert(0, j) = 1.0;
    p.eq_rhs = Eigen::VectorXd::Ones(1);
    const QpResult r = solve_qp(p);
    REQUIRE(r.status == QpStatus::Optimal);
    for (int j = 0; j < 3; ++j)
        CHECK(r.x(j) == doctest::Approx(1.0 / 3.0).epsilon(1e-9));
    CHECK(r.objective == doctest::Approx(1.0 / 3.0).epsilon(1e-9));
    check_kkt(r);
}

TEST_CASE("infeasibility is certified")
{
    MiqpProblem p = empty_problem(1);
    p.hessian.insert(0, 0) = 1.0;
    p.ineq.resize(2, 1);
    p.ineq.insert(0, 0) = 1.0;
    p.ineq.insert(1, 0) = -1.0;
    p.ineq_rhs = Eigen::Vector2d(-1.0, -1.0); // x <= -1 and x >= 1
    CHECK(solve_qp(p).status == QpStatus::Infeasible);

    MiqpProblem q = empty_problem(2);
    q.hessian.insert(0, 0) = 1.0;
    q.hessian.insert(1, 1) = 1.0;
    q.lower = Eigen::Vector2d(0.0, 0.0);
    q.ineq.resize(1, 2);
    q.ineq.insert(0, 0) = 1.0;
    q.ineq.insert(0, 1) = 1.0;
    q.ineq_rhs = Eigen::VectorXd::Constant(1, -0.5);
    CHECK(solve_qp(q).status == QpStatus::Infeasible);
}

TEST_CASE("linear program with a positive semidefinite hessian")
{
    // min -x - y  s.t. x + 2y <= 4, 3x + y <= 6, x, y >= 0 -> (1.6, 1.2)
    MiqpProblem p = empty_problem(2);
    p.linear = Eigen::Vector2d(-1.0, -1.0);
    p.lower = Eigen::Vector2d::Zero();
    p.ineq.resize(2, 2);
    p.ineq.insert(0, 0) = 1.0;
    p.ineq.insert(0, 1) = 2.0;
    p.ineq.insert(1, 0) = 3.0;
    p.ineq.insert(1, 1) = 1.0;
    p.ineq_rhs = Eigen::Vector2d(4.0, 6.0);
    const QpResult r = solve_qp(p);
    REQUIRE(r.status == QpStatus::Optimal);
    CHECK(r.x(0) == doctest::Approx(1.6).epsilon(1e-8));
    CHECK(r.x(1) == doctest::Approx(1.2).epsilon(1e-8));
    check_kkt(r);
}

TEST_CASE("random strictly convex QPs against active-set enumeration")
{
    std::mt19937_64 rng(2024);
    std::uniform_int_distribution<int> dn(1, 8), dm(0, 12);
    for (int trial = 0; trial < 200; ++trial) {
        const int n = dn(rng);
        const int m = dm(rng);
        MiqpProblem p = oracle::random_miqp(rng, n, 0, m);
        std::vector<int> cont;
        double constant = 0.0;
        const oracle::DenseQp dq = oracle::restrict(p, {}, {}, cont, constant);
        const oracle::OracleResult ref = oracle::active_set_qp(dq);
        REQUIRE(ref.feasible);
        const QpResult r = solve_qp(p);
        REQUIRE(r.status == QpStatus::Optimal);
        CHECK(std::abs(r.objective - (ref.objective + constant)) <= 1e-6 * std::max(1.0, std::abs(r.objective)));
        check_kkt(r);
    }
}

TEST_CASE("duplicate, fixed and singleton rows are handled by presolve")
{
    MiqpProblem p = empty_problem(3);
    for (int j = 0; j < 3; ++j)
        p.hessian.insert(j, j) = 1.0;
    p.linear = Eigen::Vector3d(-1.0, -2.0, -3.0);
    p.lower = Eigen::Vector3d(0.0, 0.5, -kInf);
    p.upper = Eigen::Vector3d(1.0, 0.5, kInf);
    p.ineq.resize(3, 3);
    p.ineq.insert(0, 2) = 2.0;   // x2 <= 1
    p.ineq.insert(1, 2) = 2.0;   // duplicate
    p.ineq.insert(2, 0) = 1.0;
    p.ineq.insert(2, 2) = 1.0;   // x0 + x2 <= 1.2
    p.ineq_rhs = Eigen::Vector3d(2.0, 2.0, 1.2);
    const QpResult r = solve_qp(p);
    REQUIRE(r.status == QpStatus::Optimal);
    CHECK(r.x(1) == 0.5);
    CHECK(r.x(2) == doctest::Approx(1.0).epsilon(1e-8));
    CHECK(r.x(0) == doctest::Approx(0.2).epsilon(1e-8));
    check_kkt(r);
}
