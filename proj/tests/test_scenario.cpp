#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "atesmpc/scenario.hpp"

using namespace atesmpc;

TEST_CASE("scenario count")
{
    CHECK(scenario_count({0.1, 1e-5, 96}) == 2151);
    CHECK(scenario_count({1.0, std::exp(-1.0), 1}) == 4);
    CHECK(scenario_count({0.1, 1e-5, 48}) == 1191);
    // Linear in the dimension before the ceiling.
    for (int xi = 1; xi < 200; ++xi) {
        const long a = scenario_count({0.1, 1e-5, xi});
        const long b = scenario_count({0.1, 1e-5, 2 * xi});
        CHECK(std::abs((b - a) - 20L * xi) <= 1);
    }
    CHECK_THROWS(scenario_count({0.0, 1e-5, 3}));
    CHECK_THROWS(scenario_count({0.1, 1.0, 3}));
    CHECK_THROWS(scenario_count({0.1, 0.1, 0}));
}

TEST_CASE("private samples")
{
    Eigen::VectorXd f(6);
    f << 100, 0, 0, 50, 100, 0;
    ScenarioSet s0 = sample_private(f, 0.0, 5, 1);
    for (int k = 0; k < 5; ++k)
        CHECK(s0.samples.row(k).transpose() == f);

    ScenarioSet s = sample_private(f, 0.1, 4000, 2);
    CHECK(s.kind == ScenarioKind::Private);
    CHECK(s.horizon == 3);
    CHECK(s.length() == 6);
    CHECK(s.samples.col(0).minCoeff() >= 90.0);
    CHECK(s.samples.col(0).maxCoeff() <= 110.0);
    CHECK(s.samples.col(1).cwiseAbs().maxCoeff() == 0.0);
    CHECK(s.samples.col(5).cwiseAbs().maxCoeff() == 0.0);
    CHECK(s.samples.col(3).minCoeff() >= 45.0);

    Eigen::VectorXd g = Eigen::VectorXd::Constant(2, 100.0);
    g(1) = 0.0;
    ScenarioSet big = sample_private(g, 0.1, 10000, 9);
    CHECK(std::abs(big.samples.col(0).mean() - 100.0) < 1.0);
    CHECK_THROWS(sample_private(g, -0.1, 10, 1));
}

TEST_CASE("common samples")
{
    Eigen::VectorXd zero = Eigen::VectorXd::Zero(4);
    CHECK(sample_common(zero, 20, 3).samples.cwiseAbs().maxCoeff() == 0.0);
    Eigen::VectorXd d = Eigen::VectorXd::Constant(4, 1000.0);
    ScenarioSet s = sample_common(d, 5000, 4);
    CHECK(s.kind == ScenarioKind::Common);
    CHECK(s.samples.minCoeff() >= 900.0);
    CHECK(s.samples.maxCoeff() <= 1100.0);
    CHECK((s.samples.array() >= 0.0).all());
    CHECK_THROWS(sample_common(-d, 5, 1));
}

TEST_CASE("truncated normal stays in range and is symmetric")
{
    std::mt19937_64 rng(1);
    const int n = 200000;
    double sum = 0.0, sq = 0.0;
    int inner = 0;
    for (int k = 0; k < n; ++k) {
        const double z = truncated_normal(rng);
        REQUIRE(z >= -1.0);
        REQUIRE(z <= 1.0);
        sum += z;
        sq += z * z;
        inner += std::abs(z) <= 0.5;
    }
    CHECK(std::abs(sum / n) < 0.01);
    // Closed forms through the standard normal pdf and cdf.
    const auto pdf = [](double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI); };
    const auto cdf = [](double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); };
    const double mass = cdf(1.0) - cdf(-1.0);
    const double var = 1.0 - 2.0 * pdf(1.0) / mass;
    CHECK(std::abs(sq / n - var) < 0.005);
    const double p_inner = (cdf(0.5) - cdf(-0.5)) / mass;
    CHECK(std::abs(double(inner) / n - p_inner) < 4.0 * std::sqrt(p_inner * (1 - p_inner) / n));
}

TEST_CASE("fit_box examples")
{
    ScenarioSet s;
    s.samples.resize(3, 2);
    s.samples << 1, 5, 2, 3, 0, 4;
    const UncertaintyBox b = fit_box(s, {1.0, 0.9, 1});
    CHECK(b.lower == Eigen::Vector2d(0, 3));
    CHECK(b.upper == Eigen::Vector2d(2, 5));
    CHECK(b.n_used == 3);

    // The sample bound never drops below 3, so a lone draw is rejected and
    // repeated copies of it give the degenerate box.
    ScenarioSet one;
    one.samples.resize(1, 3);
    one.samples << 4, 5, 6;
    CHECK_THROWS_AS(fit_box(one, {1.0, 0.9, 1}), std::invalid_argument);
    one.samples = one.samples.replicate(3, 1).eval();
    const UncertaintyBox p = fit_box(one, {1.0, 0.9, 1});
    CHECK(p.lower == p.upper);
    CHECK(p.lower == Eigen::Vector3d(4, 5, 6));
    CHECK(UncertaintyBox::point(Eigen::Vector3d(4, 5, 6)).upper == p.upper);
}

TEST_CASE("fit_box rejects too few samples")
{
    ScenarioSet s;
    s.samples = Eigen::MatrixXd::Zero(10, 2);
    try {
        fit_box(s, {0.1, 1e-5, 96});
        FAIL("expected an exception");
    } catch (const std::invalid_argument& e) {
        CHECK(std::string(e.what()).find("2151") != std::string::npos);
    }
}

TEST_CASE("fit_box is the smallest containing box")
{
    Eigen::VectorXd f = Eigen::VectorXd::Constant(8, 50.0);
    ScenarioSet s = sample_private(f, 0.1, 300, 17);
    const UncertaintyBox b = fit_box(s, {0.5, 0.5, 1});
    for (int k = 0; k < s.size(); ++k)
        CHECK(b.contains(s.samples.row(k).transpose()));
    // Shrinking any face by a hair drops at least one sample.
    for (int j = 0; j < s.length(); ++j)
        for (int face = 0; face < 2; ++face) {
            UncertaintyBox c = b;
            if (face == 0)
                c.lower(j) = std::nextafter(c.lower(j), HUGE_VAL);
            else
                c.upper(j) = std::nextafter(c.upper(j), -HUGE_VAL);
            bool excluded = false;
            for (int k = 0; k < s.size() && !excluded; ++k)
                excluded = !c.contains(s.samples.row(k).transpose());
            CHECK(excluded);
        }
}

TEST_CASE("determinism and order invariance")
{
    Eigen::VectorXd f = Eigen::VectorXd::Constant(10, 80.0);
    const ScenarioSet a = sample_private(f, 0.1, 200, 42);
    const ScenarioSet b = sample_private(f, 0.1, 200, 42);
    CHECK(a.samples == b.samples);
    const ScenarioSet c = sample_private(f, 0.1, 200, 43);
    CHECK(a.samples != c.samples);

    ScenarioSet perm = a;
    std::vector<int> idx(a.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::reverse(idx.begin(), idx.end());
    std::rotate(idx.begin(), idx.begin() + 37, idx.end());
    for (int k = 0; k < a.size(); ++k)
        perm.samples.row(k) = a.samples.row(idx[k]);
    const UncertaintyBox ba = fit_box(a, {0.5, 0.5, 1});
    const UncertaintyBox bp = fit_box(perm, {0.5, 0.5, 1});
    CHECK(ba.lower == bp.lower);
    CHECK(ba.upper == bp.upper);
}

TEST_CASE("post-hoc coverage of a fitted box")
{
    const int horizon = 24;
    Eigen::VectorXd f(2 * horizon);
    for (int t = 0; t < horizon; ++t) {
        f(2 * t) = 300.0 + 10.0 * t;
        f(2 * t + 1) = 0.0;
    }
    const RiskSpec spec{0.1, 1e-5, 4 * horizon};
    const long n = scenario_count(spec);
    const UncertaintyBox box = fit_box(sample_private(f, 0.1, static_cast<int>(n), 100), spec);
    const int fresh = 10000;
    const ScenarioSet test = sample_private(f, 0.1, fresh, 101);
    int inside = 0;
    for (int k = 0; k < fresh; ++k)
        inside += box.contains(test.samples.row(k).transpose());
    const double margin = 3.0 * std::sqrt(0.1 * 0.9 / fresh);
    CHECK(double(inside) / fresh >= 0.9 - margin);
}

TEST_CASE("seed derivation separates streams")
{
    CHECK(derive_seed(1, 2, 3, 4) == derive_seed(1, 2, 3, 4));
    CHECK(derive_seed(1, 2, 3, 4) != derive_seed(1, 2, 3, 5));
    CHECK(derive_seed(1, 2, 3, 4) != derive_seed(1, 3, 3, 4));
    CHECK(derive_seed(1, 2, 3, 4) != derive_seed(2, 2, 3, 4));
}

TEST_CASE("CSV export")
{
    ScenarioSet s;
    s.samples.resize(2, 2);
    s.samples << 1.5, 2, 3, 0.1;
    std::ostringstream os;
    write_csv(os, s);
    CHECK(os.str() == "sample,c0,c1\n0,1.5,2\n1,3,0.1\n");
}
