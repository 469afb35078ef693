#pragma once

#include <cstdint>
#include <iosfwd>
#include <random>

#include <Eigen/Dense>

namespace atesmpc {

enum class ScenarioKind { Private, Common };

/// Violation level eps, confidence parameter beta and the decision
/// dimension used in the sample-count bound.
struct RiskSpec
{
    double eps = 0.1;
    double beta = 1e-5;
    int dim = 1;

    void validate() const;
};

/// One sampled trajectory per row.
struct ScenarioSet
{
    ScenarioKind kind = ScenarioKind::Private;
    int horizon = 0;
    Eigen::MatrixXd samples;
    std::uint64_t seed = 0;

    int size() const { return static_cast<int>(samples.rows()); }
    int length() const { return static_cast<int>(samples.cols()); }
};

struct UncertaintyBox
{
    Eigen::VectorXd lower;
    Eigen::VectorXd upper;
    double eps = 0.0;
    double beta = 0.0;
    int n_used = 0;

    bool contains(const Eigen::Ref<const Eigen::VectorXd>& v) const;
    /// Zero-width box at a single point.
    static UncertaintyBox point(const Eigen::VectorXd& v);
};

long scenario_count(const RiskSpec& spec);

/// Standard normal truncated to [-1, 1], drawn by rejection.
double truncated_normal(std::mt19937_64& rng);

/// Private demand scenarios. `forecast` has the per-step pair layout
/// (heating_0, cooling_0, heating_1, ...); one factor is drawn per step and
/// applied to both entries of the pair, so the heating/cooling split of the
/// forecast is preserved.
ScenarioSet sample_private(const Eigen::VectorXd& forecast, double rel_spread, int n,
                           std::uint64_t seed);

/// Common linearization-mismatch scenarios delta_bar_t (1 + spread zeta_t).
ScenarioSet sample_common(const Eigen::VectorXd& delta_bar, int n, std::uint64_t seed,
                          double rel_spread = 0.1);

UncertaintyBox fit_box(const ScenarioSet& s, const RiskSpec& spec);

void write_csv(std::ostream& os, const ScenarioSet& s);

/// Mixes a base seed with stream/step/agent identifiers (splitmix64 chain).
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream, std::uint64_t step,
                          std::uint64_t agent);

} // namespace atesmpc
