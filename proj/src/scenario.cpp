#include "atesmpc/scenario.hpp"

#include <cmath>
#include <ostream>
#include <stdexcept>
#include <string>

#include "atesmpc/format.hpp"

namespace atesmpc {

void RiskSpec::validate() const
{
    if (!(eps > 0.0 && eps <= 1.0))
        throw std::invalid_argument("risk eps must lie in (0,1]");
    if (!(beta > 0.0 && beta < 1.0))
        throw std::invalid_argument("risk beta must lie in (0,1)");
    if (dim < 1)
        throw std::invalid_argument("risk dim must be at least 1");
}

bool UncertaintyBox::contains(const Eigen::Ref<const Eigen::VectorXd>& v) const
{
    if (v.size() != lower.size())
        return false;
    return (v.array() >= lower.array()).all() && (v.array() <= upper.array()).all();
}

UncertaintyBox UncertaintyBox::point(const Eigen::VectorXd& v)
{
    UncertaintyBox b;
    b.lower = v;
    b.upper = v;
    b.n_used = 1;
    return b;
}

long scenario_count(const RiskSpec& spec)
{
    spec.validate();
    const double n = (2.0 / spec.eps) * (spec.dim + std::log(1.0 / spec.beta));
    // Absorb rounding noise so exact integers such as 2(1+1) stay put.
    return static_cast<long>(std::ceil(n - 1e-9));
}

double truncated_normal(std::mt19937_64& rng)
{
    // Uniform proposal on [-1, 1], accepted with probability exp(-z^2 / 2).
    std::uniform_real_distribution<double> proposal(-1.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (;;) {
        const double z = proposal(rng);
        const double a = unit(rng);
        const double h = 0.5 * z * z;
        if (a <= 1.0 - h || a <= std::exp(-h))
            return z;
    }
}

ScenarioSet sample_private(const Eigen::VectorXd& forecast, double rel_spread, int n,
                           std::uint64_t seed)
{
    if (rel_spread < 0.0)
        throw std::invalid_argument("sample_private: rel_spread must be nonnegative");
    if (n < 1)
        throw std::invalid_argument("sample_private: need at least one sample");
    if (forecast.size() % 2 != 0)
        throw std::invalid_argument("sample_private: forecast must hold (heating, cooling) pairs");
    ScenarioSet s;
    s.kind = ScenarioKind::Private;
    s.horizon = static_cast<int>(forecast.size() / 2);
    s.seed = seed;
    // Filled one sample per column, then transposed.
    Eigen::MatrixXd cols(forecast.size(), n);
    std::mt19937_64 rng(seed);
    for (int k = 0; k < n; ++k) {
        for (int t = 0; t < s.horizon; ++t) {
            const double f = rel_spread > 0.0 ? 1.0 + rel_spread * truncated_normal(rng) : 1.0;
            cols(2 * t, k) = std::max(forecast(2 * t) * f, 0.0);
            cols(2 * t + 1, k) = std::max(forecast(2 * t + 1) * f, 0.0);
        }
    }
    s.samples = cols.transpose();
    return s;
}

ScenarioSet sample_common(const Eigen::VectorXd& delta_bar, int n, std::uint64_t seed,
                          double rel_spread)
{
    if ((delta_bar.array() < 0.0).any())
        throw std::invalid_argument("sample_common: delta_bar must be nonnegative");
    if (n < 1)
        throw std::invalid_argument("sample_common: need at least one sample");
    ScenarioSet s;
    s.kind = ScenarioKind::Common;
    s.horizon = static_cast<int>(delta_bar.size());
    s.seed = seed;
    Eigen::MatrixXd cols(delta_bar.size(), n);
    std::mt19937_64 rng(seed);
    for (int k = 0; k < n; ++k)
        for (int t = 0; t < s.horizon; ++t) {
            const double f = rel_spread > 0.0 ? 1.0 + rel_spread * truncated_normal(rng) : 1.0;
            cols(t, k) = delta_bar(t) * f;
        }
    s.samples = cols.transpose();
    return s;
}

UncertaintyBox fit_box(const ScenarioSet& s, const RiskSpec& spec)
{
    const long need = scenario_count(spec);
    if (s.size() < need)
        throw std::invalid_argument("fit_box: " + std::to_string(s.size()) +
                                    " samples given but " + std::to_string(need) + " required");
    UncertaintyBox b;
    b.lower = s.samples.colwise().minCoeff().transpose();
    b.upper = s.samples.colwise().maxCoeff().transpose();
    b.eps = spec.eps;
    b.beta = spec.beta;
    b.n_used = s.size();
    return b;
}

void write_csv(std::ostream& os, const ScenarioSet& s)
{
    os << "sample";
    for (int j = 0; j < s.length(); ++j)
        os << ",c" << j;
    os << '\n';
    for (int k = 0; k < s.size(); ++k) {
        os << k;
        for (int j = 0; j < s.length(); ++j)
            os << ',' << format_double(s.samples(k, j));
        os << '\n';
    }
}

namespace {

std::uint64_t splitmix64(std::uint64_t x)
{
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

} // namespace

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream, std::uint64_t step,
                          std::uint64_t agent)
{
    std::uint64_t h = splitmix64(base);
    h = splitmix64(h ^ stream);
    h = splitmix64(h ^ step);
    return splitmix64(h ^ agent);
}

} // namespace atesmpc
