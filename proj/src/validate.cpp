#include <cmath>
#include <stdexcept>

#include "atesmpc/scenario.hpp"
#include "atesmpc/sim.hpp"

namespace atesmpc {

namespace {

constexpr std::uint64_t kStreamValidation = 5;
constexpr double kViolationTol = 1e-6;

} // namespace

ValidationReport validate_posteriori(const SimulationConfig& cfg, const SimulationTrace& trace,
                                     int fresh_samples, std::uint64_t seed)
{
    if (fresh_samples < 1)
        throw std::invalid_argument("fresh_samples must be at least 1");
    if (seed == cfg.seed)
        throw std::invalid_argument("validation seed must differ from the run seed");
    const int na = static_cast<int>(cfg.agents.size());
    if (trace.agents != na || static_cast<int>(trace.plans.size()) != trace.steps())
        throw std::invalid_argument("trace does not match the configuration");

    const BlockingSchedule& sched = trace.schedule;
    const int n = sched.horizon;
    if (n != cfg.horizon)
        throw std::invalid_argument("trace horizon does not match the configuration");

    ValidationReport rep;
    rep.mode = cfg.mode;
    rep.fresh_samples = fresh_samples;
    rep.seed = seed;
    for (int i = 0; i < na; ++i) {
        const AgentParams& p = cfg.agents[i].params;
        const AgentMatrices m = agent_matrices(p);
        AgentViolation v;
        v.agent = i;
        v.eps = p.eps_private;
        v.margin = 3.0 * std::sqrt(v.eps * (1.0 - v.eps) / fresh_samples);
        double sum = 0.0;
        for (int t = 0; t < trace.steps(); ++t) {
            const Eigen::MatrixXd& blocks = trace.plans[t].inputs[i];
            if (blocks.rows() != sched.blocks() || blocks.cols() != kInputDim)
                throw std::invalid_argument("plan shape does not match the schedule");
            // Inputs per horizon step; zero where the schedule forces it.
            Eigen::MatrixXd u = Eigen::MatrixXd::Zero(n, kInputDim);
            for (int k = 0; k < n; ++k) {
                const int b = sched.block_of(k);
                if (b >= 0)
                    u.row(k) = blocks.row(b);
            }
            // Well states do not depend on demand.
            bool wells_ok = true;
            Eigen::Matrix<double, kStateDim, 1> x = trace.at(t, i).state.vector();
            for (int k = 0; k < n && wells_ok; ++k) {
                x = m.a * x + m.b * u.row(k).transpose();
                for (int s = 2; s < kStateDim; ++s)
                    wells_ok = wells_ok && x(s) >= -kViolationTol;
            }
            double frac = 1.0;
            if (wells_ok) {
                Eigen::VectorXd supply_h(n), supply_c(n);
                for (int k = 0; k < n; ++k) {
                    supply_h(k) = m.b.row(0).dot(u.row(k));
                    supply_c(k) = m.b.row(1).dot(u.row(k));
                }
                const Eigen::VectorXd f = horizon_forecast(cfg, i, t);
                const ScenarioSet draws = sample_private(f, cfg.demand_spread, fresh_samples,
                                                         derive_seed(seed, kStreamValidation, t, i));
                const AgentState& x0 = trace.at(t, i).state;
                int bad = 0;
                for (int s = 0; s < fresh_samples; ++s) {
                    double xh = x0.x_h, xc = x0.x_c;
                    bool ok = true;
                    for (int k = 0; k < n && ok; ++k) {
                        xh = m.a(0, 0) * xh + supply_h(k) - draws.samples(s, 2 * k);
                        xc = m.a(1, 1) * xc + supply_c(k) - draws.samples(s, 2 * k + 1);
                        ok = xh >= -kViolationTol && xc >= -kViolationTol;
                    }
                    bad += ok ? 0 : 1;
                }
                frac = static_cast<double>(bad) / fresh_samples;
            }
            sum += frac;
            v.worst_step = std::max(v.worst_step, frac);
            ++v.steps;
        }
        v.fraction = v.steps > 0 ? sum / v.steps : 0.0;
        v.within = v.fraction <= v.eps + v.margin;
        rep.agents.push_back(v);
    }
    return rep;
}

} // namespace atesmpc
