#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "atesmpc/assemble.hpp"
#include "atesmpc/miqp.hpp"
#include "atesmpc/model.hpp"

namespace atesmpc {

/// Raised when a step has no usable solution even after the slack fallback.
class SolverLimitError : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

struct AgentSetup
{
    std::string name;
    AgentParams params;
    DemandModel demand;
    AgentState initial;
};

struct SimulationConfig
{
    Mode mode = Mode::DS;
    std::vector<AgentSetup> agents;
    int duration = 24;
    int horizon = 24;
    /// MCS only; empty selects the seasonal tiers.
    std::vector<BlockingTier> tiers;
    bool hold = true;
    std::uint64_t seed = 1;
    double start_hour = 0.0;
    /// Relative spread of the realized demand process.
    double demand_spread = 0.1;
    /// Spread used for private scenarios; negative means demand_spread. DDS
    /// always plans with zero spread.
    double scenario_spread = -1.0;
    double common_spread = 0.1;
    double beta = 1e-5;
    int cost_samples = 10;
    double fallback_penalty = 1e6;
    /// Share of coupled-well energy lost per step and unit of relative
    /// plume overlap; bookkeeping only, it does not enter the dynamics.
    double interaction_loss = 0.01;
    MiqpLimits limits;
    /// duration x 2*agents realized demands replacing the random draws.
    std::optional<Eigen::MatrixXd> realized_override;

    double planning_spread() const;
    BlockingSchedule schedule() const;
    void validate() const;
};

struct StepRecord
{
    int step = 0;
    int agent = 0;
    AgentState state;
    AgentInput input;
    DemandPair forecast;
    DemandPair realized;
    AgentState next;
    double stage_cost = 0.0;
    // Solver statistics of the (possibly shared) step problem.
    MiqpStatus status = MiqpStatus::Optimal;
    double objective = 0.0;
    double gap = 0.0;
    long nodes = 0;
    bool fallback = false;
    // Margins of the propagated state.
    double volume_margin = 0.0;
    double radius_margin = 0.0;  // min over neighbors of d - r_h,i - r_c,j; +inf without neighbors
    double balance_gap = 0.0;    // |S^h + S^c - S_bar|
};

/// Per-agent continuous block inputs of one committed plan, blocks x 9.
struct StepPlan
{
    int step = 0;
    std::vector<Eigen::MatrixXd> inputs;
};

struct SimulationTrace
{
    Mode mode = Mode::DS;
    int agents = 0;
    BlockingSchedule schedule;
    std::vector<StepRecord> records;  // step-major, agent-minor
    std::vector<StepPlan> plans;
    double solve_seconds = 0.0;

    const StepRecord& at(int step, int agent) const
    {
        return records[static_cast<std::size_t>(step * agents + agent)];
    }
    int steps() const { return agents == 0 ? 0 : static_cast<int>(records.size()) / agents; }
};

/// Forecast over the horizon starting at absolute step t, (heating, cooling) per step.
Eigen::VectorXd horizon_forecast(const SimulationConfig& cfg, int agent, int t);

/// Realized demand of agent at step t (override or independent random stream).
DemandPair realized_demand(const SimulationConfig& cfg, int agent, int t);

/// Called after every closed-loop step with that step's records.
using StepObserver = std::function<void(const std::vector<StepRecord>&)>;

SimulationTrace run(const SimulationConfig& cfg, const StepObserver& observer = {});

struct AgentViolation
{
    int agent = 0;
    int steps = 0;
    double eps = 0.0;
    double fraction = 0.0;      // mean over steps
    double worst_step = 0.0;    // largest per-step fraction
    double margin = 0.0;        // 3 sigma binomial margin
    bool within = true;
};

struct ValidationReport
{
    Mode mode = Mode::DS;
    int fresh_samples = 0;
    std::uint64_t seed = 0;
    std::vector<AgentViolation> agents;
};

/// Monte Carlo check of every committed plan against fresh demand draws.
ValidationReport validate_posteriori(const SimulationConfig& cfg, const SimulationTrace& trace,
                                     int fresh_samples, std::uint64_t seed);

struct WellBalance
{
    double initial = 0.0;
    double final = 0.0;
    double injected = 0.0;
    double extracted = 0.0;
    double interaction_loss = 0.0;

    /// (extracted + final - loss) / (initial + injected); 1 when nothing was stored.
    double ratio() const;
};

struct AgentEfficiency
{
    WellBalance warm;
    WellBalance cold;
    double production = 0.0;  // boiler + chiller energy
    double imports = 0.0;
    int startups = 0;
    double slack_integral = 0.0;
    double stage_cost = 0.0;
};

struct EfficiencyReport
{
    std::vector<AgentEfficiency> agents;
    /// Sum of all wells' numerators over the sum of their denominators.
    double network_ratio = 1.0;
};

EfficiencyReport efficiency_metrics(const SimulationConfig& cfg, const SimulationTrace& trace);

} // namespace atesmpc
