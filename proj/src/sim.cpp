// Receding-horizon closed loop.

#include "atesmpc/sim.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <sstream>

#include "atesmpc/scenario.hpp"

namespace atesmpc {

namespace {

enum Stream : std::uint64_t {
    kStreamPrivate = 1,
    kStreamCost = 2,
    kStreamCommon = 3,
    kStreamRealized = 4,
};

void require(bool ok, const std::string& msg)
{
    if (!ok)
        throw std::invalid_argument(msg);
}

double clip(double v, double lo, double hi)
{
    return std::min(std::max(v, lo), hi);
}

/// Snaps binaries and makes the continuous part consistent with them.
AgentInput clean_input(AgentInput u, const AgentParams& p, const std::array<double, 2>& prev_on)
{
    const auto& b = p.bounds;
    u.v_b = u.v_b >= 0.5 ? 1.0 : 0.0;
    u.v_ch = u.v_ch >= 0.5 ? 1.0 : 0.0;
    u.m_a = u.m_a >= 0.5 ? 1.0 : 0.0;
    u.h_b = u.v_b == 1.0 ? clip(u.h_b, b.h_b_min, b.h_b_max) : 0.0;
    u.c_ch = u.v_ch == 1.0 ? clip(u.c_ch, b.c_ch_min, b.c_ch_max) : 0.0;
    u.h_im = clip(u.h_im, b.h_im_min, b.h_im_max);
    u.c_im = clip(u.c_im, b.c_im_min, b.c_im_max);
    if (u.m_a == 1.0) {
        u.u_a_h = clip(u.u_a_h, b.u_a_min, b.u_a_max);
        u.u_a_c = 0.0;
    } else {
        u.u_a_h = 0.0;
        u.u_a_c = clip(u.u_a_c, b.u_a_min, b.u_a_max);
    }
    u.c_su_b = std::max({u.c_su_b, p.lambda_su[0] * (u.v_b - prev_on[0]), 0.0});
    u.c_su_ch = std::max({u.c_su_ch, p.lambda_su[1] * (u.v_ch - prev_on[1]), 0.0});
    u.e = std::max(u.e, 0.0);
    return u;
}

AgentInput block_input(const Eigen::VectorXd& x, const ProblemLayout& L, int agent, int block)
{
    const auto v = [&](int k) { return x(L.index(agent, block, k)); };
    AgentInput u;
    u.h_b = v(kVarHb);
    u.h_im = v(kVarHim);
    u.c_ch = v(kVarCch);
    u.c_im = v(kVarCim);
    u.u_a_h = v(kVarUh);
    u.u_a_c = v(kVarUc);
    u.c_su_b = v(kVarCsuB);
    u.c_su_ch = v(kVarCsuCh);
    u.e = v(kVarE);
    u.v_b = v(kVarVb);
    u.v_ch = v(kVarVch);
    u.m_a = v(kVarMa);
    return u;
}

double stage_cost(const AgentState& next, const AgentInput& u, const AgentParams& p)
{
    double c = p.weight_qh * next.x_h * next.x_h + p.weight_qc * next.x_c * next.x_c;
    const auto uc = u.continuous();
    for (int k = 0; k < kInputDim; ++k)
        c += p.cost_r[k] * uc(k) * uc(k);
    return c;
}

double radius_margin(const SimulationConfig& cfg, const std::vector<AgentState>& states, int i)
{
    double m = std::numeric_limits<double>::infinity();
    const auto& pi = cfg.agents[i].params;
    for (const auto& nb : pi.neighbors) {
        const double rh = thermal_radius(states[i].v_h, pi.aquifer);
        const double rc = thermal_radius(states[nb.agent].v_c, cfg.agents[nb.agent].params.aquifer);
        m = std::min(m, nb.distance - rh - rc);
    }
    return m;
}

std::vector<CommonPairData> common_pairs(const SimulationConfig& cfg,
                                         const std::vector<AgentState>& states, int t)
{
    std::vector<CommonPairData> pairs;
    const int n = cfg.horizon;
    for (int i = 0; i < static_cast<int>(cfg.agents.size()); ++i) {
        const auto& aq = cfg.agents[i].params.aquifer;
        for (const auto& nb : cfg.agents[i].params.neighbors) {
            const int j = nb.agent;
            CommonPairData c;
            c.i = i;
            c.j = j;
            c.v_limit = coupling_volume_limit(nb.distance, aq);
            // Anchor radii from the current volumes, both through agent i's aquifer.
            const double delta = coupling_linearization_anchor(thermal_radius(states[i].v_h, aq),
                                                               thermal_radius(states[j].v_c, aq), aq);
            const RiskSpec spec{nb.eps_common, cfg.beta, 2 * n};
            const ScenarioSet s = sample_common(Eigen::VectorXd::Constant(n, delta),
                                                static_cast<int>(scenario_count(spec)),
                                                derive_seed(cfg.seed, kStreamCommon, t, i * 1024 + j),
                                                cfg.common_spread);
            c.box = fit_box(s, spec);
            pairs.push_back(std::move(c));
        }
    }
    return pairs;
}

/// Binaries of the previous plan moved one block ahead; the last block repeats.
Eigen::VectorXd shifted_guess(const Eigen::VectorXd& prev, const ProblemLayout& L)
{
    Eigen::VectorXd g = prev;
    for (int a = 0; a < L.agents; ++a)
        for (int b = 0; b < L.blocks; ++b) {
            const int src = std::min(b + 1, L.blocks - 1);
            for (int k = kVarVb; k <= kVarMa; ++k)
                g(L.index(a, b, k)) = prev(L.index(a, src, k));
        }
    return g;
}

} // namespace

double SimulationConfig::planning_spread() const
{
    if (mode == Mode::DDS)
        return 0.0;
    return scenario_spread < 0.0 ? demand_spread : scenario_spread;
}

BlockingSchedule SimulationConfig::schedule() const
{
    if (mode != Mode::MCS)
        return BlockingSchedule::every_step(horizon);
    return BlockingSchedule::from_tiers(horizon, tiers.empty() ? BlockingSchedule::seasonal_tiers() : tiers,
                                        hold);
}

void SimulationConfig::validate() const
{
    require(!agents.empty(), "agents must not be empty");
    require(duration >= 1, "duration must be at least 1");
    require(horizon >= 1, "horizon must be at least 1");
    require(demand_spread >= 0.0 && demand_spread < 1.0, "demand_spread must lie in [0,1)");
    require(scenario_spread < 1.0, "scenario_spread must be below 1");
    require(common_spread >= 0.0 && common_spread < 1.0, "common_spread must lie in [0,1)");
    require(beta > 0.0 && beta < 1.0, "beta must lie in (0,1)");
    require(cost_samples >= 1, "cost_samples must be at least 1");
    require(fallback_penalty > 0.0, "fallback_penalty must be positive");
    require(interaction_loss >= 0.0 && interaction_loss <= 1.0, "interaction_loss must lie in [0,1]");
    const int na = static_cast<int>(agents.size());
    for (int i = 0; i < na; ++i) {
        const auto& a = agents[i];
        const std::string where = "agents[" + std::to_string(i) + "]";
        try {
            a.params.validate();
            a.demand.validate();
        } catch (const std::invalid_argument& e) {
            throw std::invalid_argument(where + "." + e.what());
        }
        require(a.initial.v_h >= 0.0 && a.initial.v_c >= 0.0, where + ".initial volumes must be nonnegative");
        for (const auto& nb : a.params.neighbors) {
            require(nb.agent >= 0 && nb.agent < na && nb.agent != i, where + ".neighbors: invalid agent index");
            require(nb.distance > 0.0, where + ".neighbors: distance must be positive");
        }
    }
    if (is_coupled(mode)) {
        bool any = false;
        for (const auto& a : agents)
            any = any || !a.params.neighbors.empty();
        require(na == 1 || any, "coupled modes need pairwise distances");
    }
    if (realized_override) {
        require(realized_override->rows() >= duration && realized_override->cols() == 2 * na,
                "realized_override must be duration x 2*agents");
        require(realized_override->minCoeff() >= 0.0, "realized_override must be nonnegative");
    }
    schedule().validate();
}

Eigen::VectorXd horizon_forecast(const SimulationConfig& cfg, int agent, int t)
{
    Eigen::VectorXd f(2 * cfg.horizon);
    const auto& dm = cfg.agents[agent].demand;
    for (int k = 0; k < cfg.horizon; ++k) {
        const DemandPair d = demand_profile(dm, cfg.start_hour + t + k, 0.0);
        f(2 * k) = d.heating;
        f(2 * k + 1) = d.cooling;
    }
    return f;
}

DemandPair realized_demand(const SimulationConfig& cfg, int agent, int t)
{
    if (cfg.realized_override)
        return {(*cfg.realized_override)(t, 2 * agent), (*cfg.realized_override)(t, 2 * agent + 1)};
    std::mt19937_64 rng(derive_seed(cfg.seed, kStreamRealized, t, agent));
    const double zeta = truncated_normal(rng);
    return demand_profile(cfg.agents[agent].demand, cfg.start_hour + t, cfg.demand_spread * zeta);
}

SimulationTrace run(const SimulationConfig& cfg, const StepObserver& observer)
{
    cfg.validate();
    const int na = static_cast<int>(cfg.agents.size());
    const int n = cfg.horizon;
    const double spread = cfg.planning_spread();

    SimulationTrace trace;
    trace.mode = cfg.mode;
    trace.agents = na;
    trace.schedule = cfg.schedule();

    std::vector<AgentState> states(na);
    std::vector<std::array<double, 2>> on(na, {0.0, 0.0});
    for (int i = 0; i < na; ++i)
        states[i] = cfg.agents[i].initial;

    const auto clock0 = std::chrono::steady_clock::now();

    // Decoupled modes solve one problem per agent, coupled modes one joint problem.
    std::vector<std::vector<int>> groups;
    if (is_coupled(cfg.mode)) {
        groups.emplace_back();
        for (int i = 0; i < na; ++i)
            groups[0].push_back(i);
    } else {
        for (int i = 0; i < na; ++i)
            groups.push_back({i});
    }
    std::vector<Eigen::VectorXd> previous_by_group(groups.size());

    for (int t = 0; t < cfg.duration; ++t) {
        std::vector<AgentProblemData> data(na);
        for (int i = 0; i < na; ++i) {
            const auto& ag = cfg.agents[i];
            AgentProblemData& d = data[i];
            d.params = ag.params;
            d.state = states[i];
            d.forecast = horizon_forecast(cfg, i, t);
            d.previous_on = on[i];
            const RiskSpec spec{ag.params.eps_private, cfg.beta, 4 * n};
            const ScenarioSet set = sample_private(d.forecast, spread, static_cast<int>(scenario_count(spec)),
                                                   derive_seed(cfg.seed, kStreamPrivate, t, i));
            d.private_box = fit_box(set, spec);
            d.cost_samples = sample_private(d.forecast, spread, cfg.cost_samples,
                                            derive_seed(cfg.seed, kStreamCost, t, i))
                                 .samples;
        }

        std::vector<AgentInput> applied(na);
        StepPlan plan;
        plan.step = t;
        plan.inputs.resize(na);
        std::vector<MiqpSolution> sols(na);
        std::vector<char> flagged(na, 0);

        for (std::size_t g = 0; g < groups.size(); ++g) {
            std::vector<AgentProblemData> sub;
            for (int i : groups[g])
                sub.push_back(data[i]);
            std::vector<CommonPairData> pairs;
            if (is_coupled(cfg.mode))
                pairs = common_pairs(cfg, states, t);

            BuildOptions opt;
            opt.mode = cfg.mode;
            opt.horizon = n;
            if (cfg.mode == Mode::MCS)
                opt.schedule = trace.schedule;
            BuiltProblem bp = build_problem(opt, sub, pairs);
            Eigen::VectorXd guess;
            const Eigen::VectorXd* gp = nullptr;
            if (previous_by_group[g].size() == bp.problem.num_vars()) {
                guess = shifted_guess(previous_by_group[g], bp.layout);
                gp = &guess;
            }
            MiqpSolution sol = solve_miqp(bp.problem, cfg.limits, gp);
            bool fb = false;
            if (!sol.has_incumbent) {
                opt.fallback_penalty = cfg.fallback_penalty;
                bp = build_problem(opt, sub, pairs);
                sol = solve_miqp(bp.problem, cfg.limits);
                fb = true;
            }
            if (!sol.has_incumbent) {
                std::ostringstream os;
                os << "step " << t << ": no solution after the slack fallback (" << status_name(sol.status) << ")";
                throw SolverLimitError(os.str());
            }
            previous_by_group[g] = fb ? Eigen::VectorXd() : sol.values;
            for (std::size_t a = 0; a < groups[g].size(); ++a) {
                const int i = groups[g][a];
                applied[i] = clean_input(block_input(sol.values, bp.layout, static_cast<int>(a), 0),
                                         cfg.agents[i].params, on[i]);
                Eigen::MatrixXd blocks(bp.layout.blocks, kInputDim);
                for (int b = 0; b < bp.layout.blocks; ++b)
                    blocks.row(b) = block_input(sol.values, bp.layout, static_cast<int>(a), b).continuous().transpose();
                blocks.row(0) = applied[i].continuous().transpose();
                plan.inputs[i] = std::move(blocks);
                sols[i] = sol;
                flagged[i] = fb;
            }
        }

        std::vector<AgentState> next(na);
        std::vector<DemandPair> realized(na);
        for (int i = 0; i < na; ++i) {
            realized[i] = realized_demand(cfg, i, t);
            next[i] = step_agent(states[i], applied[i], realized[i], cfg.agents[i].params);
            if (has_negative_volume(next[i])) {
                std::ostringstream os;
                os << "step " << t << ", agent " << i << ": negative well volume (V^h=" << next[i].v_h
                   << ", V^c=" << next[i].v_c << ")";
                throw ModelError(os.str());
            }
        }
        for (int i = 0; i < na; ++i) {
            StepRecord r;
            r.step = t;
            r.agent = i;
            r.state = states[i];
            r.input = applied[i];
            r.forecast = {data[i].forecast(0), data[i].forecast(1)};
            r.realized = realized[i];
            r.next = next[i];
            r.stage_cost = stage_cost(next[i], applied[i], cfg.agents[i].params);
            r.status = sols[i].status;
            r.objective = sols[i].objective;
            r.gap = sols[i].gap;
            r.nodes = sols[i].nodes;
            r.fallback = flagged[i];
            r.volume_margin = std::min(next[i].v_h, next[i].v_c);
            r.radius_margin = radius_margin(cfg, next, i);
            r.balance_gap = std::abs(next[i].s_h + next[i].s_c - cfg.agents[i].params.aquifer.s_bar);
            trace.records.push_back(r);
            on[i] = {applied[i].v_b, applied[i].v_ch};
        }
        trace.plans.push_back(std::move(plan));
        states = std::move(next);
        if (observer)
            observer(std::vector<StepRecord>(trace.records.end() - na, trace.records.end()));
    }
    trace.solve_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - clock0).count();
    return trace;
}

} // namespace atesmpc
