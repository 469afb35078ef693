#include <cmath>

#include "atesmpc/sim.hpp"

namespace atesmpc {

double WellBalance::ratio() const
{
    const double den = initial + injected;
    if (den <= 0.0)
        return 1.0;
    return (extracted + final - interaction_loss) / den;
}

EfficiencyReport efficiency_metrics(const SimulationConfig& cfg, const SimulationTrace& trace)
{
    const int na = trace.agents;
    EfficiencyReport rep;
    rep.agents.resize(na);
    if (trace.steps() == 0)
        return rep;

    for (int i = 0; i < na; ++i) {
        AgentEfficiency& e = rep.agents[i];
        const AquiferParams& aq = cfg.agents[i].params.aquifer;
        e.warm.initial = trace.at(0, i).state.s_h;
        e.cold.initial = trace.at(0, i).state.s_c;
        e.warm.final = trace.at(trace.steps() - 1, i).next.s_h;
        e.cold.final = trace.at(trace.steps() - 1, i).next.s_c;
        double prev_b = 0.0, prev_ch = 0.0;
        for (int t = 0; t < trace.steps(); ++t) {
            const StepRecord& r = trace.at(t, i);
            const AgentInput& u = r.input;
            // Heating mode moves water warm -> cold, cooling mode the reverse.
            e.warm.extracted += aq.alpha_h() * u.u_a_h;
            e.warm.injected += aq.alpha_h() * u.u_a_c;
            e.cold.extracted += aq.alpha_c() * u.u_a_c;
            e.cold.injected += aq.alpha_c() * u.u_a_h;
            e.production += u.h_b + u.c_ch;
            e.imports += u.h_im + u.c_im;
            e.startups += (u.v_b > prev_b) + (u.v_ch > prev_ch);
            prev_b = u.v_b;
            prev_ch = u.v_ch;
            e.slack_integral += u.e;
            e.stage_cost += r.stage_cost;
        }
    }

    // Plume overlap of a warm well with a neighbor's cold well destroys a
    // share of both stores, proportional to the relative overlap.
    for (int t = 0; t < trace.steps(); ++t)
        for (int i = 0; i < na; ++i) {
            const AgentParams& pi = cfg.agents[i].params;
            for (const auto& nb : pi.neighbors) {
                const int j = nb.agent;
                const StepRecord& ri = trace.at(t, i);
                const StepRecord& rj = trace.at(t, j);
                const double rh = thermal_radius(ri.next.v_h, pi.aquifer);
                const double rc = thermal_radius(rj.next.v_c, cfg.agents[j].params.aquifer);
                const double overlap = rh + rc - nb.distance;
                if (overlap <= 0.0)
                    continue;
                const double share = cfg.interaction_loss * overlap / (rh + rc);
                rep.agents[i].warm.interaction_loss += share * ri.next.s_h;
                rep.agents[j].cold.interaction_loss += share * rj.next.s_c;
            }
        }

    double num = 0.0, den = 0.0;
    for (const AgentEfficiency& e : rep.agents)
        for (const WellBalance* w : {&e.warm, &e.cold}) {
            num += w->extracted + w->final - w->interaction_loss;
            den += w->initial + w->injected;
        }
    rep.network_ratio = den > 0.0 ? num / den : 1.0;
    return rep;
}

} // namespace atesmpc
