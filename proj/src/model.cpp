#include "atesmpc/model.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

namespace atesmpc {

namespace {

void require(bool ok, const char* what)
{
    if (!ok)
        throw std::invalid_argument(what);
}

} // namespace

double AquiferParams::geometry_factor() const
{
    return c_aq() * std::numbers::pi * ell / c_w;
}

void AquiferParams::validate() const
{
    require(eta_a > 0.0 && eta_a < 1.0, "aquifer.eta_a must lie in (0,1)");
    require(n_p >= 0.0 && n_p <= 1.0, "aquifer.n_p must lie in [0,1]");
    require(ell > 0.0, "aquifer.ell must be positive");
    require(c_w > 0.0 && c_sand > 0.0, "aquifer heat capacities must be positive");
    require(t_h > t_amb && t_amb > t_c, "aquifer temperatures must satisfy T_h > T_amb > T_c");
}

void AgentParams::validate() const
{
    aquifer.validate();
    require(eta_s_h > 0.0 && eta_s_h < 1.0 + 1e-12, "eta_s_h must lie in (0,1]");
    require(eta_s_c > 0.0 && eta_s_c < 1.0 + 1e-12, "eta_s_c must lie in (0,1]");
    require(cop > 1.0, "cop must exceed 1");
    const auto& b = bounds;
    require(b.h_b_min <= b.h_b_max && b.c_ch_min <= b.c_ch_max, "production bounds need min <= max");
    require(b.h_im_min <= b.h_im_max && b.c_im_min <= b.c_im_max, "import bounds need min <= max");
    require(b.u_a_min >= 0.0 && b.u_a_min <= b.u_a_max, "pump bounds need 0 <= min <= max");
    require(b.h_b_min >= 0.0 && b.c_ch_min >= 0.0, "production minimum must be nonnegative");
    require(lambda_su[0] >= 0.0 && lambda_su[1] >= 0.0, "startup costs must be nonnegative");
    for (double r : cost_r)
        require(r >= 0.0, "cost_r entries must be nonnegative");
    require(weight_qh >= 0.0 && weight_qc >= 0.0, "imbalance weights must be nonnegative");
    require(eps_private > 0.0 && eps_private < 1.0, "eps_private must lie in (0,1)");
    for (const auto& n : neighbors) {
        require(n.eps_common > 0.0 && n.eps_common < 1.0, "eps_common must lie in (0,1)");
        require(n.distance > 0.0, "neighbor distance must be positive");
    }
}

Eigen::Matrix<double, kStateDim, 1> AgentState::vector() const
{
    Eigen::Matrix<double, kStateDim, 1> x;
    x << x_h, x_c, v_h, v_c, s_h, s_c;
    return x;
}

AgentState AgentState::from_vector(const Eigen::Ref<const Eigen::VectorXd>& x)
{
    if (x.size() != kStateDim)
        throw std::invalid_argument("state vector must have 6 entries");
    return {x(0), x(1), x(2), x(3), x(4), x(5)};
}

Eigen::Matrix<double, kInputDim, 1> AgentInput::continuous() const
{
    Eigen::Matrix<double, kInputDim, 1> u;
    u << h_b, h_im, c_ch, c_im, u_a_h, u_a_c, c_su_b, c_su_ch, e;
    return u;
}

AgentInput AgentInput::from_continuous(const Eigen::Ref<const Eigen::VectorXd>& u)
{
    if (u.size() != kInputDim)
        throw std::invalid_argument("input vector must have 9 entries");
    AgentInput in;
    in.h_b = u(kBoiler);
    in.h_im = u(kHeatImport);
    in.c_ch = u(kChiller);
    in.c_im = u(kColdImport);
    in.u_a_h = u(kPumpHeating);
    in.u_a_c = u(kPumpCooling);
    in.c_su_b = u(kStartupBoiler);
    in.c_su_ch = u(kStartupChiller);
    in.e = u(kBalanceSlack);
    return in;
}

double DemandModel::outdoor_temperature(double t) const
{
    constexpr double two_pi = 2.0 * std::numbers::pi;
    return t_mean + seasonal_amp * std::cos(two_pi * (t - seasonal_peak) / 8760.0) +
           daily_amp * std::cos(two_pi * (t - daily_peak) / 24.0);
}

void DemandModel::validate() const
{
    require(gain > 0.0, "demand.gain must be positive");
}

AgentMatrices agent_matrices(const AgentParams& p)
{
    const auto& aq = p.aquifer;
    const double ah = aq.alpha_h();
    const double ac = aq.alpha_c();
    const double alpha = aq.alpha();

    AgentMatrices m;
    m.a.setZero();
    m.a(0, 0) = p.eta_s_h;
    m.a(1, 1) = p.eta_s_c;
    m.a(2, 2) = 1.0;
    m.a(3, 3) = 1.0;
    m.a(4, 4) = aq.eta_a;
    m.a(5, 5) = aq.eta_a;

    m.b.setZero();
    m.b(0, kBoiler) = p.eta_s_h;
    m.b(0, kHeatImport) = p.eta_s_h;
    m.b(0, kPumpHeating) = p.eta_s_h * p.alpha_hp() * alpha;
    m.b(1, kChiller) = p.eta_s_c;
    m.b(1, kColdImport) = p.eta_s_c;
    m.b(1, kPumpCooling) = p.eta_s_c * alpha;
    m.b(2, kPumpHeating) = -1.0;
    m.b(2, kPumpCooling) = 1.0;
    m.b(3, kPumpHeating) = 1.0;
    m.b(3, kPumpCooling) = -1.0;
    m.b(4, kPumpHeating) = -ah;
    m.b(4, kPumpCooling) = ah;
    m.b(5, kPumpHeating) = ac;
    m.b(5, kPumpCooling) = -ac;

    m.c.setZero();
    m.c(0, 0) = -1.0;
    m.c(1, 1) = -1.0;
    return m;
}

AgentState step_ates(const AgentState& state, const AgentInput& input, const AgentParams& p)
{
    if (input.u_a_h != 0.0 && input.u_a_c != 0.0)
        throw std::invalid_argument("both ATES pump flows are nonzero; exactly one mode may be active");
    const auto& aq = p.aquifer;
    const double net = input.u_a_h - input.u_a_c;
    AgentState next = state;
    next.v_h = state.v_h - net;
    next.v_c = state.v_c + net;
    next.s_h = aq.eta_a * state.s_h - aq.alpha_h() * net;
    next.s_c = aq.eta_a * state.s_c + aq.alpha_c() * net;
    return next;
}

AgentState step_agent(const AgentState& state, const AgentInput& input, const DemandPair& w,
                      const AgentParams& p)
{
    if (w.heating < 0.0 || w.cooling < 0.0)
        throw std::invalid_argument("demand must be nonnegative");
    if (w.heating != 0.0 && w.cooling != 0.0)
        throw std::invalid_argument("heating and cooling demand cannot both be nonzero");
    AgentState next = step_ates(state, input, p);
    const double alpha = p.aquifer.alpha();
    next.x_h = p.eta_s_h * state.x_h +
               p.eta_s_h * (input.h_b + input.h_im + p.alpha_hp() * alpha * input.u_a_h) - w.heating;
    next.x_c = p.eta_s_c * state.x_c + p.eta_s_c * (input.c_ch + input.c_im + alpha * input.u_a_c) -
               w.cooling;
    return next;
}

bool has_negative_volume(const AgentState& state)
{
    return state.v_h < 0.0 || state.v_c < 0.0;
}

double thermal_radius(double volume, const AquiferParams& p)
{
    if (volume < 0.0) {
        std::ostringstream os;
        os << "thermal_radius: negative volume " << volume;
        throw std::domain_error(os.str());
    }
    return std::sqrt(volume / p.geometry_factor());
}

double coupling_volume_limit(double distance, const AquiferParams& p)
{
    if (!(distance > 0.0))
        throw std::invalid_argument("coupling_volume_limit: distance must be positive");
    return p.geometry_factor() * distance * distance;
}

double coupling_linearization_anchor(double r_h_i, double r_c_j, const AquiferParams& p)
{
    if (r_h_i < 0.0 || r_c_j < 0.0)
        throw std::invalid_argument("coupling_linearization_anchor: radii must be nonnegative");
    return 2.0 * p.geometry_factor() * r_h_i * r_c_j;
}

DemandPair demand_profile(const DemandModel& model, double t, double noise)
{
    const double q = model.gain * (model.t_des - model.outdoor_temperature(t)) * (1.0 + noise);
    return {std::max(q, 0.0), std::max(-q, 0.0)};
}

} // namespace atesmpc
