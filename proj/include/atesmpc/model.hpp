#pragma once

#include <array>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace atesmpc {

/// Raised when a simulated state leaves the physically admissible region
/// (currently: a negative well volume).
class ModelError : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

/// Aquifer and well constants of one ATES installation.
///
/// Heat capacities are volumetric and must share one energy unit with the
/// demand data (the bundled configurations use kWh, so c_w is about
/// 1.1667 kWh m^-3 K^-1). The thermal radius only depends on the ratio
/// c_w / c_aq, so any consistent unit works.
struct AquiferParams
{
    double eta_a = 0.99999;  // loss factor of stored energy per step
    double c_w = 1.1667;     // volumetric heat capacity of water
    double c_sand = 0.5556;  // volumetric heat capacity of sand
    double n_p = 0.3;        // porosity
    double ell = 50.0;       // filter screen length [m]
    double t_h = 16.0;       // warm well temperature [C]
    double t_c = 6.0;        // cold well temperature [C]
    double t_amb = 11.0;     // aquifer ambient temperature [C]
    double s_bar = 0.0;      // reference total thermal energy content

    double c_aq() const { return (1.0 - n_p) * c_sand + n_p * c_w; }
    double alpha_h() const { return c_w * (t_h - t_amb); }
    double alpha_c() const { return c_w * (t_amb - t_c); }
    double alpha() const { return alpha_h() + alpha_c(); }
    /// c_aq * pi * ell / c_w, the factor linking V = factor * r^2.
    double geometry_factor() const;

    void validate() const;
};

struct OperatingBounds
{
    double h_b_min = 0.0, h_b_max = 1000.0;
    double c_ch_min = 0.0, c_ch_max = 1000.0;
    double h_im_min = 0.0, h_im_max = 0.0;
    double c_im_min = 0.0, c_im_max = 0.0;
    double u_a_min = 0.0, u_a_max = 100.0;
};

struct Neighbor
{
    int agent = -1;
    double distance = 0.0;   // d_ij [m]
    double eps_common = 0.1; // admissible violation of the pool constraint
};

/// Indices into the 9-vector of continuous per-step inputs.
enum InputIndex : int {
    kBoiler = 0,
    kHeatImport = 1,
    kChiller = 2,
    kColdImport = 3,
    kPumpHeating = 4,
    kPumpCooling = 5,
    kStartupBoiler = 6,
    kStartupChiller = 7,
    kBalanceSlack = 8,
};

inline constexpr int kStateDim = 6;
inline constexpr int kInputDim = 9;
inline constexpr int kBinaryDim = 3;
inline constexpr int kDemandDim = 2;

struct AgentParams
{
    AquiferParams aquifer;
    double eta_s_h = 0.95;
    double eta_s_c = 0.95;
    double cop = 4.0;
    OperatingBounds bounds;
    std::array<double, 2> lambda_su{10.0, 10.0};
    /// Diagonal of R: boiler, heat import, chiller, cold import, pump heating,
    /// pump cooling, startup boiler, startup chiller, balance slack.
    std::array<double, kInputDim> cost_r{1e-3, 1e-3, 1e-3, 1e-3, 1e-2, 1e-2, 1.0, 1.0, 1.0};
    double weight_qh = 1.0;
    double weight_qc = 1.0;
    double eps_private = 0.1;
    std::vector<Neighbor> neighbors;

    double alpha_hp() const { return cop / (cop - 1.0); }
    void validate() const;
};

/// x = (x^h, x^c, V^h, V^c, S^h, S^c).
struct AgentState
{
    double x_h = 0.0;
    double x_c = 0.0;
    double v_h = 0.0;
    double v_c = 0.0;
    double s_h = 0.0;
    double s_c = 0.0;

    Eigen::Matrix<double, kStateDim, 1> vector() const;
    static AgentState from_vector(const Eigen::Ref<const Eigen::VectorXd>& x);
    bool operator==(const AgentState&) const = default;
};

struct AgentInput
{
    double h_b = 0.0;
    double h_im = 0.0;
    double c_ch = 0.0;
    double c_im = 0.0;
    double u_a_h = 0.0;
    double u_a_c = 0.0;
    double c_su_b = 0.0;
    double c_su_ch = 0.0;
    double e = 0.0;
    double v_b = 0.0;
    double v_ch = 0.0;
    double m_a = 0.0;

    /// The continuous part in InputIndex order.
    Eigen::Matrix<double, kInputDim, 1> continuous() const;
    static AgentInput from_continuous(const Eigen::Ref<const Eigen::VectorXd>& u);
    bool operator==(const AgentInput&) const = default;
};

struct DemandPair
{
    double heating = 0.0;
    double cooling = 0.0;
};

/// Surrogate building: demand proportional to the gap between the desired
/// indoor temperature and a synthetic two-sinusoid outdoor temperature.
struct DemandModel
{
    double gain = 500.0 / 24.0;  // energy per step per K; peak heating about 500
    double t_des = 20.0;         // [C]
    double t_mean = 10.0;        // [C]
    double seasonal_amp = 10.0;  // [C]
    double daily_amp = 4.0;      // [C]
    double seasonal_peak = 4800.0; // hour of year with the warmest day
    double daily_peak = 15.0;    // hour of day with the warmest temperature

    double outdoor_temperature(double t) const;
    void validate() const;
};

/// Per-step linear model x' = a x + b u + c w.
struct AgentMatrices
{
    Eigen::Matrix<double, kStateDim, kStateDim> a;
    Eigen::Matrix<double, kStateDim, kInputDim> b;
    Eigen::Matrix<double, kStateDim, kDemandDim> c;
};

AgentMatrices agent_matrices(const AgentParams& p);

/// Well dynamics only; the imbalance fields are copied unchanged.
AgentState step_ates(const AgentState& state, const AgentInput& input, const AgentParams& p);

/// Full one-step agent dynamics under demand w.
AgentState step_agent(const AgentState& state, const AgentInput& input, const DemandPair& w,
                      const AgentParams& p);

bool has_negative_volume(const AgentState& state);

double thermal_radius(double volume, const AquiferParams& p);
double coupling_volume_limit(double distance, const AquiferParams& p);
double coupling_linearization_anchor(double r_h_i, double r_c_j, const AquiferParams& p);

DemandPair demand_profile(const DemandModel& model, double t, double noise);

} // namespace atesmpc
