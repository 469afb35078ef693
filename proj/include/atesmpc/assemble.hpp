#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "atesmpc/model.hpp"
#include "atesmpc/problem.hpp"
#include "atesmpc/scenario.hpp"

namespace atesmpc {

enum class Mode { DDS, DS, CS, MCS };

const char* mode_name(Mode m);
Mode parse_mode(const std::string& s);
inline bool is_coupled(Mode m) { return m == Mode::CS || m == Mode::MCS; }

/// Update every `period` steps inside [start, end); end < 0 means "to the horizon".
struct BlockingTier
{
    int start = 0;
    int end = -1;
    int period = 1;
};

/// Update instants as offsets from the first horizon step.
struct BlockingSchedule
{
    int horizon = 0;
    std::vector<int> update_steps;
    /// Hold the last update until the next one. When false, inputs are zero
    /// between update instants.
    bool hold = true;

    static BlockingSchedule every_step(int horizon);
    /// A tier of length L contributes max(1, floor(L / period)) updates; the
    /// last one is held to the end of the tier. Tiers starting at or after the
    /// horizon are ignored and the last used tier is cut at the horizon.
    static BlockingSchedule from_tiers(int horizon, const std::vector<BlockingTier>& tiers,
                                       bool hold = true);
    /// Hourly for a day, daily for a week, weekly for a month, monthly after.
    static std::vector<BlockingTier> seasonal_tiers();

    int blocks() const { return static_cast<int>(update_steps.size()); }
    /// Block acting at horizon step `step`, or -1 if the input is forced to zero.
    int block_of(int step) const;
    /// Number of horizon steps mapped to block m.
    int block_length(int m) const;
    void validate() const;
};

/// Psi with u = Psi * u_tilde, of size (input_dim * horizon) x (input_dim * blocks).
Eigen::MatrixXd blocking_matrix(const BlockingSchedule& s, int input_dim);

/// Stacked trajectory x_{k+1..k+N} = a_stack x_k + b_stack u + C w, where u
/// holds the continuous inputs of each block (9 per block) and w the demand
/// pairs of each step.
struct CondensedDynamics
{
    int horizon = 0;
    int blocks = 0;
    Eigen::Matrix<double, kStateDim, 1> x0;
    Eigen::MatrixXd a_stack;
    Eigen::MatrixXd b_stack;
    Eigen::Matrix<double, kStateDim, kStateDim> a;
    Eigen::Matrix<double, kStateDim, kDemandDim> c;

    Eigen::VectorXd free_response() const;
    /// C w evaluated by recursion, without forming C.
    Eigen::VectorXd disturbance_response(const Eigen::Ref<const Eigen::VectorXd>& w) const;
    /// Sign-split response C+ w_lo + C- w_hi, the rowwise minimum of C w over the box.
    Eigen::VectorXd worst_case_response(const Eigen::VectorXd& lo, const Eigen::VectorXd& hi) const;
    SparseMat c_stack() const;
    Eigen::VectorXd trajectory(const Eigen::VectorXd& u, const Eigen::VectorXd& w) const;
};

CondensedDynamics condense(const AgentParams& agent, const AgentState& x_k, int horizon,
                           const BlockingSchedule* schedule = nullptr);

/// Variables of one agent and block, in this order.
enum BlockVar : int {
    kVarHb = 0, kVarHim, kVarCch, kVarCim, kVarUh, kVarUc, kVarCsuB, kVarCsuCh, kVarE,
    kVarVb, kVarVch, kVarMa,
};
inline constexpr int kVarsPerBlock = 12;
const char* block_var_name(int k);

struct ProblemLayout
{
    int agents = 0;
    int blocks = 0;
    int slack_offset = 0;
    int slack_count = 0;

    int index(int agent, int block, int k) const
    {
        return (agent * blocks + block) * kVarsPerBlock + k;
    }
    int decision_count() const { return agents * blocks * kVarsPerBlock; }
    int total() const { return decision_count() + slack_count; }
};

/// Rows a x <= rhs over a caller-defined variable vector.
struct RowSet
{
    std::vector<Eigen::Triplet<double>> entries;
    std::vector<double> rhs;
    std::vector<std::string> labels;

    int rows() const { return static_cast<int>(rhs.size()); }
};

/// Robust x >= 0 rows for every state component and step, expressed over the
/// block variables of `agent` in `layout`.
RowSet robustify_private(const CondensedDynamics& dyn, const UncertaintyBox& box,
                         int agent, const ProblemLayout& layout);

/// V^h_i + V^c_j <= V_ij - delta_upper for each step.
RowSet robustify_common(const CondensedDynamics& dyn_i, const CondensedDynamics& dyn_j,
                        int agent_i, int agent_j, const UncertaintyBox& box, double v_limit,
                        const ProblemLayout& layout);

struct AgentProblemData
{
    AgentParams params;
    AgentState state;
    Eigen::VectorXd forecast;      // 2N, (heating, cooling) per step
    UncertaintyBox private_box;    // over the same layout
    Eigen::MatrixXd cost_samples;  // rows of length 2N
    std::array<double, 2> previous_on{0.0, 0.0}; // boiler, chiller status before the horizon
};

struct CommonPairData
{
    int i = 0;
    int j = 0;
    double v_limit = 0.0;
    UncertaintyBox box;
};

struct BuildOptions
{
    Mode mode = Mode::DS;
    int horizon = 24;
    std::optional<BlockingSchedule> schedule;
    /// When positive, the x^h / x^c private rows get a nonnegative slack with
    /// this linear penalty.
    double fallback_penalty = 0.0;
};

struct BuiltProblem
{
    MiqpProblem problem;
    ProblemLayout layout;
    BlockingSchedule schedule;
    std::vector<CondensedDynamics> dynamics;
};

BuiltProblem build_problem(const BuildOptions& opt, const std::vector<AgentProblemData>& agents,
                           const std::vector<CommonPairData>& pairs);

/// Decision-variable count of a problem without building it.
long problem_variable_count(int agents, const BlockingSchedule& s);

} // namespace atesmpc
