#include "atesmpc/assemble.hpp"

#include <algorithm>
#include <cstring>
#include <stdexcept>
#include <unordered_set>

namespace atesmpc {

const char* mode_name(Mode m)
{
    switch (m) {
    case Mode::DDS: return "DDS";
    case Mode::DS: return "DS";
    case Mode::CS: return "CS";
    case Mode::MCS: return "MCS";
    }
    return "?";
}

Mode parse_mode(const std::string& s)
{
    if (s == "DDS") return Mode::DDS;
    if (s == "DS") return Mode::DS;
    if (s == "CS") return Mode::CS;
    if (s == "MCS") return Mode::MCS;
    throw std::invalid_argument("unknown mode '" + s + "' (expected DDS, DS, CS or MCS)");
}

// ---------------------------------------------------------------------------
// Move blocking

BlockingSchedule BlockingSchedule::every_step(int horizon)
{
    BlockingSchedule s;
    s.horizon = horizon;
    s.update_steps.resize(horizon);
    for (int t = 0; t < horizon; ++t)
        s.update_steps[t] = t;
    return s;
}

BlockingSchedule BlockingSchedule::from_tiers(int horizon, const std::vector<BlockingTier>& tiers,
                                              bool hold)
{
    if (horizon < 1)
        throw std::invalid_argument("blocking schedule: horizon must be positive");
    BlockingSchedule s;
    s.horizon = horizon;
    s.hold = hold;
    int expected_start = 0;
    for (const auto& tier : tiers) {
        if (tier.start != expected_start)
            throw std::invalid_argument("blocking tiers must be contiguous from step 0");
        if (tier.period < 1)
            throw std::invalid_argument("blocking tier period must be positive");
        if (tier.start >= horizon)
            break;
        const int end = tier.end < 0 ? horizon : std::min(tier.end, horizon);
        if (end <= tier.start)
            throw std::invalid_argument("blocking tier must have positive length");
        const int updates = std::max(1, (end - tier.start) / tier.period);
        for (int m = 0; m < updates; ++m)
            s.update_steps.push_back(tier.start + m * tier.period);
        expected_start = end;
        if (end == horizon)
            break;
    }
    if (expected_start != horizon)
        throw std::invalid_argument("blocking tiers do not cover the horizon");
    s.validate();
    return s;
}

std::vector<BlockingTier> BlockingSchedule::seasonal_tiers()
{
    return {{0, 24, 1}, {24, 168, 24}, {168, 720, 168}, {720, -1, 720}};
}

int BlockingSchedule::block_of(int step) const
{
    auto it = std::upper_bound(update_steps.begin(), update_steps.end(), step);
    const int m = static_cast<int>(it - update_steps.begin()) - 1;
    if (m < 0)
        return -1;
    if (!hold && update_steps[m] != step)
        return -1;
    return m;
}

int BlockingSchedule::block_length(int m) const
{
    if (!hold)
        return 1;
    const int next = m + 1 < blocks() ? update_steps[m + 1] : horizon;
    return next - update_steps[m];
}

void BlockingSchedule::validate() const
{
    if (horizon < 1)
        throw std::invalid_argument("blocking schedule: horizon must be positive");
    if (update_steps.empty() || update_steps.front() != 0)
        throw std::invalid_argument("blocking schedule: the first horizon step must be an update");
    for (std::size_t m = 1; m < update_steps.size(); ++m)
        if (update_steps[m] <= update_steps[m - 1])
            throw std::invalid_argument("blocking schedule: update steps must increase strictly");
    if (update_steps.back() >= horizon)
        throw std::invalid_argument("blocking schedule: update step beyond the horizon");
}

Eigen::MatrixXd blocking_matrix(const BlockingSchedule& s, int input_dim)
{
    s.validate();
    Eigen::MatrixXd psi = Eigen::MatrixXd::Zero(input_dim * s.horizon, input_dim * s.blocks());
    for (int t = 0; t < s.horizon; ++t) {
        const int m = s.block_of(t);
        if (m >= 0)
            psi.block(t * input_dim, m * input_dim, input_dim, input_dim).setIdentity();
    }
    return psi;
}

// ---------------------------------------------------------------------------
// Condensed dynamics

Eigen::VectorXd CondensedDynamics::free_response() const
{
    return a_stack * x0;
}

Eigen::VectorXd CondensedDynamics::disturbance_response(const Eigen::Ref<const Eigen::VectorXd>& w) const
{
    if (w.size() != kDemandDim * horizon)
        throw std::invalid_argument("disturbance vector has wrong length");
    Eigen::VectorXd out(kStateDim * horizon);
    Eigen::Matrix<double, kStateDim, 1> y = Eigen::Matrix<double, kStateDim, 1>::Zero();
    for (int t = 0; t < horizon; ++t) {
        y = a * y + c * w.segment<kDemandDim>(kDemandDim * t);
        out.segment<kStateDim>(kStateDim * t) = y;
    }
    return out;
}

Eigen::VectorXd CondensedDynamics::worst_case_response(const Eigen::VectorXd& lo,
                                                       const Eigen::VectorXd& hi) const
{
    if (lo.size() != kDemandDim * horizon || hi.size() != kDemandDim * horizon)
        throw std::invalid_argument("uncertainty box has wrong length");
    const Eigen::Matrix<double, kStateDim, kDemandDim> cp = c.cwiseMax(0.0);
    const Eigen::Matrix<double, kStateDim, kDemandDim> cn = c.cwiseMin(0.0);
    Eigen::VectorXd out(kStateDim * horizon);
    Eigen::Matrix<double, kStateDim, 1> y = Eigen::Matrix<double, kStateDim, 1>::Zero();
    for (int t = 0; t < horizon; ++t) {
        y = a * y + cp * lo.segment<kDemandDim>(kDemandDim * t) +
            cn * hi.segment<kDemandDim>(kDemandDim * t);
        out.segment<kStateDim>(kStateDim * t) = y;
    }
    return out;
}

SparseMat CondensedDynamics::c_stack() const
{
    std::vector<Eigen::Triplet<double>> trip;
    for (int s = 0; s < horizon; ++s) {
        Eigen::Matrix<double, kStateDim, kDemandDim> blk = c;
        for (int t = s; t < horizon; ++t) {
            for (int r = 0; r < kStateDim; ++r)
                for (int q = 0; q < kDemandDim; ++q)
                    if (blk(r, q) != 0.0)
                        trip.emplace_back(kStateDim * t + r, kDemandDim * s + q, blk(r, q));
            blk = a * blk;
        }
    }
    SparseMat m(kStateDim * horizon, kDemandDim * horizon);
    m.setFromTriplets(trip.begin(), trip.end());
    return m;
}

Eigen::VectorXd CondensedDynamics::trajectory(const Eigen::VectorXd& u, const Eigen::VectorXd& w) const
{
    return free_response() + b_stack * u + disturbance_response(w);
}

CondensedDynamics condense(const AgentParams& agent, const AgentState& x_k, int horizon,
                           const BlockingSchedule* schedule)
{
    if (horizon < 1)
        throw std::invalid_argument("condense: horizon must be at least 1");
    const BlockingSchedule sched = schedule ? *schedule : BlockingSchedule::every_step(horizon);
    if (sched.horizon != horizon)
        throw std::invalid_argument("condense: schedule horizon differs from the prediction horizon");
    sched.validate();

    const AgentMatrices m = agent_matrices(agent);
    // The row-wise worst case below relies on a diagonal, nonnegative state matrix.
    const Eigen::Matrix<double, kStateDim, kStateDim> off = m.a - Eigen::Matrix<double, kStateDim, kStateDim>(m.a.diagonal().asDiagonal());
    if (off.cwiseAbs().maxCoeff() != 0.0 || (m.a.diagonal().array() < 0.0).any())
        throw std::logic_error("condense: state matrix must be diagonal and nonnegative");

    CondensedDynamics d;
    d.horizon = horizon;
    d.blocks = sched.blocks();
    d.x0 = x_k.vector();
    d.a = m.a;
    d.c = m.c;
    d.a_stack.resize(kStateDim * horizon, kStateDim);
    d.b_stack.setZero(kStateDim * horizon, kInputDim * d.blocks);

    const Eigen::Array<double, kStateDim, 1> diag = m.a.diagonal().array();
    Eigen::Matrix<double, kStateDim, kStateDim> apow = m.a;
    for (int t = 0; t < horizon; ++t) {
        d.a_stack.middleRows<kStateDim>(kStateDim * t) = apow;
        apow = m.a * apow;
        if (t > 0)
            d.b_stack.middleRows<kStateDim>(kStateDim * t) =
                (d.b_stack.middleRows<kStateDim>(kStateDim * (t - 1)).array().colwise() * diag).matrix();
        const int blk = sched.block_of(t);
        if (blk >= 0)
            d.b_stack.block<kStateDim, kInputDim>(kStateDim * t, kInputDim * blk) += m.b;
    }
    return d;
}

// ---------------------------------------------------------------------------
// Constraint rows

const char* block_var_name(int k)
{
    static const char* names[kVarsPerBlock] = {"h_b",     "h_im",     "c_ch", "c_im",
                                               "u_h",     "u_c",      "c_su_b", "c_su_ch",
                                               "e",       "v_b",      "v_ch", "m_a"};
    if (k < 0 || k >= kVarsPerBlock)
        throw std::out_of_range("block variable index");
    return names[k];
}

namespace {

const char* state_name(int r)
{
    static const char* names[kStateDim] = {"x_h", "x_c", "v_h", "v_c", "s_h", "s_c"};
    return names[r];
}

std::string tag(int agent, int step)
{
    return "a" + std::to_string(agent) + ".t" + std::to_string(step) + ".";
}

// Collects rows term by term, canonicalizes them, drops trivial rows and
// exact duplicates.
class RowCollector
{
public:
    explicit RowCollector(RowSet& out) : out_(out) {}

    void term(int col, double v)
    {
        if (v != 0.0)
            cur_.emplace_back(col, v);
    }

    void finish(double rhs, std::string label)
    {
        std::sort(cur_.begin(), cur_.end(),
                  [](const auto& a, const auto& b) { return a.first < b.first; });
        std::vector<std::pair<int, double>> merged;
        for (const auto& e : cur_) {
            if (!merged.empty() && merged.back().first == e.first)
                merged.back().second += e.second;
            else
                merged.push_back(e);
        }
        merged.erase(std::remove_if(merged.begin(), merged.end(),
                                    [](const auto& e) { return e.second == 0.0; }),
                     merged.end());
        cur_.clear();
        rhs += 0.0;  // normalizes -0
        if (merged.empty() && rhs >= 0.0)
            return;
        std::string key(reinterpret_cast<const char*>(&rhs), sizeof rhs);
        for (const auto& e : merged) {
            key.append(reinterpret_cast<const char*>(&e.first), sizeof e.first);
            key.append(reinterpret_cast<const char*>(&e.second), sizeof e.second);
        }
        if (!seen_.insert(std::move(key)).second)
            return;
        const int row = out_.rows();
        for (const auto& e : merged)
            out_.entries.emplace_back(row, e.first, e.second);
        out_.rhs.push_back(rhs);
        out_.labels.push_back(std::move(label));
    }

private:
    RowSet& out_;
    std::vector<std::pair<int, double>> cur_;
    std::unordered_set<std::string> seen_;
};

void add_state_row_terms(RowCollector& rc, const CondensedDynamics& dyn, int row, double scale,
                         int agent, const ProblemLayout& layout)
{
    const auto r = dyn.b_stack.row(row);
    for (int blk = 0; blk < dyn.blocks; ++blk)
        for (int k = 0; k < kInputDim; ++k) {
            const double v = r(blk * kInputDim + k);
            if (v != 0.0)
                rc.term(layout.index(agent, blk, k), scale * v);
        }
}

// With held inputs, volumes, stored energies and their sums are monotone along
// a block, so their rows at states strictly inside a block are implied by the
// block's first and last state.
bool implied_inside_block(const BlockingSchedule* s, int t)
{
    if (s == nullptr || !s->hold || t == 0 || t + 1 >= s->horizon)
        return false;
    const int m = s->block_of(t);
    return m == s->block_of(t - 1) && m == s->block_of(t + 1);
}

void private_rows(RowCollector& rc, const CondensedDynamics& dyn, const UncertaintyBox& box,
                  int agent, const ProblemLayout& layout, double slack_penalty,
                  const BlockingSchedule* reduce = nullptr)
{
    if (box.lower.size() != kDemandDim * dyn.horizon)
        throw std::invalid_argument("private uncertainty box has wrong length");
    const Eigen::VectorXd base = dyn.free_response() + dyn.worst_case_response(box.lower, box.upper);
    for (int t = 0; t < dyn.horizon; ++t)
        for (int r = 0; r < kStateDim; ++r) {
            if (r >= 2 && implied_inside_block(reduce, t))
                continue;
            const int row = kStateDim * t + r;
            add_state_row_terms(rc, dyn, row, -1.0, agent, layout);
            if (slack_penalty > 0.0 && r < 2)
                rc.term(layout.slack_offset + agent * 2 * dyn.horizon + 2 * t + r, -1.0);
            rc.finish(base(row), tag(agent, t) + "private_" + state_name(r));
        }
}

void common_rows(RowCollector& rc, const CondensedDynamics& di, const CondensedDynamics& dj,
                 int i, int j, const UncertaintyBox& box, double v_limit,
                 const ProblemLayout& layout, const BlockingSchedule* reduce = nullptr)
{
    if (di.horizon != dj.horizon || box.upper.size() != di.horizon)
        throw std::invalid_argument("common uncertainty box has wrong length");
    const Eigen::VectorXd fi = di.free_response();
    const Eigen::VectorXd fj = dj.free_response();
    for (int t = 0; t < di.horizon; ++t) {
        if (implied_inside_block(reduce, t))
            continue;
        add_state_row_terms(rc, di, kStateDim * t + 2, 1.0, i, layout);
        add_state_row_terms(rc, dj, kStateDim * t + 3, 1.0, j, layout);
        const double rhs = v_limit - box.upper(t) - fi(kStateDim * t + 2) - fj(kStateDim * t + 3);
        rc.finish(rhs, "pool.a" + std::to_string(i) + ".a" + std::to_string(j) + ".t" +
                           std::to_string(t));
    }
}

} // namespace

RowSet robustify_private(const CondensedDynamics& dyn, const UncertaintyBox& box, int agent,
                         const ProblemLayout& layout)
{
    RowSet out;
    RowCollector rc(out);
    private_rows(rc, dyn, box, agent, layout, 0.0);
    return out;
}

RowSet robustify_common(const CondensedDynamics& dyn_i, const CondensedDynamics& dyn_j,
                        int agent_i, int agent_j, const UncertaintyBox& box, double v_limit,
                        const ProblemLayout& layout)
{
    RowSet out;
    RowCollector rc(out);
    common_rows(rc, dyn_i, dyn_j, agent_i, agent_j, box, v_limit, layout);
    return out;
}

// ---------------------------------------------------------------------------
// Problem assembly

long problem_variable_count(int agents, const BlockingSchedule& s)
{
    return static_cast<long>(agents) * s.blocks() * kVarsPerBlock;
}

namespace {

// Per-step operating rows: binary gating, pump mode, startup detection and
// the two-sided soft balance.
void decision_rows(RowCollector& rc, const AgentProblemData& a, const CondensedDynamics& dyn,
                   const BlockingSchedule& sched, int agent, const ProblemLayout& L)
{
    const auto& b = a.params.bounds;
    const auto& lam = a.params.lambda_su;
    const Eigen::VectorXd free = dyn.free_response();
    const double s_bar = a.params.aquifer.s_bar;
    for (int t = 0; t < sched.horizon; ++t) {
        const int m = sched.block_of(t);
        const int mp = t > 0 ? sched.block_of(t - 1) : -1;
        const std::string pre = tag(agent, t);
        auto var = [&](int blk, int k) { return L.index(agent, blk, k); };

        if (m >= 0) {
            rc.term(var(m, kVarVb), b.h_b_min);
            rc.term(var(m, kVarHb), -1.0);
            rc.finish(0.0, pre + "gate_hb_min");
            rc.term(var(m, kVarHb), 1.0);
            rc.term(var(m, kVarVb), -b.h_b_max);
            rc.finish(0.0, pre + "gate_hb_max");
            rc.term(var(m, kVarVch), b.c_ch_min);
            rc.term(var(m, kVarCch), -1.0);
            rc.finish(0.0, pre + "gate_cch_min");
            rc.term(var(m, kVarCch), 1.0);
            rc.term(var(m, kVarVch), -b.c_ch_max);
            rc.finish(0.0, pre + "gate_cch_max");
            rc.term(var(m, kVarMa), b.u_a_min);
            rc.term(var(m, kVarUh), -1.0);
            rc.finish(0.0, pre + "pump_h_min");
            rc.term(var(m, kVarUh), 1.0);
            rc.term(var(m, kVarMa), -b.u_a_max);
            rc.finish(0.0, pre + "pump_h_max");
            rc.term(var(m, kVarMa), -b.u_a_min);
            rc.term(var(m, kVarUc), -1.0);
            rc.finish(-b.u_a_min, pre + "pump_c_min");
            rc.term(var(m, kVarUc), 1.0);
            rc.term(var(m, kVarMa), b.u_a_max);
            rc.finish(b.u_a_max, pre + "pump_c_max");
        }

        // Lambda (v_t - v_{t-1}) - c_su_t <= 0
        const int bins[2] = {kVarVb, kVarVch};
        const int costs[2] = {kVarCsuB, kVarCsuCh};
        const char* names[2] = {"startup_b", "startup_ch"};
        for (int q = 0; q < 2; ++q) {
            double rhs = 0.0;
            if (m >= 0) {
                rc.term(var(m, bins[q]), lam[q]);
                rc.term(var(m, costs[q]), -1.0);
            }
            if (t == 0)
                rhs = lam[q] * a.previous_on[q];
            else if (mp >= 0)
                rc.term(var(mp, bins[q]), -lam[q]);
            rc.finish(rhs, pre + names[q]);
        }

        // |S^h_{t+1} + S^c_{t+1} - S_bar| <= e_t
        if (implied_inside_block(&sched, t))
            continue;
        const int rh = kStateDim * t + 4;
        const int rcold = kStateDim * t + 5;
        const double sfree = free(rh) + free(rcold);
        for (int sign : {1, -1}) {
            for (int blk = 0; blk < dyn.blocks; ++blk)
                for (int k = 0; k < kInputDim; ++k) {
                    const double v = dyn.b_stack(rh, blk * kInputDim + k) +
                                     dyn.b_stack(rcold, blk * kInputDim + k);
                    if (v != 0.0)
                        rc.term(var(blk, k), sign * v);
                }
            if (m >= 0)
                rc.term(var(m, kVarE), -1.0);
            rc.finish(sign * (s_bar - sfree), pre + (sign > 0 ? "balance_up" : "balance_lo"));
        }
    }
}

void objective_terms(const AgentProblemData& a, const CondensedDynamics& dyn,
                     const BlockingSchedule& sched, int agent, const ProblemLayout& L,
                     std::vector<Eigen::Triplet<double>>& hess, Eigen::VectorXd& linear,
                     double& constant)
{
    const int n = dyn.horizon;
    const int nu = kInputDim * dyn.blocks;
    if (a.cost_samples.rows() < 1 || a.cost_samples.cols() != kDemandDim * n)
        throw std::invalid_argument("cost samples must be a nonempty matrix of trajectories of length 2N");

    // Only the imbalance components carry weight.
    Eigen::MatrixXd bx(2 * n, nu);
    Eigen::VectorXd q(2 * n);
    for (int t = 0; t < n; ++t) {
        bx.row(2 * t) = dyn.b_stack.row(kStateDim * t);
        bx.row(2 * t + 1) = dyn.b_stack.row(kStateDim * t + 1);
        q(2 * t) = a.params.weight_qh;
        q(2 * t + 1) = a.params.weight_qc;
    }
    const Eigen::VectorXd free = dyn.free_response();
    Eigen::VectorXd dmean = Eigen::VectorXd::Zero(2 * n);
    double cst = 0.0;
    for (Eigen::Index s = 0; s < a.cost_samples.rows(); ++s) {
        const Eigen::VectorXd d = free + dyn.disturbance_response(a.cost_samples.row(s).transpose());
        Eigen::VectorXd dx(2 * n);
        for (int t = 0; t < n; ++t) {
            dx(2 * t) = d(kStateDim * t);
            dx(2 * t + 1) = d(kStateDim * t + 1);
        }
        dmean += dx;
        cst += dx.dot(q.cwiseProduct(dx));
    }
    const double ns = static_cast<double>(a.cost_samples.rows());
    dmean /= ns;
    constant += cst / ns;

    Eigen::MatrixXd gram = bx.transpose() * q.asDiagonal() * bx;
    gram = 0.5 * (gram + gram.transpose()).eval();
    const Eigen::VectorXd lin = 2.0 * bx.transpose() * q.cwiseProduct(dmean);

    auto col = [&](int j) { return L.index(agent, j / kInputDim, j % kInputDim); };
    for (int j = 0; j < nu; ++j) {
        linear(col(j)) += lin(j);
        for (int i = 0; i < nu; ++i)
            if (gram(i, j) != 0.0)
                hess.emplace_back(col(i), col(j), 2.0 * gram(i, j));
    }
    for (int blk = 0; blk < dyn.blocks; ++blk) {
        const double len = sched.block_length(blk);
        for (int k = 0; k < kInputDim; ++k) {
            const double r = a.params.cost_r[k];
            if (r != 0.0)
                hess.emplace_back(L.index(agent, blk, k), L.index(agent, blk, k), 2.0 * r * len);
        }
    }
}

} // namespace

BuiltProblem build_problem(const BuildOptions& opt, const std::vector<AgentProblemData>& agents,
                           const std::vector<CommonPairData>& pairs)
{
    if (agents.empty())
        throw std::invalid_argument("build_problem: no agents");
    if (opt.horizon < 1)
        throw std::invalid_argument("build_problem: horizon must be at least 1");
    if (is_coupled(opt.mode)) {
        if (agents.size() < 2)
            throw std::invalid_argument("build_problem: coupled modes need at least two agents");
        if (pairs.empty())
            throw std::invalid_argument("build_problem: coupled modes need neighbor distances");
    } else if (!pairs.empty()) {
        throw std::invalid_argument("build_problem: decoupled modes take no common constraints");
    }
    if (opt.mode == Mode::MCS && !opt.schedule)
        throw std::invalid_argument("build_problem: MCS requires a blocking schedule");
    if (opt.mode != Mode::MCS && opt.schedule)
        throw std::invalid_argument("build_problem: only MCS accepts a blocking schedule");

    BuiltProblem out;
    out.schedule = opt.schedule ? *opt.schedule : BlockingSchedule::every_step(opt.horizon);
    if (out.schedule.horizon != opt.horizon)
        throw std::invalid_argument("build_problem: schedule horizon differs from the prediction horizon");
    out.schedule.validate();

    const int na = static_cast<int>(agents.size());
    const int n = opt.horizon;
    ProblemLayout& L = out.layout;
    L.agents = na;
    L.blocks = out.schedule.blocks();
    L.slack_offset = L.decision_count();
    L.slack_count = opt.fallback_penalty > 0.0 ? na * 2 * n : 0;
    const int nv = L.total();

    for (const auto& a : agents) {
        a.params.validate();
        if (a.forecast.size() != kDemandDim * n)
            throw std::invalid_argument("build_problem: forecast length must be 2N");
        out.dynamics.push_back(condense(a.params, a.state, n, &out.schedule));
    }

    MiqpProblem& P = out.problem;
    P.linear = Eigen::VectorXd::Zero(nv);
    P.lower.resize(nv);
    P.upper.resize(nv);
    P.integrality.assign(nv, 0);
    P.var_labels.resize(nv);
    const double inf = std::numeric_limits<double>::infinity();
    for (int i = 0; i < na; ++i) {
        const auto& b = agents[i].params.bounds;
        const double lo[kVarsPerBlock] = {0.0, b.h_im_min, 0.0, b.c_im_min, 0.0, 0.0,
                                          0.0, 0.0,        0.0, 0.0,        0.0, 0.0};
        const double hi[kVarsPerBlock] = {b.h_b_max, b.h_im_max, b.c_ch_max, b.c_im_max,
                                          b.u_a_max, b.u_a_max,  inf,        inf,
                                          inf,       1.0,        1.0,        1.0};
        for (int blk = 0; blk < L.blocks; ++blk)
            for (int k = 0; k < kVarsPerBlock; ++k) {
                const int idx = L.index(i, blk, k);
                P.lower(idx) = lo[k];
                P.upper(idx) = hi[k];
                P.integrality[idx] = k >= kVarVb ? 1 : 0;
                P.var_labels[idx] = tag(i, out.schedule.update_steps[blk]) + block_var_name(k);
            }
        for (int t = 0; t < L.slack_count / std::max(na, 1) / 2; ++t)
            for (int r = 0; r < 2; ++r) {
                const int idx = L.slack_offset + i * 2 * n + 2 * t + r;
                P.lower(idx) = 0.0;
                P.upper(idx) = inf;
                P.linear(idx) = opt.fallback_penalty;
                P.var_labels[idx] = tag(i, t) + "slack_" + state_name(r);
            }
    }

    RowSet rows;
    RowCollector rc(rows);
    for (int i = 0; i < na; ++i)
        decision_rows(rc, agents[i], out.dynamics[i], out.schedule, i, L);
    for (int i = 0; i < na; ++i)
        private_rows(rc, out.dynamics[i], agents[i].private_box, i, L, opt.fallback_penalty, &out.schedule);
    for (const auto& pr : pairs) {
        if (pr.i < 0 || pr.i >= na || pr.j < 0 || pr.j >= na || pr.i == pr.j)
            throw std::invalid_argument("build_problem: invalid neighbor pair");
        common_rows(rc, out.dynamics[pr.i], out.dynamics[pr.j], pr.i, pr.j, pr.box, pr.v_limit, L,
                    &out.schedule);
    }
    P.ineq.resize(rows.rows(), nv);
    P.ineq.setFromTriplets(rows.entries.begin(), rows.entries.end());
    P.ineq_rhs = Eigen::Map<const Eigen::VectorXd>(rows.rhs.data(), rows.rows());
    P.ineq_labels = std::move(rows.labels);
    P.eq.resize(0, nv);
    P.eq_rhs.resize(0);

    std::vector<Eigen::Triplet<double>> hess;
    for (int i = 0; i < na; ++i)
        objective_terms(agents[i], out.dynamics[i], out.schedule, i, L, hess, P.linear, P.constant);
    P.hessian.resize(nv, nv);
    P.hessian.setFromTriplets(hess.begin(), hess.end());
    P.validate();
    return out;
}

} // namespace atesmpc
