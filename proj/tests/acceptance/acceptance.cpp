// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "atesmpc/assemble.hpp"
#include "atesmpc/cli.hpp"
#include "atesmpc/config.hpp"
#include "atesmpc/miqp.hpp"
#include "atesmpc/scenario.hpp"
#include "atesmpc/sim.hpp"
#include "oracles.hpp"

using namespace atesmpc;
namespace fs = std::filesystem;

namespace {

const fs::path kSource = ATESMPC_SOURCE_DIR;

struct Outcome
{
    bool pass = false;
    std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0)
{
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0, double d = 0.0)
{
    char buf[256];
    std::snprintf(buf, sizeof buf, f, a, b, c, d);
    return buf;
}

// 1
Outcome scenario_count_check()
{
    const long n = scenario_count({0.1, 1e-5, 96});
    return {n == 2151, "N_s(0.1, 1e-5, 96) = " + std::to_string(n) + ", expected 2151"};
}

// 2
Outcome box_coverage()
{
    const auto t0 = std::chrono::steady_clock::now();
    DemandModel office;
    Eigen::VectorXd f(48);
    for (int k = 0; k < 24; ++k) {
        const DemandPair d = demand_profile(office, 2000.0 + k, 0.0);
        f(2 * k) = d.heating;
        f(2 * k + 1) = d.cooling;
    }
    const RiskSpec spec{0.1, 1e-5, 96};
    const int ns = static_cast<int>(scenario_count(spec));
    const int fresh = 10000;
    const double floor = 0.9 - 3.0 * std::sqrt(0.9 * 0.1 / fresh);
    double worst = 1.0;
    bool ok = true;
    for (int rep = 0; rep < 20; ++rep) {
        const UncertaintyBox box = fit_box(sample_private(f, 0.1, ns, derive_seed(500, 1, rep, 0)), spec);
        const ScenarioSet test = sample_private(f, 0.1, fresh, derive_seed(900, 2, rep, 0));
        int inside = 0;
        for (int s = 0; s < fresh; ++s)
            inside += box.contains(test.samples.row(s).transpose());
        const double freq = static_cast<double>(inside) / fresh;
        worst = std::min(worst, freq);
        ok = ok && freq >= floor;
    }
    const double t = seconds_since(t0);
    ok = ok && t < 60.0;
    return {ok, fmt("worst coverage %.4f over 20 repetitions (floor %.4f), %.1f s (limit 60 s)", worst, floor, t)};
}

// 3
Outcome miqp_oracle()
{
    const auto t0 = std::chrono::steady_clock::now();
    std::mt19937_64 rng(2024);
    std::uniform_int_distribution<int> dc(1, 12), db(1, 6), dm(1, 12);
    double worst = 0.0;
    int matched = 0;
    for (int trial = 0; trial < 100; ++trial) {
        const MiqpProblem p = oracle::random_miqp(rng, dc(rng), db(rng), dm(rng));
        const oracle::OracleResult ref = oracle::brute_force_miqp(p);
        const MiqpSolution s = solve_miqp(p);
        if (!ref.feasible || !s.has_incumbent)
            continue;
        const double err = std::abs(s.objective - ref.objective) / std::max(1.0, std::abs(ref.objective));
        worst = std::max(worst, err);
        matched += err <= 1e-6;
    }
    const double t = seconds_since(t0);
    return {matched == 100 && t < 120.0,
            fmt("%.0f/100 instances match, worst relative error %.2e (limit 1e-6), %.1f s (limit 120 s)",
                matched, worst, t)};
}

// 4
Outcome condensation()
{
    std::mt19937_64 rng(404);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    double worst = 0.0;
    for (int n : {1, 5, 24})
        for (int trial = 0; trial < 50; ++trial) {
            AgentParams p;
            p.eta_s_h = 0.8 + 0.2 * u01(rng);
            p.eta_s_c = 0.8 + 0.2 * u01(rng);
            p.aquifer.eta_a = 0.9 + 0.0999 * u01(rng);
            p.cop = 2.0 + 4.0 * u01(rng);
            AgentState x;
            x.x_h = 100.0 * u01(rng);
            x.x_c = 100.0 * u01(rng);
            x.v_h = 5000.0 * u01(rng);
            x.v_c = 5000.0 * u01(rng);
            x.s_h = 1e4 * u01(rng);
            x.s_c = 1e4 * u01(rng);
            const CondensedDynamics d = condense(p, x, n);
            Eigen::VectorXd u(kInputDim * n), w(kDemandDim * n), iter(kStateDim * n);
            AgentState cur = x;
            for (int t = 0; t < n; ++t) {
                AgentInput in;
                in.h_b = 300.0 * u01(rng);
                in.h_im = 20.0 * u01(rng);
                in.c_ch = 300.0 * u01(rng);
                in.c_im = 20.0 * u01(rng);
                (u01(rng) < 0.5 ? in.u_a_h : in.u_a_c) = 50.0 * u01(rng);
                in.c_su_b = u01(rng);
                in.c_su_ch = u01(rng);
                in.e = u01(rng);
                const double q = 600.0 * (u01(rng) - 0.5);
                const DemandPair dw{std::max(q, 0.0), std::max(-q, 0.0)};
                u.segment<kInputDim>(kInputDim * t) = in.continuous();
                w(2 * t) = dw.heating;
                w(2 * t + 1) = dw.cooling;
                cur = step_agent(cur, in, dw, p);
                iter.segment<kStateDim>(kStateDim * t) = cur.vector();
            }
            const Eigen::VectorXd cond = d.trajectory(u, w);
            for (Eigen::Index k = 0; k < iter.size(); ++k)
                worst = std::max(worst, std::abs(cond(k) - iter(k)) / std::max(1.0, std::abs(iter(k))));
        }
    return {worst <= 1e-10, fmt("150 trials, worst error %.2e relative to max(1,|x|) (limit 1e-10)", worst)};
}

RunConfig load(const char* name)
{
    return load_run_config((kSource / "configs" / name).string());
}

int negative_imbalance(const SimulationTrace& tr)
{
    int n = 0;
    for (const StepRecord& r : tr.records)
        n += r.next.x_h < 0.0 || r.next.x_c < 0.0;
    return n;
}

int radius_violations(const SimulationTrace& tr)
{
    int n = 0;
    for (const StepRecord& r : tr.records)
        n += r.radius_margin < 0.0;
    return n;
}

// 5
Outcome imbalance_ordering()
{
    const auto t0 = std::chrono::steady_clock::now();
    const RunConfig rc = load("three_agent.json");
    std::ostringstream d;
    bool ok = true;
    for (Mode m : {Mode::DDS, Mode::DS, Mode::CS}) {
        SimulationConfig cfg = rc.for_mode(m);
        cfg.duration = 720;
        cfg.horizon = 24;
        const SimulationTrace tr = run(cfg);
        if (m == Mode::DDS) {
            const int neg = negative_imbalance(tr);
            ok = ok && neg >= 1;
            d << "DDS negative-imbalance records " << neg << " (need >= 1); ";
            continue;
        }
        const ValidationReport vr = validate_posteriori(cfg, tr, 10000, rc.validation_seed);
        d << mode_name(m) << " violation";
        for (const AgentViolation& a : vr.agents) {
            const bool within = a.fraction <= a.eps + 3.0 * std::sqrt(a.eps * (1.0 - a.eps) / 10000.0);
            ok = ok && within;
            d << ' ' << fmt("%.4f", a.fraction);
        }
        d << " (limit " << fmt("%.4f", 0.1 + 3.0 * std::sqrt(0.09 / 10000.0)) << "); ";
    }
    const double t = seconds_since(t0);
    ok = ok && t <= 600.0;
    d << fmt("%.0f s (limit 600 s)", t);
    return {ok, d.str()};
}

struct InteractionRuns
{
    SimulationConfig ds_cfg, cs_cfg;
    SimulationTrace ds, cs;
    double seconds = 0.0;
};

InteractionRuns interaction_runs()
{
    const auto t0 = std::chrono::steady_clock::now();
    const RunConfig rc = load("interaction.json");
    InteractionRuns r;
    r.ds_cfg = rc.for_mode(Mode::DS);
    r.cs_cfg = rc.for_mode(Mode::CS);
    r.ds = run(r.ds_cfg);
    r.cs = run(r.cs_cfg);
    r.seconds = seconds_since(t0);
    return r;
}

// 6
Outcome radius_ordering(const InteractionRuns& r)
{
    const int ds = radius_violations(r.ds), cs = radius_violations(r.cs);
    const bool ok = ds >= 1 && cs == 0 && r.seconds <= 600.0;
    return {ok, fmt("DS %.0f radius violations (need >= 1), CS %.0f (need 0), %.0f s (limit 600 s)", ds, cs,
                    r.seconds)};
}

// 7
Outcome anchor_identity()
{
    std::mt19937_64 rng(7077);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    int agree = 0, boundary_ok = 0;
    double worst_boundary = 0.0;
    for (int k = 0; k < 1000; ++k) {
        AquiferParams a;
        a.c_w = 1.0 + 4.0 * u01(rng);
        a.c_sand = 0.5 + 2.0 * u01(rng);
        a.n_p = u01(rng);
        a.ell = 10.0 + 90.0 * u01(rng);
        const double rh = 50.0 * u01(rng), rc = 50.0 * u01(rng), d = 1.0 + 100.0 * u01(rng);
        const double gf = a.c_aq() * std::numbers::pi * a.ell / a.c_w;
        const auto lin_slack = [&](double dist) {
            return coupling_volume_limit(dist, a) - coupling_linearization_anchor(rh, rc, a) - gf * rh * rh -
                   gf * rc * rc;
        };
        const double rad = d - rh - rc;
        agree += (lin_slack(d) >= 0.0) == (rad >= 0.0);
        // Exact contact: both sides vanish.
        const double touch = rh + rc;
        const double rel = std::abs(lin_slack(touch)) / coupling_volume_limit(touch, a);
        worst_boundary = std::max(worst_boundary, rel);
        boundary_ok += rel <= 1e-9;
    }
    return {agree == 1000 && boundary_ok == 1000,
            fmt("%.0f/1000 truth values agree, boundary residual %.2e relative (limit 1e-9)", agree,
                worst_boundary)};
}

// 8
Outcome move_blocking()
{
    const int h = 90 * 24;
    const BlockingSchedule s = BlockingSchedule::from_tiers(h, BlockingSchedule::seasonal_tiers());
    const long blocked = problem_variable_count(3, s);
    const long full = problem_variable_count(3, BlockingSchedule::every_step(h));
    const double ratio = static_cast<double>(blocked) / static_cast<double>(full);

    // Byte identity of MCS with every step against CS on a small coupled problem.
    AgentParams p;
    p.bounds.h_b_min = 10.0;
    p.bounds.c_ch_min = 10.0;
    p.aquifer.s_bar = 2.0 * 5.8335 * 1000.0;
    p.neighbors = {{1, 100.0, 0.1}};
    AgentState x;
    x.v_h = x.v_c = 1000.0;
    x.s_h = x.s_c = 5.8335 * 1000.0;
    const int n = 12;
    std::vector<AgentProblemData> agents(2);
    for (int i = 0; i < 2; ++i) {
        AgentProblemData& a = agents[i];
        a.params = p;
        a.params.neighbors = {{1 - i, 100.0, 0.1}};
        a.state = x;
        a.forecast = Eigen::VectorXd::Zero(2 * n);
        for (int t = 0; t < n; ++t)
            a.forecast(2 * t + i) = 40.0 + 5.0 * t;
        const RiskSpec spec{0.1, 1e-5, 4 * n};
        a.private_box = fit_box(
            sample_private(a.forecast, 0.1, static_cast<int>(scenario_count(spec)), 17 + i), spec);
        a.cost_samples = a.forecast.transpose();
    }
    std::vector<CommonPairData> pairs = {{0, 1, 5e5, UncertaintyBox::point(Eigen::VectorXd::Constant(n, 700.0))},
                                         {1, 0, 5e5, UncertaintyBox::point(Eigen::VectorXd::Constant(n, 650.0))}};
    BuildOptions cs;
    cs.mode = Mode::CS;
    cs.horizon = n;
    BuildOptions mcs = cs;
    mcs.mode = Mode::MCS;
    mcs.schedule = BlockingSchedule::every_step(n);
    const bool identical = to_text(build_problem(cs, agents, pairs).problem) ==
                           to_text(build_problem(mcs, agents, pairs).problem);

    const bool ok = s.blocks() == 35 && ratio < 0.02 && identical;
    return {ok, fmt("%.0f blocks (expected 35), variable ratio %.4f (limit 0.02), ", s.blocks(), ratio) +
                    (identical ? "every-step MCS identical to CS" : "every-step MCS differs from CS")};
}

// 9
Outcome efficiency(const InteractionRuns& r)
{
    const double ds = efficiency_metrics(r.ds_cfg, r.ds).network_ratio;
    const double cs = efficiency_metrics(r.cs_cfg, r.cs).network_ratio;

    // Idle warm well holding 100 units for 10 steps.
    SimulationConfig c;
    AgentSetup a;
    a.params.aquifer.eta_a = 0.99;
    c.agents = {a};
    SimulationTrace tr;
    tr.agents = 1;
    AgentState x;
    x.v_h = x.v_c = 1000.0;
    x.s_h = 100.0;
    for (int t = 0; t < 10; ++t) {
        StepRecord rec;
        rec.step = t;
        rec.state = x;
        x = step_agent(x, AgentInput{}, DemandPair{}, a.params);
        rec.next = x;
        tr.records.push_back(rec);
    }
    const double sanity = efficiency_metrics(c, tr).agents[0].warm.ratio();
    const double err = std::abs(sanity - std::pow(0.99, 10));
    return {cs >= ds && err <= 1e-9,
            fmt("CS %.6f >= DS %.6f; decay case %.12f, error %.1e (limit 1e-9)", cs, ds, sanity, err)};
}

std::string slurp(const fs::path& p)
{
    std::ifstream f(p, std::ios::binary);
    std::ostringstream s;
    s << f.rdbuf();
    return s.str();
}

// 10
Outcome determinism()
{
    const fs::path out = fs::temp_directory_path() / "atesmpc_acceptance_determinism";
    fs::remove_all(out);
    RunOptions o;
    o.config = (kSource / "configs" / "three_agent.json").string();
    o.duration = 24;
    o.out = out.string();
    o.validate = false;
    const std::vector<std::string> files{"DDS_trace.csv", "DS_trace.csv", "CS_trace.csv", "MCS_trace.csv"};
    std::ostringstream log;
    if (cmd_run(o, log) != kExitOk)
        return {false, "first run failed: " + log.str()};
    std::vector<std::string> first;
    for (const auto& f : files)
        first.push_back(slurp(out / f));
    if (cmd_run(o, log) != kExitOk)
        return {false, "second run failed: " + log.str()};
    int same = 0;
    for (std::size_t k = 0; k < files.size(); ++k)
        same += !first[k].empty() && first[k] == slurp(out / files[k]);
    fs::remove_all(out);
    return {same == 4, fmt("%.0f/4 trace files bit-identical across two runs", same)};
}

} // namespace

int main(int argc, char** argv)
{
    // Optional list of criterion numbers to run, default all.
    std::vector<bool> want(11, argc <= 1);
    for (int k = 1; k < argc; ++k) {
        const int c = std::atoi(argv[k]);
        if (c >= 1 && c <= 10)
            want[c] = true;
    }

    int failed = 0;
    const auto report = [&](int id, const char* name, const std::function<Outcome()>& f) {
        if (!want[id])
            return;
        Outcome o;
        try {
            o = f();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        failed += !o.pass;
        std::cout << (o.pass ? "PASS" : "FAIL") << " [" << id << "] " << name << ": " << o.detail << std::endl;
    };

    report(1, "scenario count", scenario_count_check);
    report(2, "box coverage", box_coverage);
    report(3, "MIQP oracle", miqp_oracle);
    report(4, "condensation", condensation);
    report(5, "imbalance ordering", imbalance_ordering);
    InteractionRuns ir;
    bool have_ir = false;
    const auto need_ir = [&]() {
        if (!have_ir) {
            ir = interaction_runs();
            have_ir = true;
        }
    };
    report(6, "radius ordering", [&]() {
        need_ir();
        return radius_ordering(ir);
    });
    report(7, "anchor identity", anchor_identity);
    report(8, "move blocking", move_blocking);
    report(9, "efficiency ordering", [&]() {
        need_ir();
        return efficiency(ir);
    });
    report(10, "determinism", determinism);
    return failed == 0 ? 0 : 1;
}
