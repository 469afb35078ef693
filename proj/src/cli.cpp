#include "atesmpc/cli.hpp"

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"

#include "atesmpc/config.hpp"
#include "atesmpc/trace_io.hpp"

namespace atesmpc {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

enum class Verbosity { Quiet, Info, Debug };

Verbosity verbosity()
{
    const char* v = std::getenv("ATESMPC_LOG");
    if (!v)
        return Verbosity::Info;
    const std::string s(v);
    if (s == "quiet" || s == "0")
        return Verbosity::Quiet;
    if (s == "debug" || s == "2")
        return Verbosity::Debug;
    return Verbosity::Info;
}

class Log
{
public:
    explicit Log(std::ostream& os) : os_(os), level_(verbosity()) {}
    void info(const std::string& m) const
    {
        if (level_ != Verbosity::Quiet)
            os_ << m << '\n';
    }
    void debug(const std::string& m) const
    {
        if (level_ == Verbosity::Debug)
            os_ << m << '\n';
    }
    void error(const std::string& m) const { os_ << "error: " << m << '\n'; }

private:
    std::ostream& os_;
    Verbosity level_;
};

std::ofstream open_out(const fs::path& p)
{
    std::ofstream f(p, std::ios::binary);
    if (!f)
        throw std::runtime_error("cannot write '" + p.string() + "'");
    return f;
}

void write_json(const fs::path& p, const json& j)
{
    std::ofstream f = open_out(p);
    f << j.dump(2) << '\n';
}

json trace_counts(const SimulationTrace& tr)
{
    int fallback = 0, negative_imbalance = 0, radius_violations = 0;
    std::map<std::string, int> statuses;
    long nodes = 0;
    std::set<int> fallback_steps;
    for (const StepRecord& r : tr.records) {
        if (r.fallback)
            fallback_steps.insert(r.step);
        negative_imbalance += (r.next.x_h < 0.0 || r.next.x_c < 0.0);
        radius_violations += r.radius_margin < 0.0;
        ++statuses[status_name(r.status)];
        nodes += r.nodes;
    }
    fallback = static_cast<int>(fallback_steps.size());
    json j;
    j["steps"] = tr.steps();
    j["fallback_steps"] = fallback;
    j["negative_imbalance_records"] = negative_imbalance;
    j["radius_violation_records"] = radius_violations;
    j["solver_status_records"] = statuses;
    j["nodes"] = nodes;
    return j;
}

int run_guarded(const Log& log, const std::function<int()>& body)
{
    try {
        return body();
    } catch (const ConfigError& e) {
        log.error(e.what());
        return kExitConfig;
    } catch (const ModelError& e) {
        log.error(std::string("model violation: ") + e.what());
        return kExitModel;
    } catch (const SolverLimitError& e) {
        log.error(std::string("solver: ") + e.what());
        return kExitSolver;
    } catch (const SolverError& e) {
        log.error(std::string("solver: ") + e.what());
        return kExitSolver;
    } catch (const std::invalid_argument& e) {
        log.error(e.what());
        return kExitConfig;
    } catch (const std::exception& e) {
        log.error(e.what());
        return kExitUsage;
    }
}

} // namespace

json report_json(const ValidationReport& r)
{
    json j;
    j["mode"] = mode_name(r.mode);
    j["fresh_samples"] = r.fresh_samples;
    j["seed"] = r.seed;
    j["agents"] = json::array();
    for (const AgentViolation& a : r.agents)
        j["agents"].push_back({{"agent", a.agent},
                               {"steps", a.steps},
                               {"eps", a.eps},
                               {"violation_fraction", a.fraction},
                               {"worst_step_fraction", a.worst_step},
                               {"margin", a.margin},
                               {"within_bound", a.within}});
    return j;
}

json efficiency_json(const EfficiencyReport& r)
{
    const auto well = [](const WellBalance& w) {
        return json{{"initial", w.initial},   {"final", w.final},
                    {"injected", w.injected}, {"extracted", w.extracted},
                    {"interaction_loss", w.interaction_loss}, {"ratio", w.ratio()}};
    };
    json j;
    j["network_ratio"] = r.network_ratio;
    j["agents"] = json::array();
    for (const AgentEfficiency& a : r.agents)
        j["agents"].push_back({{"warm", well(a.warm)},
                               {"cold", well(a.cold)},
                               {"production", a.production},
                               {"imports", a.imports},
                               {"startups", a.startups},
                               {"slack_integral", a.slack_integral},
                               {"stage_cost", a.stage_cost}});
    return j;
}

int cmd_run(const RunOptions& opt, std::ostream& os)
{
    const Log log(os);
    return run_guarded(log, [&]() {
        std::ifstream in(opt.config);
        if (!in)
            throw std::runtime_error("cannot open configuration file '" + opt.config + "'");
        json doc;
        try {
            doc = json::parse(in);
        } catch (const json::parse_error& e) {
            throw ConfigError(std::string("configuration is not valid JSON: ") + e.what());
        }
        if (!doc.is_object())
            throw ConfigError("invalid configuration:\n  (root): expected object");
        // Command-line overrides go into the document so the summary echoes them.
        if (!opt.modes.empty())
            doc["modes"] = opt.modes;
        if (opt.duration)
            doc["duration"] = *opt.duration;
        if (opt.seed_override)
            doc["seed"] = *opt.seed_override;
        if (opt.fresh_samples)
            doc["validation"]["fresh_samples"] = *opt.fresh_samples;
        if (opt.out)
            doc["output"]["directory"] = *opt.out;
        const RunConfig rc = parse_run_config(doc);

        const fs::path dir(rc.output_dir);
        fs::create_directories(dir);
        json summary;
        summary["config"] = rc.source;
        summary["seeds"] = {{"run", rc.base.seed}, {"validation", rc.validation_seed}};
        summary["modes"] = json::object();
        summary["timing"] = json::object();

        std::vector<SimulationTrace> traces;
        traces.reserve(rc.modes.size());
        for (Mode m : rc.modes) {
            const SimulationConfig cfg = rc.for_mode(m);
            log.info(std::string("running ") + mode_name(m) + " (" + std::to_string(cfg.duration) +
                     " steps, horizon " + std::to_string(cfg.horizon) + ")");
            traces.push_back(run(cfg, [&](const std::vector<StepRecord>& rs) {
                std::ostringstream line;
                line << mode_name(m) << " step " << rs.front().step << ": " << status_name(rs.front().status)
                     << ", nodes " << rs.front().nodes << (rs.front().fallback ? ", fallback" : "");
                log.debug(line.str());
            }));
            const SimulationTrace& tr = traces.back();
            json entry;
            entry["horizon"] = cfg.horizon;
            entry["blocks"] = tr.schedule.blocks();
            entry["counts"] = trace_counts(tr);
            entry["efficiency"] = efficiency_json(efficiency_metrics(cfg, tr));
            json timing{{"simulate_seconds", tr.solve_seconds}};
            if (rc.writes("csv")) {
                std::ofstream t = open_out(dir / (std::string(mode_name(m)) + "_trace.csv"));
                write_trace_csv(t, tr);
                std::ofstream p = open_out(dir / (std::string(mode_name(m)) + "_plans.csv"));
                write_plans_csv(p, tr);
            }
            if (opt.validate) {
                const auto t0 = std::chrono::steady_clock::now();
                const ValidationReport vr = validate_posteriori(cfg, tr, rc.fresh_samples, rc.validation_seed);
                timing["validate_seconds"] =
                    std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
                entry["validation"] = report_json(vr);
                if (rc.writes("json"))
                    write_json(dir / (std::string(mode_name(m)) + "_validation.json"), report_json(vr));
            }
            summary["modes"][mode_name(m)] = entry;
            summary["timing"][mode_name(m)] = timing;
            log.debug(entry.dump());
        }
        if (rc.writes("csv")) {
            std::vector<const SimulationTrace*> ptrs;
            for (const auto& t : traces)
                ptrs.push_back(&t);
            std::ofstream a = open_out(dir / "series_imbalance.csv");
            write_imbalance_series(a, ptrs);
            std::ofstream b = open_out(dir / "series_radius.csv");
            write_radius_series(b, rc.base, ptrs);
        }
        if (rc.writes("json"))
            write_json(dir / "summary.json", summary);
        log.info("wrote results to " + dir.string());
        return static_cast<int>(kExitOk);
    });
}

int cmd_validate(const ValidateOptions& opt, std::ostream& os)
{
    const Log log(os);
    return run_guarded(log, [&]() {
        const fs::path trace_path(opt.trace);
        const std::string fname = trace_path.filename().string();
        const std::string suffix = "_trace.csv";
        std::string mode_text;
        if (opt.mode)
            mode_text = *opt.mode;
        else if (fname.size() > suffix.size() && fname.compare(fname.size() - suffix.size(), suffix.size(), suffix) == 0)
            mode_text = fname.substr(0, fname.size() - suffix.size());
        else
            throw std::runtime_error("cannot infer the mode from '" + fname + "'; pass --mode");
        const Mode mode = parse_mode(mode_text);

        const fs::path cfg_path =
            opt.config.empty() ? trace_path.parent_path() / "summary.json" : fs::path(opt.config);
        std::ifstream cin(cfg_path);
        if (!cin)
            throw std::runtime_error("cannot open '" + cfg_path.string() + "'");
        json doc;
        try {
            doc = json::parse(cin);
        } catch (const json::parse_error& e) {
            throw ConfigError(std::string("not valid JSON: ") + e.what());
        }
        if (doc.is_object() && doc.contains("config") && doc.contains("modes"))
            doc = doc["config"];
        if (opt.fresh_samples)
            doc["validation"]["fresh_samples"] = *opt.fresh_samples;
        if (opt.seed_override)
            doc["validation"]["seed"] = *opt.seed_override;
        const RunConfig rc = parse_run_config(doc);
        const SimulationConfig cfg = rc.for_mode(mode);

        fs::path plans_path = trace_path;
        plans_path.replace_filename(mode_text + "_plans.csv");
        std::ifstream tin(trace_path), pin(plans_path);
        if (!tin || !pin)
            throw std::runtime_error("cannot open '" + trace_path.string() + "' and '" + plans_path.string() + "'");
        SimulationTrace tr;
        try {
            tr = read_trace_csv(tin, pin, mode, static_cast<int>(cfg.agents.size()), cfg.schedule());
        } catch (const std::invalid_argument& e) {
            throw ConfigError(std::string("trace does not match the configuration: ") + e.what());
        }
        const ValidationReport vr = validate_posteriori(cfg, tr, rc.fresh_samples, rc.validation_seed);
        const fs::path dir = opt.out ? fs::path(*opt.out) : trace_path.parent_path();
        if (!dir.empty())
            fs::create_directories(dir);
        write_json(dir / (mode_text + "_validation.json"), report_json(vr));
        for (const AgentViolation& a : vr.agents)
            log.info(mode_text + " agent " + std::to_string(a.agent) + ": violation " +
                     std::to_string(a.fraction) + " (eps " + std::to_string(a.eps) + ")");
        return static_cast<int>(kExitOk);
    });
}

int cli_main(int argc, char** argv)
{
    CLI::App app{"Stochastic MPC simulator for aquifer thermal energy storage networks"};
    app.require_subcommand(1);

    RunOptions ro;
    int duration = 0;
    std::string out;
    std::uint64_t seed = 0;
    int fresh = 0;
    bool no_validate = false;
    CLI::App* run_cmd = app.add_subcommand("run", "simulate the configured modes and write traces");
    run_cmd->add_option("--config", ro.config, "run configuration (JSON)")->required();
    run_cmd->add_option("--modes", ro.modes, "subset of DDS, DS, CS, MCS")->delimiter(',');
    auto* dur_opt = run_cmd->add_option("--duration", duration, "number of closed-loop steps");
    auto* out_opt = run_cmd->add_option("--out", out, "output directory");
    auto* seed_opt = run_cmd->add_option("--seed-override", seed, "replace the run seed");
    auto* fresh_opt = run_cmd->add_option("--fresh-samples", fresh, "validation draws per step");
    run_cmd->add_flag("--no-validate", no_validate, "skip the Monte Carlo validation");

    ValidateOptions vo;
    std::string vout, vmode;
    std::uint64_t vseed = 0;
    int vfresh = 0;
    CLI::App* val_cmd = app.add_subcommand("validate", "re-validate a trace with fresh draws");
    val_cmd->add_option("--trace", vo.trace, "<MODE>_trace.csv written by run")->required();
    val_cmd->add_option("--config", vo.config, "configuration or summary.json");
    auto* vmode_opt = val_cmd->add_option("--mode", vmode, "mode of the trace");
    auto* vfresh_opt = val_cmd->add_option("--fresh-samples", vfresh, "validation draws per step");
    auto* vseed_opt = val_cmd->add_option("--seed-override", vseed, "replace the validation seed");
    auto* vout_opt = val_cmd->add_option("--out", vout, "output directory");

    CLI::App* schema_cmd = app.add_subcommand("schema", "print the configuration schema");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kExitOk : kExitUsage;
    }

    if (*run_cmd) {
        if (*dur_opt)
            ro.duration = duration;
        if (*out_opt)
            ro.out = out;
        if (*seed_opt)
            ro.seed_override = seed;
        if (*fresh_opt)
            ro.fresh_samples = fresh;
        ro.validate = !no_validate;
        return cmd_run(ro, std::cerr);
    }
    if (*val_cmd) {
        if (*vmode_opt)
            vo.mode = vmode;
        if (*vfresh_opt)
            vo.fresh_samples = vfresh;
        if (*vseed_opt)
            vo.seed_override = vseed;
        if (*vout_opt)
            vo.out = vout;
        return cmd_validate(vo, std::cerr);
    }
    if (*schema_cmd) {
        std::cout << config_schema().dump(2) << '\n';
        return kExitOk;
    }
    return kExitUsage;
}

} // namespace atesmpc
