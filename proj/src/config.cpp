#include "atesmpc/config.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "atesmpc/format.hpp"

namespace atesmpc {

using nlohmann::json;

namespace {

const char* const kSchemaText = R"({
  "$schema": "http://json-schema.org/draft-07/schema#",
  "title": "atesmpc run configuration",
  "type": "object",
  "additionalProperties": false,
  "required": ["seed", "agents", "validation"],
  "definitions": {
    "probability": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
    "nonneg": {"type": "number", "minimum": 0},
    "positive": {"type": "number", "exclusiveMinimum": 0},
    "mode": {"type": "string", "enum": ["DDS", "DS", "CS", "MCS"]},
    "horizon": {"type": "integer", "minimum": 1},
    "aquifer": {
      "type": "object", "additionalProperties": false,
      "properties": {
        "eta_a": {"$ref": "#/definitions/probability"},
        "c_w": {"$ref": "#/definitions/positive"},
        "c_sand": {"$ref": "#/definitions/positive"},
        "n_p": {"type": "number", "minimum": 0, "maximum": 1},
        "ell": {"$ref": "#/definitions/positive"},
        "t_h": {"type": "number"},
        "t_c": {"type": "number"},
        "t_amb": {"type": "number"},
        "s_bar": {"$ref": "#/definitions/nonneg"}
      }
    },
    "bounds": {
      "type": "object", "additionalProperties": false,
      "properties": {
        "h_b_min": {"$ref": "#/definitions/nonneg"}, "h_b_max": {"$ref": "#/definitions/nonneg"},
        "c_ch_min": {"$ref": "#/definitions/nonneg"}, "c_ch_max": {"$ref": "#/definitions/nonneg"},
        "h_im_min": {"$ref": "#/definitions/nonneg"}, "h_im_max": {"$ref": "#/definitions/nonneg"},
        "c_im_min": {"$ref": "#/definitions/nonneg"}, "c_im_max": {"$ref": "#/definitions/nonneg"},
        "u_a_min": {"$ref": "#/definitions/nonneg"}, "u_a_max": {"$ref": "#/definitions/nonneg"}
      }
    },
    "demand": {
      "type": "object", "additionalProperties": false,
      "properties": {
        "gain": {"$ref": "#/definitions/positive"},
        "t_des": {"type": "number"},
        "t_mean": {"type": "number"},
        "seasonal_amp": {"type": "number"},
        "daily_amp": {"type": "number"},
        "seasonal_peak": {"type": "number"},
        "daily_peak": {"type": "number"}
      }
    },
    "state": {
      "type": "object", "additionalProperties": false,
      "required": ["v_h", "v_c", "s_h", "s_c"],
      "properties": {
        "x_h": {"type": "number"}, "x_c": {"type": "number"},
        "v_h": {"$ref": "#/definitions/nonneg"}, "v_c": {"$ref": "#/definitions/nonneg"},
        "s_h": {"type": "number"}, "s_c": {"type": "number"}
      }
    },
    "neighbor": {
      "type": "object", "additionalProperties": false,
      "required": ["agent", "distance"],
      "properties": {
        "agent": {"type": "integer", "minimum": 0},
        "distance": {"$ref": "#/definitions/positive"},
        "eps_common": {"$ref": "#/definitions/probability"}
      }
    },
    "agent": {
      "type": "object", "additionalProperties": false,
      "required": ["initial"],
      "properties": {
        "name": {"type": "string"},
        "aquifer": {"$ref": "#/definitions/aquifer"},
        "eta_s_h": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
        "eta_s_c": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
        "cop": {"type": "number", "exclusiveMinimum": 1},
        "bounds": {"$ref": "#/definitions/bounds"},
        "lambda_su": {"type": "array", "items": {"$ref": "#/definitions/nonneg"}, "minItems": 2, "maxItems": 2},
        "cost_r": {"type": "array", "items": {"$ref": "#/definitions/nonneg"}, "minItems": 9, "maxItems": 9},
        "weight_qh": {"$ref": "#/definitions/nonneg"},
        "weight_qc": {"$ref": "#/definitions/nonneg"},
        "eps_private": {"$ref": "#/definitions/probability"},
        "neighbors": {"type": "array", "items": {"$ref": "#/definitions/neighbor"}},
        "demand": {"$ref": "#/definitions/demand"},
        "initial": {"$ref": "#/definitions/state"}
      }
    },
    "tier": {
      "type": "object", "additionalProperties": false,
      "required": ["start", "period"],
      "properties": {
        "start": {"type": "integer", "minimum": 0},
        "end": {"type": "integer", "minimum": -1},
        "period": {"type": "integer", "minimum": 1}
      }
    }
  },
  "properties": {
    "seed": {"type": "integer", "minimum": 0},
    "modes": {"type": "array", "items": {"$ref": "#/definitions/mode"}, "minItems": 1, "uniqueItems": true},
    "duration": {"type": "integer", "minimum": 1},
    "horizon": {
      "oneOf": [
        {"$ref": "#/definitions/horizon"},
        {"type": "object", "additionalProperties": false,
         "properties": {"DDS": {"$ref": "#/definitions/horizon"}, "DS": {"$ref": "#/definitions/horizon"},
                        "CS": {"$ref": "#/definitions/horizon"}, "MCS": {"$ref": "#/definitions/horizon"}}}
      ]
    },
    "start_hour": {"type": "number"},
    "blocking": {
      "type": "object", "additionalProperties": false,
      "properties": {
        "tiers": {"type": "array", "items": {"$ref": "#/definitions/tier"}},
        "hold": {"type": "boolean"}
      }
    },
    "uncertainty": {
      "type": "object", "additionalProperties": false,
      "properties": {
        "demand_spread": {"type": "number", "minimum": 0, "exclusiveMaximum": 1},
        "scenario_spread": {"type": "number", "minimum": 0, "exclusiveMaximum": 1},
        "common_spread": {"type": "number", "minimum": 0, "exclusiveMaximum": 1},
        "beta": {"$ref": "#/definitions/probability"},
        "cost_samples": {"type": "integer", "minimum": 1}
      }
    },
    "solver": {
      "type": "object", "additionalProperties": false,
      "properties": {
        "rel_gap": {"$ref": "#/definitions/nonneg"},
        "abs_gap": {"$ref": "#/definitions/nonneg"},
        "max_nodes": {"type": "integer", "minimum": 1},
        "time_limit": {"$ref": "#/definitions/nonneg"}
      }
    },
    "fallback_penalty": {"$ref": "#/definitions/positive"},
    "interaction_loss": {"type": "number", "minimum": 0, "maximum": 1},
    "validation": {
      "type": "object", "additionalProperties": false,
      "required": ["seed"],
      "properties": {
        "fresh_samples": {"type": "integer", "minimum": 1},
        "seed": {"type": "integer", "minimum": 0}
      }
    },
    "output": {
      "type": "object", "additionalProperties": false,
      "properties": {
        "directory": {"type": "string", "minLength": 1},
        "formats": {"type": "array", "items": {"type": "string", "enum": ["csv", "json"]}, "minItems": 1,
                    "uniqueItems": true}
      }
    },
    "agents": {"type": "array", "items": {"$ref": "#/definitions/agent"}, "minItems": 1}
  }
})";

std::string num(const json& v)
{
    return v.is_number() ? format_double(v.get<double>()) : v.dump();
}

bool has_type(const json& v, const std::string& t)
{
    if (t == "object")
        return v.is_object();
    if (t == "array")
        return v.is_array();
    if (t == "string")
        return v.is_string();
    if (t == "boolean")
        return v.is_boolean();
    if (t == "integer")
        return v.is_number_integer() ||
               (v.is_number_float() && std::floor(v.get<double>()) == v.get<double>());
    if (t == "number")
        return v.is_number();
    if (t == "null")
        return v.is_null();
    return false;
}

class Validator
{
public:
    explicit Validator(const json& root) : root_(root) {}

    void check(const json& v, const json& s, const std::string& path, std::vector<std::string>& err) const
    {
        if (s.contains("$ref")) {
            check(v, resolve(s["$ref"].get<std::string>()), path, err);
            return;
        }
        const std::string where = path.empty() ? "(root)" : path;
        if (s.contains("oneOf")) {
            int matches = 0;
            std::vector<std::string> first;
            for (const json& alt : s["oneOf"]) {
                std::vector<std::string> e;
                check(v, alt, path, e);
                if (e.empty())
                    ++matches;
                else if (first.empty())
                    first = e;
            }
            if (matches != 1)
                err.push_back(where + ": does not match exactly one allowed form" +
                              (first.empty() ? std::string() : " (" + first.front() + ")"));
            return;
        }
        if (s.contains("type") && !has_type(v, s["type"].get<std::string>())) {
            err.push_back(where + ": expected " + s["type"].get<std::string>() + ", got " + v.dump());
            return;
        }
        if (s.contains("enum")) {
            bool found = false;
            for (const json& e : s["enum"])
                found = found || e == v;
            if (!found)
                err.push_back(where + ": " + v.dump() + " is not one of " + s["enum"].dump());
        }
        if (v.is_number()) {
            const double x = v.get<double>();
            if (s.contains("minimum") && x < s["minimum"].get<double>())
                err.push_back(where + ": " + num(v) + " is below the minimum " + num(s["minimum"]));
            if (s.contains("maximum") && x > s["maximum"].get<double>())
                err.push_back(where + ": " + num(v) + " exceeds the maximum " + num(s["maximum"]));
            if (s.contains("exclusiveMinimum") && !(x > s["exclusiveMinimum"].get<double>()))
                err.push_back(where + ": " + num(v) + " must be greater than " + num(s["exclusiveMinimum"]));
            if (s.contains("exclusiveMaximum") && !(x < s["exclusiveMaximum"].get<double>()))
                err.push_back(where + ": " + num(v) + " must be less than " + num(s["exclusiveMaximum"]));
        }
        if (v.is_string() && s.contains("minLength") &&
            v.get<std::string>().size() < s["minLength"].get<std::size_t>())
            err.push_back(where + ": string is too short");
        if (v.is_array()) {
            if (s.contains("minItems") && v.size() < s["minItems"].get<std::size_t>())
                err.push_back(where + ": needs at least " + s["minItems"].dump() + " items");
            if (s.contains("maxItems") && v.size() > s["maxItems"].get<std::size_t>())
                err.push_back(where + ": allows at most " + s["maxItems"].dump() + " items");
            if (s.value("uniqueItems", false))
                for (std::size_t a = 0; a < v.size(); ++a)
                    for (std::size_t b = a + 1; b < v.size(); ++b)
                        if (v[a] == v[b])
                            err.push_back(where + ": duplicate item " + v[a].dump());
            if (s.contains("items"))
                for (std::size_t k = 0; k < v.size(); ++k)
                    check(v[k], s["items"], path + "[" + std::to_string(k) + "]", err);
        }
        if (v.is_object()) {
            const json props = s.value("properties", json::object());
            if (s.contains("required"))
                for (const json& r : s["required"])
                    if (!v.contains(r.get<std::string>()))
                        err.push_back(join(path, r.get<std::string>()) + ": required field is missing");
            for (auto it = v.begin(); it != v.end(); ++it) {
                if (props.contains(it.key()))
                    check(it.value(), props[it.key()], join(path, it.key()), err);
                else if (s.contains("additionalProperties") && s["additionalProperties"] == false)
                    err.push_back(join(path, it.key()) + ": unknown field");
            }
        }
    }

private:
    static std::string join(const std::string& path, const std::string& key)
    {
        return path.empty() ? key : path + "." + key;
    }

    const json& resolve(const std::string& ref) const
    {
        const std::string prefix = "#/definitions/";
        if (ref.rfind(prefix, 0) != 0)
            throw std::logic_error("unsupported schema reference " + ref);
        return root_.at("definitions").at(ref.substr(prefix.size()));
    }

    const json& root_;
};

template <typename T>
void take(const json& obj, const char* key, T& out)
{
    if (obj.contains(key))
        out = obj[key].get<T>();
}

AgentSetup parse_agent(const json& a, int index)
{
    AgentSetup s;
    s.name = a.value("name", "agent" + std::to_string(index));
    AgentParams& p = s.params;
    if (a.contains("aquifer")) {
        const json& q = a["aquifer"];
        take(q, "eta_a", p.aquifer.eta_a);
        take(q, "c_w", p.aquifer.c_w);
        take(q, "c_sand", p.aquifer.c_sand);
        take(q, "n_p", p.aquifer.n_p);
        take(q, "ell", p.aquifer.ell);
        take(q, "t_h", p.aquifer.t_h);
        take(q, "t_c", p.aquifer.t_c);
        take(q, "t_amb", p.aquifer.t_amb);
    }
    take(a, "eta_s_h", p.eta_s_h);
    take(a, "eta_s_c", p.eta_s_c);
    take(a, "cop", p.cop);
    if (a.contains("bounds")) {
        const json& b = a["bounds"];
        take(b, "h_b_min", p.bounds.h_b_min);
        take(b, "h_b_max", p.bounds.h_b_max);
        take(b, "c_ch_min", p.bounds.c_ch_min);
        take(b, "c_ch_max", p.bounds.c_ch_max);
        take(b, "h_im_min", p.bounds.h_im_min);
        take(b, "h_im_max", p.bounds.h_im_max);
        take(b, "c_im_min", p.bounds.c_im_min);
        take(b, "c_im_max", p.bounds.c_im_max);
        take(b, "u_a_min", p.bounds.u_a_min);
        take(b, "u_a_max", p.bounds.u_a_max);
    }
    if (a.contains("lambda_su"))
        for (int k = 0; k < 2; ++k)
            p.lambda_su[k] = a["lambda_su"][k].get<double>();
    if (a.contains("cost_r"))
        for (int k = 0; k < kInputDim; ++k)
            p.cost_r[k] = a["cost_r"][k].get<double>();
    take(a, "weight_qh", p.weight_qh);
    take(a, "weight_qc", p.weight_qc);
    take(a, "eps_private", p.eps_private);
    if (a.contains("neighbors"))
        for (const json& n : a["neighbors"]) {
            Neighbor nb;
            nb.agent = n["agent"].get<int>();
            nb.distance = n["distance"].get<double>();
            take(n, "eps_common", nb.eps_common);
            p.neighbors.push_back(nb);
        }
    if (a.contains("demand")) {
        const json& d = a["demand"];
        take(d, "gain", s.demand.gain);
        take(d, "t_des", s.demand.t_des);
        take(d, "t_mean", s.demand.t_mean);
        take(d, "seasonal_amp", s.demand.seasonal_amp);
        take(d, "daily_amp", s.demand.daily_amp);
        take(d, "seasonal_peak", s.demand.seasonal_peak);
        take(d, "daily_peak", s.demand.daily_peak);
    }
    const json& x = a["initial"];
    take(x, "x_h", s.initial.x_h);
    take(x, "x_c", s.initial.x_c);
    take(x, "v_h", s.initial.v_h);
    take(x, "v_c", s.initial.v_c);
    take(x, "s_h", s.initial.s_h);
    take(x, "s_c", s.initial.s_c);
    // The balance reference defaults to the initial total content.
    p.aquifer.s_bar = s.initial.s_h + s.initial.s_c;
    if (a.contains("aquifer"))
        take(a["aquifer"], "s_bar", p.aquifer.s_bar);
    return s;
}

} // namespace

const json& config_schema()
{
    static const json schema = json::parse(kSchemaText);
    return schema;
}

std::vector<std::string> schema_errors(const json& doc, const json& schema)
{
    std::vector<std::string> err;
    Validator(schema).check(doc, schema, "", err);
    return err;
}

SimulationConfig RunConfig::for_mode(Mode m) const
{
    SimulationConfig c = base;
    c.mode = m;
    c.horizon = horizons.at(m);
    return c;
}

bool RunConfig::writes(const std::string& format) const
{
    for (const auto& f : formats)
        if (f == format)
            return true;
    return false;
}

RunConfig parse_run_config(const json& doc)
{
    const std::vector<std::string> err = schema_errors(doc, config_schema());
    if (!err.empty()) {
        std::ostringstream os;
        os << "invalid configuration:";
        for (const auto& e : err)
            os << "\n  " << e;
        throw ConfigError(os.str());
    }

    RunConfig rc;
    rc.source = doc;
    SimulationConfig& c = rc.base;
    c.seed = doc["seed"].get<std::uint64_t>();
    take(doc, "duration", c.duration);
    take(doc, "start_hour", c.start_hour);
    if (doc.contains("blocking")) {
        const json& b = doc["blocking"];
        take(b, "hold", c.hold);
        if (b.contains("tiers"))
            for (const json& t : b["tiers"])
                c.tiers.push_back({t["start"].get<int>(), t.value("end", -1), t["period"].get<int>()});
    }
    if (doc.contains("uncertainty")) {
        const json& u = doc["uncertainty"];
        take(u, "demand_spread", c.demand_spread);
        take(u, "scenario_spread", c.scenario_spread);
        take(u, "common_spread", c.common_spread);
        take(u, "beta", c.beta);
        take(u, "cost_samples", c.cost_samples);
    }
    if (doc.contains("solver")) {
        const json& s = doc["solver"];
        take(s, "rel_gap", c.limits.rel_gap);
        take(s, "abs_gap", c.limits.abs_gap);
        take(s, "max_nodes", c.limits.max_nodes);
        take(s, "time_limit", c.limits.time_limit);
    }
    take(doc, "fallback_penalty", c.fallback_penalty);
    take(doc, "interaction_loss", c.interaction_loss);
    for (std::size_t i = 0; i < doc["agents"].size(); ++i)
        c.agents.push_back(parse_agent(doc["agents"][i], static_cast<int>(i)));

    rc.modes = {Mode::DDS, Mode::DS, Mode::CS, Mode::MCS};
    if (doc.contains("modes")) {
        rc.modes.clear();
        for (const json& m : doc["modes"])
            rc.modes.push_back(parse_mode(m.get<std::string>()));
    }
    for (Mode m : {Mode::DDS, Mode::DS, Mode::CS, Mode::MCS})
        rc.horizons[m] = m == Mode::MCS ? 168 : 24;
    if (doc.contains("horizon")) {
        const json& h = doc["horizon"];
        if (h.is_number())
            for (auto& [m, v] : rc.horizons)
                v = h.get<int>();
        else
            for (auto it = h.begin(); it != h.end(); ++it)
                rc.horizons[parse_mode(it.key())] = it.value().get<int>();
    }
    rc.validation_seed = doc["validation"]["seed"].get<std::uint64_t>();
    take(doc["validation"], "fresh_samples", rc.fresh_samples);
    if (rc.validation_seed == c.seed)
        throw ConfigError("invalid configuration:\n  validation.seed: must differ from seed");
    if (doc.contains("output")) {
        take(doc["output"], "directory", rc.output_dir);
        take(doc["output"], "formats", rc.formats);
    }

    for (Mode m : rc.modes) {
        try {
            rc.for_mode(m).validate();
        } catch (const std::invalid_argument& e) {
            throw ConfigError(std::string("invalid configuration (") + mode_name(m) + "):\n  " + e.what());
        }
    }
    return rc;
}

RunConfig load_run_config(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("cannot open configuration file '" + path + "'");
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("configuration is not valid JSON: ") + e.what());
    }
    return parse_run_config(doc);
}

} // namespace atesmpc
