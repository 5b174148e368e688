#include "gnsfde/config.hpp"

#include <json.hpp>

#include <fstream>
#include <set>
#include <sstream>

namespace gnsfde {

namespace {

using nlohmann::json;

void reject_unknown_keys(const json& obj, const std::set<std::string>& allowed,
                         const std::string& where) {
    for (const auto& [key, _] : obj.items())
        if (!allowed.count(key))
            throw ConfigError("unknown key \"" + key + "\" in " + where);
}

template <typename T>
T require(const json& obj, const std::string& key, const std::string& where) {
    if (!obj.contains(key)) throw ConfigError("missing key \"" + key + "\" in " + where);
    try {
        return obj.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError("bad value for \"" + key + "\" in " + where + ": " + e.what());
    }
}

template <typename T>
T optional_or(const json& obj, const std::string& key, const std::string& where, T fallback) {
    if (!obj.contains(key)) return fallback;
    try {
        return obj.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError("bad value for \"" + key + "\" in " + where + ": " + e.what());
    }
}

SystemConfig parse_system(const json& obj, const std::string& where) {
    reject_unknown_keys(obj, {"drift", "h", "sigma", "neutral", "kappa"}, where);
    SystemConfig sys;
    sys.drift = require<std::vector<std::string>>(obj, "drift", where);
    sys.h = require<std::vector<std::vector<std::string>>>(obj, "h", where);
    sys.sigma = require<std::vector<std::vector<std::string>>>(obj, "sigma", where);
    sys.neutral = require<std::vector<std::string>>(obj, "neutral", where);
    sys.kappa = require<double>(obj, "kappa", where);
    return sys;
}

} // namespace

ExperimentConfig parse_config(const std::string& json_text) {
    json root;
    try {
        root = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    if (!root.is_object()) throw ConfigError("config root must be a JSON object");

    reject_unknown_keys(root,
                        {"scenario", "bounds", "grid", "system_a", "system_b", "init_a", "init_b",
                         "controls", "n_samples", "master_seed", "tol_policy", "outputs",
                         "capacity_threshold", "check_conditions", "k_declared", "functional",
                         "sampler"},
                        "config");

    ExperimentConfig cfg;
    cfg.scenario = optional_or<std::string>(root, "scenario", "config", "");

    {
        const json& b = root.contains("bounds") ? root.at("bounds")
                                                : throw ConfigError("missing key \"bounds\"");
        reject_unknown_keys(b, {"sigma_low", "sigma_high", "m"}, "bounds");
        cfg.sigma_low = require<double>(b, "sigma_low", "bounds");
        cfg.sigma_high = require<double>(b, "sigma_high", "bounds");
        cfg.m = require<int>(b, "m", "bounds");
    }
    {
        const json& g = root.contains("grid") ? root.at("grid")
                                              : throw ConfigError("missing key \"grid\"");
        reject_unknown_keys(g, {"dt", "T", "r0"}, "grid");
        cfg.dt = require<double>(g, "dt", "grid");
        cfg.horizon = require<double>(g, "T", "grid");
        cfg.r0 = optional_or<double>(g, "r0", "grid", 0.0);
    }
    cfg.system_a = parse_system(require<json>(root, "system_a", "config"), "system_a");
    cfg.system_b = parse_system(require<json>(root, "system_b", "config"), "system_b");
    cfg.d = static_cast<int>(cfg.system_a.drift.size());
    cfg.init_a = require<std::vector<std::string>>(root, "init_a", "config");
    cfg.init_b = require<std::vector<std::string>>(root, "init_b", "config");

    if (root.contains("controls")) {
        const json& c = root.at("controls");
        reject_unknown_keys(c, {"constant_grid", "bang_bang", "switch_prob", "seed_base"},
                            "controls");
        cfg.controls.constant_grid = optional_or<int>(c, "constant_grid", "controls", 16);
        cfg.controls.bang_bang = optional_or<int>(c, "bang_bang", "controls", 16);
        cfg.controls.switch_prob = optional_or<double>(c, "switch_prob", "controls", 0.5);
        cfg.controls.seed_base = optional_or<std::uint64_t>(c, "seed_base", "controls", 0);
    }

    cfg.n_samples = optional_or<long>(root, "n_samples", "config", 1000);
    cfg.master_seed = optional_or<std::uint64_t>(root, "master_seed", "config", 0);

    if (root.contains("tol_policy")) {
        const json& t = root.at("tol_policy");
        reject_unknown_keys(t, {"c", "scale_mode"}, "tol_policy");
        cfg.tol.c = optional_or<double>(t, "c", "tol_policy", 5.0);
        const std::string mode =
            optional_or<std::string>(t, "scale_mode", "tol_policy", "running_sup");
        if (mode == "running_sup")
            cfg.tol.scale_mode = TolerancePolicy::ScaleMode::running_sup;
        else if (mode == "unit")
            cfg.tol.scale_mode = TolerancePolicy::ScaleMode::unit;
        else
            throw ConfigError("tol_policy.scale_mode must be \"running_sup\" or \"unit\"");
    }

    if (root.contains("outputs")) {
        const json& o = root.at("outputs");
        reject_unknown_keys(o, {"dir", "formats"}, "outputs");
        cfg.outputs.dir = optional_or<std::string>(o, "dir", "outputs", "out");
        if (o.contains("formats")) {
            cfg.outputs.json = false;
            cfg.outputs.csv = false;
            for (const std::string f : o.at("formats")) {
                if (f == "json")
                    cfg.outputs.json = true;
                else if (f == "csv")
                    cfg.outputs.csv = true;
                else
                    throw ConfigError("outputs.formats entries must be \"json\" or \"csv\"");
            }
        }
    }

    cfg.capacity_threshold = optional_or<double>(root, "capacity_threshold", "config", 0.0);
    cfg.check_conditions = optional_or<std::vector<std::string>>(
        root, "check_conditions", "config", {"H1", "H2", "H3", "H4", "A1", "A2"});
    if (root.contains("k_declared")) cfg.k_declared = require<double>(root, "k_declared", "config");

    if (root.contains("functional")) {
        const json& f = root.at("functional");
        reject_unknown_keys(f, {"id", "component"}, "functional");
        FunctionalConfig fc;
        fc.id = require<std::string>(f, "id", "functional");
        fc.component = optional_or<int>(f, "component", "functional", 1);
        static const std::set<std::string> known{"terminal", "terminal_square", "qv_terminal",
                                                 "running_max", "y_terminal"};
        if (!known.count(fc.id)) throw ConfigError("unknown functional id \"" + fc.id + "\"");
        cfg.functional = fc;
    }

    if (root.contains("sampler")) {
        const json& s = root.at("sampler");
        reject_unknown_keys(s, {"n_pairs", "amplitude", "seed"}, "sampler");
        cfg.sampler.n_pairs = optional_or<long>(s, "n_pairs", "sampler", 200);
        cfg.sampler.amplitude = optional_or<double>(s, "amplitude", "sampler", 1.0);
        cfg.sampler.seed = optional_or<std::uint64_t>(s, "seed", "sampler", 0);
    }

    // Shape validation beyond plain types.
    const auto check_system = [&](const SystemConfig& sys, const std::string& where) {
        const std::size_t d = static_cast<std::size_t>(cfg.d);
        const std::size_t m = static_cast<std::size_t>(cfg.m);
        if (sys.drift.size() != d || sys.neutral.size() != d || sys.h.size() != d ||
            sys.sigma.size() != d)
            throw ConfigError(where + ": drift, h, sigma, neutral must all have d entries");
        for (const auto& row : sys.sigma)
            if (row.size() != m) throw ConfigError(where + ": sigma rows must have m entries");
        for (const auto& hm : sys.h)
            if (hm.size() != m * m)
                throw ConfigError(where + ": h entries must be flattened m x m matrices");
        if (!(sys.kappa >= 0.0 && sys.kappa < 1.0))
            throw ConfigError(where + ": kappa must lie in [0, 1)");
    };
    check_system(cfg.system_a, "system_a");
    check_system(cfg.system_b, "system_b");
    if (cfg.init_a.size() != static_cast<std::size_t>(cfg.d) ||
        cfg.init_b.size() != static_cast<std::size_t>(cfg.d))
        throw ConfigError("init_a and init_b must have d entries");
    if (cfg.n_samples < 1) throw ConfigError("n_samples must be >= 1");
    return cfg;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

CoefficientSystem build_system(const ExperimentConfig& cfg, const SystemConfig& sys) {
    const int d = cfg.d;
    const int m = cfg.m;
    std::vector<Expr> drift, diffusion, neutral;
    std::vector<std::vector<Expr>> h_upper;
    for (const std::string& s : sys.drift) drift.push_back(Expr::parse(s));
    for (const std::string& s : sys.neutral) neutral.push_back(Expr::parse(s));
    for (const auto& row : sys.sigma)
        for (const std::string& s : row) diffusion.push_back(Expr::parse(s));
    for (int i = 0; i < d; ++i) {
        const auto& flat = sys.h[static_cast<std::size_t>(i)];
        // Symmetry of the textual matrix is part of the schema.
        for (int j = 0; j < m; ++j)
            for (int l = j + 1; l < m; ++l)
                if (flat[static_cast<std::size_t>(j) * m + l] !=
                    flat[static_cast<std::size_t>(l) * m + j])
                    throw ConfigError("h matrix for component " + std::to_string(i + 1) +
                                      " is not symmetric");
        std::vector<Expr> upper;
        for (int j = 0; j < m; ++j)
            for (int l = j; l < m; ++l)
                upper.push_back(Expr::parse(flat[static_cast<std::size_t>(j) * m + l]));
        h_upper.push_back(std::move(upper));
    }
    return CoefficientSystem(d, cfg.bounds(), cfg.r0, cfg.dt, std::move(drift),
                             std::move(h_upper), std::move(diffusion), std::move(neutral),
                             sys.kappa);
}

Segment build_initial_segment(const ExperimentConfig& cfg,
                              const std::vector<std::string>& exprs) {
    const TimeGrid grid = cfg.grid();
    Segment seg;
    seg.d = cfg.d;
    seg.delay_steps = grid.delay_steps;
    seg.dt = grid.dt;
    seg.values.resize(static_cast<std::size_t>(grid.delay_steps + 1) * cfg.d);
    CompiledExpr::Binding binding;
    binding.d = cfg.d;
    binding.delay_steps = grid.delay_steps;
    binding.dt = grid.dt;
    binding.allow_segment_reads = false;
    binding.allow_neutral_reads = false;
    for (int i = 0; i < cfg.d; ++i) {
        const CompiledExpr ce =
            CompiledExpr::compile(Expr::parse(exprs[static_cast<std::size_t>(i)]), binding);
        for (long l = 0; l <= grid.delay_steps; ++l) {
            EvalContext ctx;
            ctx.t = grid.time(l - grid.delay_steps);
            seg.at(l, i) = ce.eval(ctx);
        }
    }
    require_finite(seg);
    return seg;
}

ControlFamily build_family(const ExperimentConfig& cfg) {
    const GBounds bounds = cfg.bounds();
    const TimeGrid grid = cfg.grid();
    ControlFamily fam;
    if (cfg.controls.constant_grid > 0)
        fam = constant_grid_family(bounds, cfg.controls.constant_grid);
    for (int k = 0; k < cfg.controls.bang_bang; ++k)
        fam.members.push_back(bang_bang_control(
            grid, cfg.controls.seed_base + static_cast<std::uint64_t>(k), bounds,
            cfg.controls.switch_prob));
    if (fam.members.empty()) throw ConfigError("control family is empty");
    return fam;
}

std::string order_report_to_json(const OrderReport& report) {
    json per_control = json::array();
    for (std::size_t c = 0; c < report.violation_freq.size(); ++c) {
        per_control.push_back({{"label", report.control_labels[c]},
                               {"violation_freq", report.violation_freq[c]},
                               {"wilson_low", report.violation_wilson[c].low},
                               {"wilson_high", report.violation_wilson[c].high}});
    }
    const json j = {{"scenario", report.scenario},
                    {"tol_c", report.tol_c},
                    {"scale_mode", report.scale_mode},
                    {"kappa", report.kappa},
                    {"n_samples", report.n_samples},
                    {"capacity", report.capacity},
                    {"solver_failures", report.solver_failures},
                    {"max_excess_n", report.max_excess_n},
                    {"max_excess_raw", report.max_excess_raw},
                    {"max_final_tol_n", report.max_final_tol_n},
                    {"per_control", per_control}};
    return j.dump(2) + "\n";
}

std::string gexp_estimate_to_json(const GExpEstimate& estimate,
                                  const std::string& functional_id) {
    json per_control = json::array();
    for (const ControlStats& cs : estimate.per_control) {
        json entry = {{"label", cs.label},
                      {"mean", cs.mean},
                      {"std_error", cs.std_error},
                      {"n_samples", cs.n_samples}};
        if (cs.wilson_high > 0.0 || cs.wilson_low > 0.0) {
            entry["wilson_low"] = cs.wilson_low;
            entry["wilson_high"] = cs.wilson_high;
        }
        per_control.push_back(entry);
    }
    const json j = {{"functional", functional_id},
                    {"value", estimate.value},
                    {"argmax", estimate.argmax_control},
                    {"argmax_label",
                     estimate.argmax_control >= 0
                         ? estimate.per_control[static_cast<std::size_t>(estimate.argmax_control)]
                               .label
                         : ""},
                    {"per_control", per_control}};
    return j.dump(2) + "\n";
}

std::string condition_reports_to_json(const std::vector<ConditionReport>& reports) {
    json arr = json::array();
    const auto seg_json = [](const Segment& s) {
        return json{{"d", s.d}, {"delay_steps", s.delay_steps}, {"dt", s.dt},
                    {"values", s.values}};
    };
    for (const ConditionReport& r : reports) {
        json entry = {{"id", r.id},
                      {"verdict", r.verdict == ConditionReport::Verdict::pass ? "pass"
                                  : r.verdict == ConditionReport::Verdict::fail
                                      ? "fail"
                                      : "inconclusive"},
                      {"margin", r.margin},
                      {"detail", r.detail}};
        if (r.witness) {
            entry["witness"] = {{"t", r.witness->t},
                                {"component", r.witness->component},
                                {"column", r.witness->column},
                                {"note", r.witness->note},
                                {"xi", seg_json(r.witness->xi)},
                                {"eta", seg_json(r.witness->eta)}};
        }
        arr.push_back(entry);
    }
    bool all_pass = true;
    for (const ConditionReport& r : reports)
        all_pass = all_pass && r.verdict == ConditionReport::Verdict::pass;
    const json j = {{"conditions", arr}, {"all_pass", all_pass}};
    return j.dump(2) + "\n";
}

} // namespace gnsfde
