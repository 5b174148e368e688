#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "gnsfde/config.hpp"

#include <cmath>

using namespace gnsfde;

namespace {

std::string minimal_config(const std::string& extra = "") {
    return R"json({
  "scenario": "test",
  "bounds": {"sigma_low": 1.0, "sigma_high": 2.0, "m": 1},
  "grid": {"dt": 0.0078125, "T": 1.0, "r0": 0.25},
  "system_a": {
    "drift": ["-0.5*z1 + 0.5*x1(-0.25)"],
    "h": [["0.2*z1 + 0.1*x1(-0.25)"]],
    "sigma": [["0.4*z1 + 0.1"]],
    "neutral": ["0.3*x1(-0.25)"],
    "kappa": 0.3
  },
  "system_b": {
    "drift": ["-0.5*z1 + 0.5*x1(-0.25)"],
    "h": [["0.2*z1 + 0.1*x1(-0.25)"]],
    "sigma": [["0.4*z1 + 0.1"]],
    "neutral": ["0.3*x1(-0.25)"],
    "kappa": 0.3
  },
  "init_a": ["-0.5"],
  "init_b": ["0"],
  "controls": {"constant_grid": 2, "bang_bang": 2},
  "n_samples": 20,
  "master_seed": 42)json" +
           extra + "\n}";
}

} // namespace

TEST_CASE("valid config round trip into runtime objects") {
    const ExperimentConfig cfg = parse_config(minimal_config());
    CHECK(cfg.scenario == "test");
    CHECK(cfg.d == 1);
    CHECK(cfg.grid().steps == 128);
    CHECK(cfg.grid().delay_steps == 32);

    const CoefficientSystem sys_a = build_system(cfg, cfg.system_a);
    CHECK(sys_a.d() == 1);
    CHECK(sys_a.kappa() == 0.3);

    const Segment init_a = build_initial_segment(cfg, cfg.init_a);
    CHECK(init_a.rows() == 33);
    CHECK(init_a.at(0, 0) == -0.5);

    const ControlFamily fam = build_family(cfg);
    CHECK(fam.members.size() == 4);
}

TEST_CASE("initial segments evaluate expressions of t") {
    ExperimentConfig cfg = parse_config(minimal_config());
    cfg.init_a = {"t * t - 1"};
    const Segment s = build_initial_segment(cfg, cfg.init_a);
    CHECK(s.at(0, 0) == doctest::Approx(0.25 * 0.25 - 1.0));
    CHECK(s.at(32, 0) == doctest::Approx(-1.0));
}

TEST_CASE("unknown keys are rejected everywhere") {
    CHECK_THROWS_WITH_AS(parse_config(minimal_config(",\n  \"extra\": 1")),
                         doctest::Contains("unknown key"), ConfigError);
    std::string bad = minimal_config();
    bad.replace(bad.find("\"sigma_low\""), 11, "\"sigmaLow\"");
    CHECK_THROWS_AS(parse_config(bad), ConfigError);
}

TEST_CASE("malformed JSON reports a position") {
    try {
        parse_config("{\"bounds\": }");
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("JSON") != std::string::npos);
    }
}

TEST_CASE("shape and range validation") {
    std::string two_inits = minimal_config();
    two_inits.replace(two_inits.find("\"init_a\": [\"-0.5\"]"), 18, "\"init_a\": [\"-0.5\",\"0\"]");
    CHECK_THROWS_AS(parse_config(two_inits), ConfigError);

    std::string bad_kappa = minimal_config();
    bad_kappa.replace(bad_kappa.find("\"kappa\": 0.3"), 12, "\"kappa\": 1.5");
    CHECK_THROWS_AS(parse_config(bad_kappa), ConfigError);

    std::string bad_grid = minimal_config();
    bad_grid.replace(bad_grid.find("\"r0\": 0.25"), 10, "\"r0\": 0.013");
    const ExperimentConfig cfg = parse_config(bad_grid);
    CHECK_THROWS_AS(cfg.grid(), std::invalid_argument);
}

TEST_CASE("asymmetric h matrices are rejected at build time") {
    std::string cfg_text = R"json({
  "scenario": "h2",
  "bounds": {"sigma_low": 1.0, "sigma_high": 2.0, "m": 2},
  "grid": {"dt": 0.25, "T": 1.0, "r0": 0.0},
  "system_a": {
    "drift": ["0"],
    "h": [["0", "z1", "1", "0"]],
    "sigma": [["0", "0"]],
    "neutral": ["0"],
    "kappa": 0.0
  },
  "system_b": {
    "drift": ["0"],
    "h": [["0", "z1", "z1", "0"]],
    "sigma": [["0", "0"]],
    "neutral": ["0"],
    "kappa": 0.0
  },
  "init_a": ["0"],
  "init_b": ["0"]
})json";
    const ExperimentConfig cfg = parse_config(cfg_text);
    CHECK_THROWS_WITH_AS(build_system(cfg, cfg.system_a), doctest::Contains("not symmetric"),
                         ConfigError);
    CHECK_NOTHROW(build_system(cfg, cfg.system_b));
}

TEST_CASE("functional ids are validated") {
    CHECK_THROWS_AS(parse_config(minimal_config(",\n  \"functional\": {\"id\": \"nope\"}")),
                    ConfigError);
    const ExperimentConfig cfg =
        parse_config(minimal_config(",\n  \"functional\": {\"id\": \"qv_terminal\"}"));
    REQUIRE(cfg.functional.has_value());
    CHECK(cfg.functional->id == "qv_terminal");
}

TEST_CASE("order experiment outputs are byte-identical across thread counts") {
    const ExperimentConfig cfg = parse_config(minimal_config());
    const CoefficientSystem sys_a = build_system(cfg, cfg.system_a);
    const CoefficientSystem sys_b = build_system(cfg, cfg.system_b);
    const Segment init_a = build_initial_segment(cfg, cfg.init_a);
    const Segment init_b = build_initial_segment(cfg, cfg.init_b);
    const ControlFamily fam = build_family(cfg);

    const OrderReport r1 = run_order_experiment(sys_a, sys_b, init_a, init_b, fam,
                                                cfg.n_samples, cfg.grid(), cfg.tol,
                                                cfg.master_seed, 1, cfg.scenario);
    const OrderReport r8 = run_order_experiment(sys_a, sys_b, init_a, init_b, fam,
                                                cfg.n_samples, cfg.grid(), cfg.tol,
                                                cfg.master_seed, 8, cfg.scenario);
    CHECK(order_report_to_json(r1) == order_report_to_json(r8));

    // and across repeated runs at the same seed
    const OrderReport r1b = run_order_experiment(sys_a, sys_b, init_a, init_b, fam,
                                                 cfg.n_samples, cfg.grid(), cfg.tol,
                                                 cfg.master_seed, 1, cfg.scenario);
    CHECK(order_report_to_json(r1) == order_report_to_json(r1b));
}

TEST_CASE("condition report JSON carries witnesses") {
    const ExperimentConfig cfg = parse_config(minimal_config());
    const CoefficientSystem sys = build_system(cfg, cfg.system_a);
    const auto reports = check_h1_h4(sys, sys, SamplerSpec{40, 1.0, 1}, 1.0);
    const std::string json_text = condition_reports_to_json(reports);
    CHECK(json_text.find("\"all_pass\": true") != std::string::npos);
    CHECK(json_text.find("\"id\": \"H4\"") != std::string::npos);
}
