#pragma once

#include "gnsfde/coeffs.hpp"
#include "gnsfde/comparison.hpp"
#include "gnsfde/gexp.hpp"

#include <optional>
#include <string>
#include <vector>

namespace gnsfde {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct SystemConfig {
    std::vector<std::string> drift;               // d expressions
    std::vector<std::vector<std::string>> h;      // d matrices, each m x m (symmetric)
    std::vector<std::vector<std::string>> sigma;  // d rows of m expressions
    std::vector<std::string> neutral;             // d expressions
    double kappa = 0.0;
};

struct ControlFamilyConfig {
    int constant_grid = 16;
    int bang_bang = 16;
    double switch_prob = 0.5;
    std::uint64_t seed_base = 0;
};

struct FunctionalConfig {
    std::string id = "terminal"; // terminal | terminal_square | qv_terminal |
                                 // running_max | y_terminal
    int component = 1;           // 1-based driver column or solution component
};

struct OutputConfig {
    std::string dir = "out";
    bool json = true;
    bool csv = true;
};

/// Parsed experiment configuration. Unknown keys anywhere in the file are
/// rejected.
struct ExperimentConfig {
    std::string scenario;
    double sigma_low = 1.0;
    double sigma_high = 2.0;
    int m = 1;
    int d = 1;
    double dt = 1.0 / 512;
    double horizon = 1.0;
    double r0 = 0.0;
    SystemConfig system_a;
    SystemConfig system_b;
    std::vector<std::string> init_a; // d expressions in t on [-r0, 0]
    std::vector<std::string> init_b;
    ControlFamilyConfig controls;
    long n_samples = 1000;
    std::uint64_t master_seed = 0;
    TolerancePolicy tol;
    OutputConfig outputs;
    double capacity_threshold = 0.0;
    std::vector<std::string> check_conditions; // default: H1..H4, A1, A2
    std::optional<double> k_declared;
    std::optional<FunctionalConfig> functional;
    SamplerSpec sampler;

    GBounds bounds() const { return GBounds(sigma_low, sigma_high, m); }
    TimeGrid grid() const { return TimeGrid::from_horizon(dt, horizon, r0); }
};

ExperimentConfig load_config(const std::string& path);
ExperimentConfig parse_config(const std::string& json_text);

CoefficientSystem build_system(const ExperimentConfig& cfg, const SystemConfig& sys);
/// Samples the d initial-data expressions (variable t only) onto the grid.
Segment build_initial_segment(const ExperimentConfig& cfg,
                              const std::vector<std::string>& exprs);
ControlFamily build_family(const ExperimentConfig& cfg);

/// JSON serializations used by the CLI outputs (stable key order, shortest
/// round-trip doubles, so byte-identical for identical inputs).
std::string order_report_to_json(const OrderReport& report);
std::string gexp_estimate_to_json(const GExpEstimate& estimate, const std::string& functional_id);
std::string condition_reports_to_json(const std::vector<ConditionReport>& reports);

} // namespace gnsfde
