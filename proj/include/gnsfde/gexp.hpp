#pragma once

#include "gnsfde/drivers.hpp"
#include "gnsfde/util.hpp"

#include <functional>
#include <string>
#include <vector>

namespace gnsfde {

using PathFunctional = std::function<double(const DriverPath&)>;
using PathEvent = std::function<bool(const DriverPath&)>;

/// Finite family of admissible controls approximating the control class
/// from below. Estimates over the family are lower bounds (up to Monte
/// Carlo error) of the true supremum.
struct ControlFamily {
    std::vector<VolatilityControl> members;
};

/// n constant controls gamma_k I with gamma_k log-spaced in
/// [sigma_low^2, sigma_high^2]; the endpoints are included exactly.
ControlFamily constant_grid_family(const GBounds& bounds, int n);

/// Default family: 16 constant-grid controls plus 16 random bang-bang
/// controls (seeds seed_base .. seed_base+15, switch probability 1/2).
ControlFamily default_family(const GBounds& bounds, const TimeGrid& grid,
                             std::uint64_t seed_base = 0);

struct ControlStats {
    std::string label;
    double mean = 0.0;
    double std_error = 0.0;
    long n_samples = 0;
    double wilson_low = 0.0;  // capacity estimates only
    double wilson_high = 0.0;
};

struct GExpEstimate {
    double value = 0.0;
    int argmax_control = -1;
    std::vector<ControlStats> per_control;
};

/// Monte Carlo estimate of sup over the family of E[functional(path)].
/// Common random numbers: the Wiener increments for sample s are identical
/// across controls, so the max is stable and pathwise monotone functionals
/// give exactly monotone estimates.
GExpEstimate estimate_gexp(const PathFunctional& functional, const ControlFamily& family,
                           long n_samples, const TimeGrid& grid, const GBounds& bounds,
                           std::uint64_t master_seed, int threads = 1);

/// Same sweep evaluated for several functionals on shared paths.
std::vector<GExpEstimate> estimate_gexp_multi(const std::vector<PathFunctional>& functionals,
                                              const ControlFamily& family, long n_samples,
                                              const TimeGrid& grid, const GBounds& bounds,
                                              std::uint64_t master_seed, int threads = 1);

/// Choquet capacity estimate: max over controls of the event frequency,
/// with a Wilson 95% interval per control.
GExpEstimate estimate_capacity(const PathEvent& event, const ControlFamily& family,
                               long n_samples, const TimeGrid& grid, const GBounds& bounds,
                               std::uint64_t master_seed, int threads = 1);

struct RefineResult {
    GExpEstimate estimate;       // value >= the base estimate's value
    VolatilityControl control;   // the refined per-step control
};

/// Coordinate ascent from the argmax control of `base`: each sweep tries
/// flipping every step to sigma_low I / sigma_high I under common random
/// numbers, keeping improvements. `budget` caps the number of sweeps;
/// budget 0 returns the base unchanged.
RefineResult refine_control(const GExpEstimate& base, const ControlFamily& family,
                            const PathFunctional& functional, const TimeGrid& grid,
                            const GBounds& bounds, long budget, long n_samples,
                            std::uint64_t master_seed, int threads = 1);

} // namespace gnsfde
