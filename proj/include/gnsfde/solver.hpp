#pragma once

#include "gnsfde/coeffs.hpp"
#include "gnsfde/drivers.hpp"
#include "gnsfde/segments.hpp"

#include <string>
#include <vector>

namespace gnsfde {

struct FixedPointParams {
    double tol = 1e-12;
    int max_iter = 200;
};

struct SolverError : std::runtime_error {
    SolverError(const std::string& msg, long step, double residual)
        : std::runtime_error(msg + " at step " + std::to_string(step) +
                             " (residual " + std::to_string(residual) + ")"),
          step(step),
          residual(residual) {}
    long step;
    double residual;
};

/// Solution path on [-r0, T]. values row j holds Y((j - L) dt); the first
/// L+1 rows are the initial segment verbatim. neutral_adjusted row k holds
/// Y^N(t_k) = Y(t_k) - N(Y_{t_k}) for k in [0, steps].
struct Trajectory {
    TimeGrid grid;
    int d = 1;
    std::vector<double> values;
    std::vector<double> neutral_adjusted;

    double value(long k, int i) const { // k in [-delay_steps, steps]
        return values[static_cast<std::size_t>(k + grid.delay_steps) * d + i];
    }
    double adjusted(long k, int i) const { // k in [0, steps]
        return neutral_adjusted[static_cast<std::size_t>(k) * d + i];
    }
    Segment segment(long k) const {
        return segment_at(values, grid.nodes(), d, grid.delay_steps, grid.dt, k);
    }
};

struct SolverStats {
    long total_fp_iterations = 0;
    int max_fp_iterations = 0;
    double max_fp_residual = 0.0;
};

/// Explicit Euler integration of the neutral dynamics with a per-step
/// Banach fixed-point solve for the implicit neutral term:
///   V_{k+1} = V_k + b dt + <h^i, dQV_k> + sigma dB_k,   V_0 = xi(0) - N(xi)
///   Y(t_{k+1}) solves u = V_{k+1} + N(segment ending in u).
/// When N reads only strictly-past lags a single iteration is exact.
/// `t_offset` shifts the time the coefficients see (coefficients are
/// evaluated at t_offset + t_k), used by the restarted probes.
Trajectory solve(const CoefficientSystem& sys, const Segment& init, const DriverPath& driver,
                 const FixedPointParams& fp = {}, double t_offset = 0.0,
                 SolverStats* stats = nullptr);

/// Two solutions driven by the identical driver path (kept alongside, so
/// both trajectories provably consumed the same increments). Both systems
/// must carry the same neutral term.
struct PairTrajectory {
    Trajectory a;
    Trajectory b;
    DriverPath driver;
};

PairTrajectory solve_pair(const CoefficientSystem& sys_a, const CoefficientSystem& sys_b,
                          const Segment& init_a, const Segment& init_b, const DriverPath& driver,
                          const FixedPointParams& fp = {}, double t_offset = 0.0);

/// CSV with columns t, Y_1..Y_d, YN_1..YN_d (YN is nan before t = 0).
void write_trajectory_csv(const Trajectory& traj, const std::string& filename);

} // namespace gnsfde
