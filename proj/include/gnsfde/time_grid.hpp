#pragma once

#include <cmath>
#include <stdexcept>

namespace gnsfde {

/// Uniform grid over [-r0, T] with r0 = delay_steps * dt and
/// T = steps * dt. Times are always computed as k * dt, never by
/// incremental accumulation.
struct TimeGrid {
    double dt;
    long steps;
    long delay_steps;

    TimeGrid(double dt_, long steps_, long delay_steps_)
        : dt(dt_), steps(steps_), delay_steps(delay_steps_) {
        if (!(dt > 0.0) || !std::isfinite(dt))
            throw std::invalid_argument("TimeGrid: dt must be positive and finite");
        if (steps < 1) throw std::invalid_argument("TimeGrid: steps must be >= 1");
        if (delay_steps < 0) throw std::invalid_argument("TimeGrid: delay_steps must be >= 0");
    }

    /// Builds the grid from (dt, T, r0), requiring both T and r0 to be
    /// integer multiples of dt (within 1e-9 relative slack).
    static TimeGrid from_horizon(double dt, double horizon, double r0) {
        const auto to_steps = [dt](double span, const char* what) {
            const double ratio = span / dt;
            const long k = std::lround(ratio);
            if (std::abs(ratio - static_cast<double>(k)) > 1e-9 * std::max(1.0, std::abs(ratio)))
                throw std::invalid_argument(std::string("TimeGrid: ") + what +
                                            " must be an integer multiple of dt");
            return k;
        };
        return TimeGrid(dt, to_steps(horizon, "T"), to_steps(r0, "r0"));
    }

    double horizon() const { return static_cast<double>(steps) * dt; }
    double r0() const { return static_cast<double>(delay_steps) * dt; }

    /// Time of grid node k, with k in [-delay_steps, steps].
    double time(long k) const { return static_cast<double>(k) * dt; }

    /// Total number of stored nodes on [-r0, T].
    long nodes() const { return delay_steps + steps + 1; }
};

} // namespace gnsfde
