#pragma once

#include "gnsfde/rng.hpp"
#include "gnsfde/sym_matrix.hpp"
#include "gnsfde/time_grid.hpp"

#include <string>
#include <vector>

namespace gnsfde {

/// Piecewise-constant admissible volatility control: per step k a matrix
/// theta_k with sigma_low^2 I <= theta_k theta_k^T <= sigma_high^2 I.
/// The quadratic-variation density theta theta^T is stored alongside theta
/// so controls built from a target density (constant_control) reproduce it
/// without a round trip through the square root.
struct VolatilityControl {
    enum class Kind { constant, piecewise, bang_bang_random };

    Kind kind = Kind::constant;
    std::vector<Eigen::MatrixXd> theta;   // one entry (constant) or one per step
    std::vector<SymMatrix> qv_density;    // theta_k theta_k^T, same length as theta
    std::uint64_t seed = 0;               // for the random kinds
    std::string label;

    const Eigen::MatrixXd& theta_at(long k) const {
        return theta.size() == 1 ? theta.front() : theta.at(static_cast<std::size_t>(k));
    }
    const SymMatrix& density_at(long k) const {
        return qv_density.size() == 1 ? qv_density.front()
                                      : qv_density.at(static_cast<std::size_t>(k));
    }
    long segments() const { return static_cast<long>(theta.size()); }
};

/// Throws if any step density lies outside [sigma_low^2 I, sigma_high^2 I]
/// (Loewner order, tolerance 1e-10) or the control does not cover the grid.
void require_admissible(const VolatilityControl& control, const GBounds& bounds, long steps);

/// Discretized driver path: Wiener increments dW, controlled increments
/// dB_k = theta_k dW_k and quadratic-variation increments
/// dQV_k = theta_k theta_k^T dt.
struct DriverPath {
    TimeGrid grid;
    int m = 1;
    std::vector<double> dW;  // steps x m, row-major
    std::vector<double> dB;  // steps x m, row-major
    std::vector<double> dQV; // steps x m x m, row-major symmetric blocks

    double dw(long k, int j) const { return dW[static_cast<std::size_t>(k) * m + j]; }
    double db(long k, int j) const { return dB[static_cast<std::size_t>(k) * m + j]; }
    double dqv(long k, int j, int l) const {
        return dQV[(static_cast<std::size_t>(k) * m + j) * m + l];
    }

    /// Terminal value of driver component j: sum of its dB increments.
    double b_terminal(int j) const;
    /// Running maximum over grid nodes of driver component j.
    double b_running_max(int j) const;
    /// Terminal quadratic variation entry (j, l).
    double qv_terminal(int j, int l) const;
};

/// Control with theta_k = principal square root of gamma for every step, so
/// dQV_k = gamma * dt exactly. gamma must lie in [sigma_low^2 I, sigma_high^2 I].
VolatilityControl constant_control(const SymMatrix& gamma, const GBounds& bounds);

/// Per-step theta in {sigma_low I, sigma_high I}, switching with probability
/// switch_prob at every step. Deterministic in the seed (including the
/// initial endpoint, drawn first).
VolatilityControl bang_bang_control(const TimeGrid& grid, std::uint64_t seed,
                                    const GBounds& bounds, double switch_prob);

/// Samples a driver path. dW_k ~ iid Normal(0, dt I_m) from the counter
/// stream keyed by (master_seed, sample_index, k); the same key reproduces
/// the identical path bit-for-bit. dW does not depend on the control, which
/// is what makes common-random-number comparisons across controls exact.
DriverPath sample_driver(const VolatilityControl& control, const TimeGrid& grid,
                         std::uint64_t master_seed, std::uint64_t sample_index,
                         const GBounds& bounds);

/// Binary dump, little-endian: header {uint32 m, uint64 steps, float64 dt}
/// followed by the row-major dW, dB and dQV arrays.
void dump_driver_binary(const DriverPath& path, const std::string& filename);

} // namespace gnsfde
