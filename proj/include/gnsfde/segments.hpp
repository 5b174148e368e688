#pragma once

#include <functional>
#include <vector>

namespace gnsfde {

/// Discretized delay segment: (L+1) x d grid values of a function on
/// [-r0, 0], with values[l] at time -r0 + l*dt.
struct Segment {
    int d = 1;
    long delay_steps = 0;
    double dt = 1.0;
    std::vector<double> values; // (delay_steps + 1) x d, row-major

    double at(long l, int i) const { return values[static_cast<std::size_t>(l) * d + i]; }
    double& at(long l, int i) { return values[static_cast<std::size_t>(l) * d + i]; }
    /// Right-endpoint value, i.e. the segment at lag 0.
    double endpoint(int i) const { return at(delay_steps, i); }
    long rows() const { return delay_steps + 1; }
};

/// Constant segment c (componentwise).
Segment constant_segment(int d, long delay_steps, double dt, double c);

void require_same_shape(const Segment& a, const Segment& b);
void require_finite(const Segment& s);

/// Pointwise componentwise order on equal-shape segments.
bool leq(const Segment& xi, const Segment& eta);

/// Evaluates a neutral functional N on a segment, returning d values.
using NeutralFunctional = std::function<std::vector<double>(const Segment&)>;

/// xi <=_N eta: leq(xi, eta) plus the neutral-adjusted endpoint order
/// xi(0) - N(xi) <= eta(0) - N(eta), componentwise.
bool leq_n(const Segment& xi, const Segment& eta, const NeutralFunctional& neutral);

/// Pointwise componentwise minimum.
Segment meet(const Segment& xi, const Segment& eta);

/// Window of (delay_steps + 1) rows of `history` ending at step k, where
/// history row j holds the state at time (j - delay_steps) * dt and covers
/// [-r0, steps * dt]. k must lie in [0, steps].
Segment segment_at(const std::vector<double>& history, long history_rows, int d,
                   long delay_steps, double dt, long k);

} // namespace gnsfde
