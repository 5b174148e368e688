#include "gnsfde/segments.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace gnsfde {

Segment constant_segment(int d, long delay_steps, double dt, double c) {
    Segment s;
    s.d = d;
    s.delay_steps = delay_steps;
    s.dt = dt;
    s.values.assign(static_cast<std::size_t>(delay_steps + 1) * d, c);
    return s;
}

void require_same_shape(const Segment& a, const Segment& b) {
    if (a.d != b.d || a.delay_steps != b.delay_steps)
        throw std::invalid_argument("segment shape mismatch");
}

void require_finite(const Segment& s) {
    if (s.values.size() != static_cast<std::size_t>(s.rows()) * s.d)
        throw std::invalid_argument("segment value count does not match its shape");
    for (double v : s.values)
        if (!std::isfinite(v)) throw std::invalid_argument("segment has non-finite entries");
}

bool leq(const Segment& xi, const Segment& eta) {
    require_same_shape(xi, eta);
    for (std::size_t i = 0; i < xi.values.size(); ++i)
        if (xi.values[i] > eta.values[i]) return false;
    return true;
}

bool leq_n(const Segment& xi, const Segment& eta, const NeutralFunctional& neutral) {
    if (!leq(xi, eta)) return false;
    const std::vector<double> n_xi = neutral(xi);
    const std::vector<double> n_eta = neutral(eta);
    for (int i = 0; i < xi.d; ++i)
        if (xi.endpoint(i) - n_xi[static_cast<std::size_t>(i)] >
            eta.endpoint(i) - n_eta[static_cast<std::size_t>(i)])
            return false;
    return true;
}

Segment meet(const Segment& xi, const Segment& eta) {
    require_same_shape(xi, eta);
    Segment out = xi;
    for (std::size_t i = 0; i < out.values.size(); ++i)
        out.values[i] = std::min(xi.values[i], eta.values[i]);
    return out;
}

Segment segment_at(const std::vector<double>& history, long history_rows, int d,
                   long delay_steps, double dt, long k) {
    if (k < 0 || k + delay_steps + 1 > history_rows)
        throw std::out_of_range("segment_at: step index outside the recorded history");
    if (history.size() != static_cast<std::size_t>(history_rows) * d)
        throw std::invalid_argument("segment_at: history size does not match its shape");
    Segment s;
    s.d = d;
    s.delay_steps = delay_steps;
    s.dt = dt;
    const std::size_t begin = static_cast<std::size_t>(k) * d;
    s.values.assign(history.begin() + static_cast<std::ptrdiff_t>(begin),
                    history.begin() + static_cast<std::ptrdiff_t>(begin + static_cast<std::size_t>(delay_steps + 1) * d));
    return s;
}

} // namespace gnsfde
