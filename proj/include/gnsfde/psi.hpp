#pragma once

#include <stdexcept>

namespace gnsfde {

struct PsiValue {
    double psi;
    double dpsi;
    double ddpsi;
};

/// C^2 approximation family of the positive part s+. Defined by
/// psi_n(s) = psi_n'(s) = 0 on (-inf, 0] and the piecewise-linear second
/// derivative
///   psi_n''(s) = 4 n^2 s            on [0, 1/(2n)]
///              = -4 n^2 (s - 1/n)   on [1/(2n), 1/n]
///              = 0                  otherwise;
/// integrating twice gives the closed forms below. Key facts:
/// 0 <= psi_n' <= 1_(0,inf), psi_n increases to s+ with
/// s+ - psi_n(s) <= 1/(2n), and s psi_n''(s) <= 1_(0,1/n)(s).
inline PsiValue psi_eval(int n, double s) {
    if (n < 1) throw std::invalid_argument("psi_eval: n must be >= 1");
    const double nn = static_cast<double>(n);
    if (s <= 0.0) return {0.0, 0.0, 0.0};
    const double half = 0.5 / nn;
    const double inv = 1.0 / nn;
    if (s <= half) {
        return {(2.0 / 3.0) * nn * nn * s * s * s, 2.0 * nn * nn * s * s, 4.0 * nn * nn * s};
    }
    if (s <= inv) {
        const double u = s - inv;
        return {s - half - (2.0 / 3.0) * nn * nn * u * u * u, 1.0 - 2.0 * nn * nn * u * u,
                -4.0 * nn * nn * u};
    }
    return {s - half, 1.0, 0.0};
}

} // namespace gnsfde
