#pragma once

#include "gnsfde/sym_matrix.hpp"

#include <cstdint>

namespace gnsfde {

/// Evaluate G(X) = (1/2) * sup <gamma, X> over symmetric gamma with
/// sigma_low^2 I <= gamma <= sigma_high^2 I. Computed in closed form from
/// the signed eigenvalue parts of X:
///   G(X) = (1/2) (sigma_high^2 trace(X+) - sigma_low^2 trace(X-)).
/// Eigenvalues within 1e-12 of zero are treated as zero.
double g_value(const SymMatrix& x, const GBounds& bounds);

/// Independent check of g_value: maximizes (1/2) <gamma, X> over an explicit
/// candidate set containing (i) every gamma = Q diag(c) Q^T with Q the
/// eigenbasis of X and c in {sigma_low^2, sigma_high^2}^m, which includes the
/// true maximizer, and (ii) `search_budget` random admissible gammas.
double g_value_oracle(const SymMatrix& x, const GBounds& bounds, int search_budget,
                      std::uint64_t seed = 0);

} // namespace gnsfde
