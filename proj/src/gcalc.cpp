#include "gnsfde/gcalc.hpp"

#include "gnsfde/rng.hpp"

#include <cmath>

namespace gnsfde {

bool loewner_leq(const SymMatrix& x, const SymMatrix& y, double tol) {
    if (x.dim() != y.dim())
        throw std::invalid_argument("loewner_leq: dimension mismatch");
    return (y - x).min_eigenvalue() >= -tol;
}

double g_value(const SymMatrix& x, const GBounds& bounds) {
    if (x.dim() != bounds.dim)
        throw std::invalid_argument("g_value: dimension mismatch");
    const Eigen::VectorXd ev = x.eigenvalues();
    double trace_pos = 0.0;
    double trace_neg = 0.0;
    for (int i = 0; i < ev.size(); ++i) {
        double lambda = ev[i];
        if (std::abs(lambda) <= 1e-12) lambda = 0.0;
        if (lambda > 0.0)
            trace_pos += lambda;
        else
            trace_neg += -lambda;
    }
    return 0.5 * (bounds.high_sq() * trace_pos - bounds.low_sq() * trace_neg);
}

namespace {

// Random orthogonal matrix from the QR factorization of a Gaussian matrix,
// with the sign convention fixed so the distribution is Haar.
Eigen::MatrixXd random_orthogonal(int m, const CounterRng& rng, std::uint64_t block) {
    Eigen::MatrixXd g(m, m);
    std::uint64_t c = block * static_cast<std::uint64_t>(m) * m;
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j) g(i, j) = rng.normal(c++);
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
    Eigen::MatrixXd q = qr.householderQ();
    const Eigen::VectorXd diag = qr.matrixQR().diagonal();
    for (int j = 0; j < m; ++j)
        if (diag[j] < 0.0) q.col(j) = -q.col(j);
    return q;
}

} // namespace

double g_value_oracle(const SymMatrix& x, const GBounds& bounds, int search_budget,
                      std::uint64_t seed) {
    if (x.dim() != bounds.dim)
        throw std::invalid_argument("g_value_oracle: dimension mismatch");
    if (search_budget < 1)
        throw std::invalid_argument("g_value_oracle: search_budget must be >= 1");

    const int m = x.dim();
    const double lo = bounds.low_sq();
    const double hi = bounds.high_sq();

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(x.mat());
    const Eigen::MatrixXd q = es.eigenvectors();

    double best = -std::numeric_limits<double>::infinity();
    const auto consider = [&](const Eigen::MatrixXd& basis, const Eigen::VectorXd& coeffs) {
        const SymMatrix gamma(basis * coeffs.asDiagonal() * basis.transpose());
        best = std::max(best, 0.5 * gamma.inner(x));
    };

    // (i) eigenbasis of X with every corner of [lo, hi]^m; contains the
    // true maximizer.
    for (std::uint64_t mask = 0; mask < (1ULL << m); ++mask) {
        Eigen::VectorXd c(m);
        for (int i = 0; i < m; ++i) c[i] = (mask >> i) & 1 ? hi : lo;
        consider(q, c);
    }

    // (ii) random admissible candidates.
    const CounterRng rng(seed, 0, StreamTag::oracle_candidates);
    std::uint64_t uc = 1'000'000'000ULL; // uniform counters, clear of the normal draws
    for (int k = 0; k < search_budget; ++k) {
        const Eigen::MatrixXd r = random_orthogonal(m, rng, static_cast<std::uint64_t>(k));
        Eigen::VectorXd u(m);
        for (int i = 0; i < m; ++i) u[i] = rng.uniform(uc++, lo, hi);
        consider(r, u);
    }
    return best;
}

} // namespace gnsfde
