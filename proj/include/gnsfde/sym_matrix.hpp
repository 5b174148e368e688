#pragma once

#include <Eigen/Dense>
#include <stdexcept>

namespace gnsfde {

/// Symmetric m x m matrix. Construction symmetrizes the input, so the
/// symmetry invariant is exact; entries must be finite.
class SymMatrix {
  public:
    explicit SymMatrix(const Eigen::MatrixXd& a) {
        if (a.rows() != a.cols() || a.rows() < 1)
            throw std::invalid_argument("SymMatrix: matrix must be square with dim >= 1");
        if (!a.allFinite())
            throw std::invalid_argument("SymMatrix: entries must be finite");
        m_ = 0.5 * (a + a.transpose());
    }

    static SymMatrix zero(int dim) { return SymMatrix(Eigen::MatrixXd::Zero(dim, dim)); }

    static SymMatrix scaled_identity(int dim, double s) {
        return SymMatrix(Eigen::MatrixXd::Identity(dim, dim) * s);
    }

    int dim() const { return static_cast<int>(m_.rows()); }
    const Eigen::MatrixXd& mat() const { return m_; }
    double operator()(int i, int j) const { return m_(i, j); }

    double trace() const { return m_.trace(); }
    double frobenius_norm() const { return m_.norm(); }

    Eigen::VectorXd eigenvalues() const {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m_, Eigen::EigenvaluesOnly);
        return es.eigenvalues();
    }

    double min_eigenvalue() const { return eigenvalues().minCoeff(); }

    /// Frobenius pairing <M, M'> = sum_{k,l} M_kl M'_kl.
    double inner(const SymMatrix& other) const {
        require_same_dim(other);
        return m_.cwiseProduct(other.m_).sum();
    }

    /// Principal square root; requires the matrix to be PSD up to `tol` on
    /// its eigenvalues (small negatives are clamped to zero).
    SymMatrix principal_sqrt(double tol = 1e-12) const {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m_);
        Eigen::VectorXd ev = es.eigenvalues();
        for (int i = 0; i < ev.size(); ++i) {
            if (ev[i] < -tol)
                throw std::invalid_argument("SymMatrix::principal_sqrt: matrix is not PSD");
            ev[i] = std::sqrt(std::max(ev[i], 0.0));
        }
        return SymMatrix(es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose());
    }

    friend SymMatrix operator+(const SymMatrix& a, const SymMatrix& b) {
        a.require_same_dim(b);
        return SymMatrix(a.m_ + b.m_);
    }
    friend SymMatrix operator-(const SymMatrix& a, const SymMatrix& b) {
        a.require_same_dim(b);
        return SymMatrix(a.m_ - b.m_);
    }
    friend SymMatrix operator*(double s, const SymMatrix& a) { return SymMatrix(s * a.m_); }

  private:
    void require_same_dim(const SymMatrix& other) const {
        if (dim() != other.dim())
            throw std::invalid_argument("SymMatrix: dimension mismatch");
    }

    Eigen::MatrixXd m_;
};

/// Volatility bounds 0 < sigma_low < sigma_high for an m-dimensional driver.
struct GBounds {
    double sigma_low;
    double sigma_high;
    int dim;

    GBounds(double lo, double hi, int m) : sigma_low(lo), sigma_high(hi), dim(m) {
        if (!(lo > 0.0) || !(hi > lo))
            throw std::invalid_argument("GBounds: need 0 < sigma_low < sigma_high");
        if (m < 1) throw std::invalid_argument("GBounds: dim must be >= 1");
    }

    double low_sq() const { return sigma_low * sigma_low; }
    double high_sq() const { return sigma_high * sigma_high; }
};

/// True iff X <= Y in the Loewner order up to `tol`: the minimum eigenvalue
/// of (Y - X) is >= -tol.
bool loewner_leq(const SymMatrix& x, const SymMatrix& y, double tol);

} // namespace gnsfde
