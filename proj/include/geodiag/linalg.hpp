#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <random>

#include "error.hpp"
#include "rng.hpp"

namespace geodiag {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using FloatMatrix = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline constexpr double kPinvRelativeCutoff = 1e-10;

inline Vector standard_normal(Eigen::Index n, CounterRng& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    Vector v(n);
    for (Eigen::Index i = 0; i < n; ++i) v[i] = normal(rng);
    return v;
}

inline Matrix standard_normal(Eigen::Index rows, Eigen::Index cols, CounterRng& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    Matrix m(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j)
        for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = normal(rng);
    return m;
}

// n x k matrix with orthonormal columns (Householder QR of a Gaussian draw).
inline Matrix random_orthonormal(Eigen::Index n, Eigen::Index k, CounterRng& rng) {
    if (k == 0) return Matrix(n, 0);
    const Matrix g = standard_normal(n, k, rng);
    Eigen::HouseholderQR<Matrix> qr(g);
    return qr.householderQ() * Matrix::Identity(n, k);
}

// Column means.
inline Vector column_mean(const Matrix& x) { return x.colwise().mean().transpose(); }

// Covariance with denominator `rows - ddof`.
inline Matrix covariance(const Matrix& x, int ddof = 1) {
    const Matrix centered = x.rowwise() - x.colwise().mean();
    const double denom = std::max<double>(1.0, static_cast<double>(x.rows() - ddof));
    return (centered.adjoint() * centered) / denom;
}

// Eigenvalues of a symmetric matrix, descending, with tiny negatives clipped.
inline Vector symmetric_eigenvalues_desc(const Matrix& sym) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(sym, Eigen::EigenvaluesOnly);
    require(es.info() == Eigen::Success, ErrorCode::EigenFailure, "symmetric eigenvalues");
    Vector ev = es.eigenvalues().reverse();
    for (auto& e : ev) e = std::max(0.0, e);
    return ev;
}

// v^T M^+ v for symmetric PSD M, pseudoinverse via eigendecomposition with
// cutoff kPinvRelativeCutoff * max(sigma_max(M), reference_scale).
inline double pinv_quadratic(const Matrix& m, const Vector& v, double reference_scale = 0.0) {
    if (m.rows() == 0) return 0.0;
    Eigen::SelfAdjointEigenSolver<Matrix> es(m);
    require(es.info() == Eigen::Success, ErrorCode::EigenFailure, "pseudoinverse");
    const Vector& ev = es.eigenvalues();
    const double smax = std::max(ev.cwiseAbs().maxCoeff(), reference_scale);
    if (smax <= 0.0) return 0.0;
    const double cutoff = kPinvRelativeCutoff * smax;
    const Vector proj = es.eigenvectors().transpose() * v;
    double q = 0.0;
    for (Eigen::Index i = 0; i < ev.size(); ++i)
        if (ev[i] > cutoff) q += proj[i] * proj[i] / ev[i];
    return q;
}

// Largest eigenvalue of a symmetric PSD matrix (0 for empty).
inline double spectral_max(const Matrix& sym) {
    if (sym.rows() == 0) return 0.0;
    return symmetric_eigenvalues_desc(sym)[0];
}

inline FloatMatrix to_float(const Matrix& m) { return m.cast<float>(); }
inline Matrix to_double(const FloatMatrix& m) { return m.cast<double>(); }

} // namespace geodiag
