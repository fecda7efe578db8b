#pragma once

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "error.hpp"
#include "linalg.hpp"

namespace geodiag {

enum class WhitenMode { Zca, None };

inline std::string to_string(WhitenMode m) { return m == WhitenMode::Zca ? "zca" : "none"; }

inline WhitenMode parse_whiten_mode(const std::string& s) {
    if (s == "zca") return WhitenMode::Zca;
    if (s == "none") return WhitenMode::None;
    throw Error(ErrorCode::InvalidArgument, "unknown whitening mode '" + s + "'");
}

struct WhitenConfig {
    WhitenMode mode = WhitenMode::Zca;
    // Ridge added to the pooled covariance diagonal: ridge_fraction * tr(Sigma) / N.
    double ridge_fraction = 1e-6;
};

inline Matrix center_global(const Matrix& x) {
    if (x.rows() == 0) return x;
    return x.rowwise() - x.colwise().mean();
}

// Global centering followed by ZCA whitening: x_c (Sigma + ridge I)^{-1/2},
// Sigma the pooled sample covariance (denominator M-1). Directions with a zero
// eigenvalue and zero ridge map to zero.
inline Matrix gaussianize(const Matrix& x, const WhitenConfig& cfg = {}) {
    if (cfg.mode == WhitenMode::None) return x;
    require(x.rows() >= 2, ErrorCode::InvalidArgument, "gaussianize needs at least 2 rows");
    require(cfg.ridge_fraction >= 0.0, ErrorCode::InvalidArgument, "ridge_fraction must be >= 0");

    const Matrix centered = center_global(x);
    Matrix sigma = (centered.adjoint() * centered) / static_cast<double>(x.rows() - 1);
    const double ridge = cfg.ridge_fraction * sigma.trace() / static_cast<double>(x.cols());
    sigma.diagonal().array() += ridge;

    Eigen::SelfAdjointEigenSolver<Matrix> es(sigma);
    require(es.info() == Eigen::Success, ErrorCode::EigenFailure, "pooled covariance");
    const Vector& ev = es.eigenvalues();
    const double top = ev.cwiseAbs().maxCoeff();
    const double tiny = ridge > 0.0 ? std::numeric_limits<double>::epsilon() * top : 1e-12 * top;
    Vector inv_sqrt(ev.size());
    for (Eigen::Index i = 0; i < ev.size(); ++i) inv_sqrt[i] = ev[i] > tiny ? 1.0 / std::sqrt(ev[i]) : 0.0;
    const Matrix& v = es.eigenvectors();
    const Matrix w = v * inv_sqrt.asDiagonal() * v.transpose();
    return centered * w;
}

struct NormalizedRows {
    Matrix rows;
    std::vector<Eigen::Index> zero_rows; // rows left unchanged because their norm is 0
};

inline NormalizedRows l2_normalize_rows(const Matrix& x) {
    NormalizedRows out{x, {}};
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        const double n = x.row(i).norm();
        if (n > 0.0) out.rows.row(i) /= n;
        else out.zero_rows.push_back(i);
    }
    return out;
}

} // namespace geodiag
