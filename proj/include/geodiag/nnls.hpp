#pragma once

// Active-set non-negative least squares (Lawson-Hanson) in Gram form:
//
//   min_{x >= 0}  1/2 x^T G x - h^T x,   G = A^T A, h = A^T b,
//
// i.e. min ||A x - b||^2 over x >= 0 without touching A. The Gram form lets a
// caller reuse G for many right-hand sides.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "linalg.hpp"

namespace geodiag {

struct NnlsResult {
    Vector x;
    double kkt_residual = 0.0; // max KKT violation of the gradient, relative to max|h|
    std::size_t iterations = 0;
    bool converged = false;
};

// KKT violation of x for the Gram problem, relative to `scale`.
inline double nnls_kkt_residual(const Matrix& g, const Vector& h, const Vector& x, double scale) {
    if (scale <= 0.0) return 0.0;
    const Vector w = h - g * x; // negative gradient
    double worst = 0.0;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        const double v = x[i] > 0.0 ? std::abs(w[i]) : std::max(w[i], 0.0);
        worst = std::max(worst, v);
    }
    return worst / scale;
}

// `tol` is the relative KKT tolerance reported as converged; variables enter
// the passive set only when their gradient exceeds `enter_tol * max|h|`.
inline NnlsResult nnls_gram(const Matrix& g, const Vector& h, double tol = 1e-8, std::size_t max_iter = 0,
                            double enter_tol = 1e-10) {
    const Eigen::Index k = h.size();
    if (max_iter == 0) max_iter = 50 * static_cast<std::size_t>(std::max<Eigen::Index>(k, 1));

    NnlsResult res;
    res.x = Vector::Zero(k);
    const double scale = k > 0 ? h.cwiseAbs().maxCoeff() : 0.0;
    if (k == 0 || scale == 0.0) {
        res.converged = true;
        return res;
    }

    Vector& x = res.x;
    std::vector<char> passive(static_cast<std::size_t>(k), 0);
    std::vector<char> blocked(static_cast<std::size_t>(k), 0);
    std::vector<Eigen::Index> idx;

    auto solve_passive = [&](Vector& z) -> bool {
        idx.clear();
        for (Eigen::Index i = 0; i < k; ++i)
            if (passive[static_cast<std::size_t>(i)]) idx.push_back(i);
        const auto np = static_cast<Eigen::Index>(idx.size());
        Matrix gp(np, np);
        Vector hp(np);
        for (Eigen::Index a = 0; a < np; ++a) {
            hp[a] = h[idx[static_cast<std::size_t>(a)]];
            for (Eigen::Index b = 0; b < np; ++b) gp(a, b) = g(idx[static_cast<std::size_t>(a)], idx[static_cast<std::size_t>(b)]);
        }
        Eigen::LDLT<Matrix> ldlt(gp);
        if (ldlt.info() != Eigen::Success) return false;
        const Vector zp = ldlt.solve(hp);
        if (!zp.allFinite()) return false;
        z = Vector::Zero(k);
        for (Eigen::Index a = 0; a < np; ++a) z[idx[static_cast<std::size_t>(a)]] = zp[a];
        return true;
    };

    while (res.iterations < max_iter) {
        const Vector w = h - g * x;
        Eigen::Index enter = -1;
        double best = enter_tol * scale;
        for (Eigen::Index i = 0; i < k; ++i) {
            const auto ui = static_cast<std::size_t>(i);
            if (!passive[ui] && !blocked[ui] && w[i] > best) {
                best = w[i];
                enter = i;
            }
        }
        if (enter < 0) break;
        passive[static_cast<std::size_t>(enter)] = 1;

        bool moved = false;
        while (res.iterations < max_iter) {
            ++res.iterations;
            Vector z;
            if (!solve_passive(z)) {
                passive[static_cast<std::size_t>(enter)] = 0;
                blocked[static_cast<std::size_t>(enter)] = 1;
                break;
            }
            bool feasible = true;
            for (auto i : idx)
                if (z[i] <= 0.0) feasible = false;
            if (feasible) {
                x = z;
                moved = true;
                break;
            }
            // Step towards z until the first passive variable hits zero.
            double alpha = 1.0;
            for (auto i : idx) {
                if (z[i] <= 0.0) {
                    const double denom = x[i] - z[i];
                    const double a = denom > 0.0 ? x[i] / denom : 0.0;
                    alpha = std::min(alpha, a);
                }
            }
            const Vector prev = x;
            for (auto i : idx) x[i] += alpha * (z[i] - x[i]);
            const double xmax = x.cwiseAbs().maxCoeff();
            for (auto i : idx) {
                if (z[i] <= 0.0 && (x[i] <= 1e-15 * xmax || x[i] <= 0.0)) {
                    x[i] = 0.0;
                    passive[static_cast<std::size_t>(i)] = 0;
                }
            }
            if ((x - prev).cwiseAbs().maxCoeff() > 0.0) moved = true;
            if (!passive[static_cast<std::size_t>(enter)] && !moved) {
                // Entering variable bounced straight back: numerically dependent.
                blocked[static_cast<std::size_t>(enter)] = 1;
                break;
            }
        }
        if (moved) std::fill(blocked.begin(), blocked.end(), 0);
    }

    for (Eigen::Index i = 0; i < k; ++i) x[i] = std::max(0.0, x[i]);
    res.kkt_residual = nnls_kkt_residual(g, h, x, scale);
    res.converged = res.kkt_residual <= tol;
    return res;
}

} // namespace geodiag
