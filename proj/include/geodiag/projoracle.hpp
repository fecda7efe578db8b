#pragma once

// Empirical N_crit by definition: project the manifolds onto a random
// N'-dimensional subspace and test homogeneous linear separability.
//
// The separability LP  max m  s.t.  s_i <w, p_i> >= m,  ||w||_inf <= 1
// is solved through its dual
//
//   m* = min_{mu in simplex}  || sum_i mu_i s_i p_i ||_1,
//
// written as  Q mu - e+ + e- = 0,  1^T mu = 1,  mu, e+, e- >= 0,
// minimize 1^T (e+ + e-). Putting mu_1 and one slack per row in the basis
// gives a feasible start, so a single simplex phase suffices.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "error.hpp"
#include "featureio.hpp"
#include "gluecap.hpp"
#include "linalg.hpp"
#include "parallel.hpp"
#include "rng.hpp"

namespace geodiag {

struct SeparabilityQuery {
    Matrix points;           // K x N'
    std::vector<int> signs;  // K, +1 / -1
    double margin_tol = 1e-9;
};

struct MarginLpResult {
    double margin = 0.0;     // m* at optimum, or an upper bound <= margin_tol on early exit
    bool early_exit = false;
    std::size_t pivots = 0;
};

namespace detail {

// Dense tableau simplex for the dual margin LP. Rows: N' sign rows plus the
// simplex row. Columns: mu (K), e+ (N'), e- (N').
class MarginSimplex {
public:
    MarginSimplex(const Matrix& q, double stop_below) : stop_below_(stop_below) {
        k_ = q.cols();
        n_ = q.rows();
        rows_ = n_ + 1;
        cols_ = k_ + 2 * n_;
        t_ = Matrix::Zero(rows_, cols_ + 1);
        t_.block(0, 0, n_, k_) = q;
        for (Eigen::Index j = 0; j < n_; ++j) {
            t_(j, k_ + j) = -1.0;
            t_(j, k_ + n_ + j) = 1.0;
        }
        t_.block(n_, 0, 1, k_).setOnes();
        t_(n_, cols_) = 1.0;
        cost_ = Vector::Zero(cols_);
        cost_.tail(2 * n_).setOnes();

        basis_.assign(static_cast<std::size_t>(rows_), -1);
        pivot(n_, 0);
        for (Eigen::Index j = 0; j < n_; ++j) pivot(j, q(j, 0) >= 0.0 ? k_ + j : k_ + n_ + j);
    }

    MarginLpResult solve(std::size_t max_pivots) {
        MarginLpResult res;
        constexpr double kReducedTol = 1e-11;
        constexpr double kPivotTol = 1e-11;
        std::size_t degenerate_run = 0;
        for (;;) {
            const double obj = objective();
            if (obj <= stop_below_) {
                res.margin = std::max(obj, 0.0);
                res.early_exit = true;
                break;
            }
            const Vector d = reduced_costs();
            const bool bland = degenerate_run > 50;
            Eigen::Index enter = -1;
            double best = -kReducedTol;
            for (Eigen::Index j = 0; j < cols_; ++j) {
                if (d[j] < best) {
                    enter = j;
                    if (bland) break;
                    best = d[j];
                }
            }
            if (enter < 0) {
                res.margin = std::max(obj, 0.0);
                break;
            }
            Eigen::Index leave = -1;
            double ratio = std::numeric_limits<double>::infinity();
            for (Eigen::Index i = 0; i < rows_; ++i) {
                const double a = t_(i, enter);
                if (a <= kPivotTol) continue;
                const double r = std::max(t_(i, cols_), 0.0) / a;
                if (r < ratio - 1e-15 ||
                    (r <= ratio + 1e-15 && leave >= 0 && basis_[static_cast<std::size_t>(i)] < basis_[static_cast<std::size_t>(leave)])) {
                    ratio = std::min(ratio, r);
                    leave = i;
                }
            }
            // The feasible set is bounded (mu on the simplex, e bounded by |Q mu|).
            require(leave >= 0, ErrorCode::LpFailure, "unbounded ray in a bounded margin LP");
            degenerate_run = ratio <= 1e-15 ? degenerate_run + 1 : 0;
            pivot(leave, enter);
            ++res.pivots;
            require(res.pivots <= max_pivots, ErrorCode::LpFailure,
                    "simplex exceeded " + std::to_string(max_pivots) + " pivots");
        }
        return res;
    }

private:
    void pivot(Eigen::Index r, Eigen::Index c) {
        const double p = t_(r, c);
        require(std::abs(p) > 0.0, ErrorCode::LpFailure, "zero pivot");
        t_.row(r) /= p;
        for (Eigen::Index i = 0; i < rows_; ++i) {
            if (i == r) continue;
            const double f = t_(i, c);
            if (f != 0.0) t_.row(i) -= f * t_.row(r);
        }
        basis_[static_cast<std::size_t>(r)] = c;
    }

    Vector basic_costs() const {
        Vector cb(rows_);
        for (Eigen::Index i = 0; i < rows_; ++i) cb[i] = cost_[basis_[static_cast<std::size_t>(i)]];
        return cb;
    }

    double objective() const { return basic_costs().dot(t_.col(cols_)); }

    Vector reduced_costs() const {
        return cost_ - (basic_costs().transpose() * t_.leftCols(cols_)).transpose();
    }

    Eigen::Index k_ = 0, n_ = 0, rows_ = 0, cols_ = 0;
    double stop_below_ = 0.0;
    Matrix t_;
    Vector cost_;
    std::vector<Eigen::Index> basis_;
};

} // namespace detail

// Optimal margin of the normalized problem. Rows are scaled to unit length
// first (separability is invariant to positive row scaling); zero rows stay
// zero and force m* = 0. Stops early once the dual objective drops to
// `stop_below`, since m* can only be smaller.
inline MarginLpResult separability_margin(const Matrix& points, const std::vector<int>& signs, double stop_below = -1.0) {
    require(points.rows() >= 1, ErrorCode::InvalidArgument, "separability needs at least one point");
    require(static_cast<Eigen::Index>(signs.size()) == points.rows(), ErrorCode::DimensionMismatch,
            "signs length differs from point count");
    Matrix q(points.cols(), points.rows());
    for (Eigen::Index i = 0; i < points.rows(); ++i) {
        const int s = signs[static_cast<std::size_t>(i)];
        require(s == 1 || s == -1, ErrorCode::InvalidArgument, "signs must be +1 or -1");
        const double norm = points.row(i).norm();
        if (norm > 0.0) q.col(i) = (static_cast<double>(s) / norm) * points.row(i).transpose();
        else q.col(i).setZero();
    }
    if (q.rows() == 0) return {0.0, false, 0};
    detail::MarginSimplex lp(q, stop_below);
    const std::size_t cap = 50 * static_cast<std::size_t>(q.rows() + 1 + q.cols() + 2 * q.rows());
    return lp.solve(cap);
}

inline bool check_separable(const SeparabilityQuery& q) {
    return separability_margin(q.points, q.signs, q.margin_tol).margin > q.margin_tol;
}

inline bool check_separable(const Matrix& points, const std::vector<int>& signs, double margin_tol = 1e-9) {
    return check_separable(SeparabilityQuery{points, signs, margin_tol});
}

// Dichotomy expanded to points, with the points stacked in manifold order.
inline std::pair<Matrix, std::vector<int>> expand_dichotomy(const std::vector<ClassManifold>& ms, const Dichotomy& y) {
    validate_manifolds(ms);
    validate_dichotomy(y, ms.size());
    std::vector<int> signs;
    for (std::size_t mu = 0; mu < ms.size(); ++mu) signs.insert(signs.end(), static_cast<std::size_t>(ms[mu].points.rows()), y.y[mu]);
    return {stack_points(ms), signs};
}

struct OracleConfig {
    std::size_t n_trials = 500;
    std::uint64_t seed = 0;
    double margin_tol = 1e-9;
    unsigned jobs = 1;
};

inline double estimate_p(const Matrix& points, const std::vector<int>& signs, std::size_t n_proj_dim,
                         const OracleConfig& cfg) {
    const auto n = points.cols();
    require(n_proj_dim >= 1 && static_cast<Eigen::Index>(n_proj_dim) <= n, ErrorCode::InvalidArgument,
            "projection dimension " + std::to_string(n_proj_dim) + " not in [1, " + std::to_string(n) + "]");
    require(cfg.n_trials >= 1, ErrorCode::InvalidArgument, "n_trials must be >= 1");
    std::vector<char> ok(cfg.n_trials, 0);
    parallel_for(cfg.n_trials, cfg.jobs, [&](std::size_t trial) {
        CounterRng rng(cfg.seed, {stream::kOracle, n_proj_dim, trial});
        const Matrix g = standard_normal(n, static_cast<Eigen::Index>(n_proj_dim), rng);
        ok[trial] = check_separable(points * g, signs, cfg.margin_tol) ? 1 : 0;
    });
    std::size_t count = 0;
    for (char c : ok) count += static_cast<std::size_t>(c);
    return static_cast<double>(count) / static_cast<double>(cfg.n_trials);
}

inline double estimate_p(const std::vector<ClassManifold>& ms, const Dichotomy& y, std::size_t n_proj_dim,
                         const OracleConfig& cfg) {
    const auto [points, signs] = expand_dichotomy(ms, y);
    return estimate_p(points, signs, n_proj_dim, cfg);
}

struct NcritEmpirical {
    std::size_t n_crit = 0;
    std::map<std::size_t, double> p_curve;
    std::size_t n_projections = 0;
    std::uint64_t seed = 0;
};

// Scans N' = 1..n_max. With full_curve = false the scan stops at the first
// N' whose estimate reaches 0.5.
inline NcritEmpirical empirical_ncrit(const std::vector<ClassManifold>& ms, const Dichotomy& y, std::size_t n_max,
                                      const OracleConfig& cfg, bool full_curve = false) {
    const auto [points, signs] = expand_dichotomy(ms, y);
    require(check_separable(points, signs, cfg.margin_tol), ErrorCode::NotSeparable,
            "manifolds are not linearly separable in the full space");
    n_max = std::min<std::size_t>(n_max, static_cast<std::size_t>(points.cols()));
    NcritEmpirical out;
    out.n_projections = cfg.n_trials;
    out.seed = cfg.seed;
    for (std::size_t np = 1; np <= n_max; ++np) {
        const double p = estimate_p(points, signs, np, cfg);
        out.p_curve[np] = p;
        if (p >= 0.5 && out.n_crit == 0) {
            out.n_crit = np;
            if (!full_curve) break;
        }
    }
    require(out.n_crit > 0, ErrorCode::NoCrossing, "no N' <= " + std::to_string(n_max) + " reached p >= 0.5");
    return out;
}

} // namespace geodiag
