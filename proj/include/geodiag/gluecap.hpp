#pragma once

// GLUE capacity estimation.
//
// For a dichotomy y and a Gaussian direction t the inner problem is
//
//   max_{lambda >= 0} ( <t, x> / ||x|| )^2,   x = sum_{mu,i} y^mu lambda^mu_i z^mu_i.
//
// For a fixed sign s of <t, x> this is the min-norm problem
// min ||x||^2 s.t. s<t,x> = 1, whose solution is the projection of s*t onto
// the cone spanned by the signed points (rescaled). That projection is an NNLS
// problem, so each branch is one nnls_gram() call and the value is
// ||proj_cone(s t)||^2.
//
// Anchor points are the lambda-weighted means of each manifold; the moments
// a, b, c of the anchor matrices give N_crit, D_eff, R_eff and Psi_eff.

#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "error.hpp"
#include "featureio.hpp"
#include "linalg.hpp"
#include "nnls.hpp"
#include "parallel.hpp"
#include "preprocess.hpp"
#include "rng.hpp"

namespace geodiag {

struct Dichotomy {
    std::vector<int> y;
};

inline void validate_dichotomy(const Dichotomy& d, std::size_t num_manifolds) {
    require(d.y.size() == num_manifolds, ErrorCode::DimensionMismatch,
            "dichotomy has " + std::to_string(d.y.size()) + " entries for " + std::to_string(num_manifolds) + " manifolds");
    bool pos = false, neg = false;
    for (int v : d.y) {
        require(v == 1 || v == -1, ErrorCode::InvalidArgument, "dichotomy entries must be +1 or -1");
        pos |= v == 1;
        neg |= v == -1;
    }
    require(pos && neg, ErrorCode::InvalidArgument, "dichotomy needs at least one +1 and one -1");
}

enum class DichotomyMode { OneVsRest, All };

inline std::string to_string(DichotomyMode m) { return m == DichotomyMode::OneVsRest ? "one-vs-rest" : "all"; }

inline DichotomyMode parse_dichotomy_mode(const std::string& s) {
    if (s == "one-vs-rest") return DichotomyMode::OneVsRest;
    if (s == "all") return DichotomyMode::All;
    throw Error(ErrorCode::InvalidArgument, "unknown dichotomy mode '" + s + "'");
}

// P = 2 always yields the single (+1, -1); its negation gives the same moments.
inline std::vector<Dichotomy> make_dichotomies(std::size_t p, DichotomyMode mode) {
    require(p >= 2, ErrorCode::InvalidArgument, "need at least 2 manifolds for a dichotomy");
    if (p == 2) return {Dichotomy{{1, -1}}};
    std::vector<Dichotomy> out;
    if (mode == DichotomyMode::OneVsRest) {
        for (std::size_t mu = 0; mu < p; ++mu) {
            Dichotomy d{std::vector<int>(p, -1)};
            d.y[mu] = 1;
            out.push_back(d);
        }
        return out;
    }
    require(p < 24, ErrorCode::InvalidArgument, "'all' dichotomies limited to fewer than 24 manifolds");
    const std::uint64_t count = std::uint64_t{1} << p;
    for (std::uint64_t bits = 1; bits + 1 < count; ++bits) {
        Dichotomy d{std::vector<int>(p)};
        for (std::size_t mu = 0; mu < p; ++mu) d.y[mu] = (bits >> mu) & 1u ? 1 : -1;
        out.push_back(d);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Inner QP

struct QPSolution {
    Vector lambda;          // per point, manifold-major; scaled so sign*<t,x> = 1
    double value = 0.0;     // (<t,x>/||x||)^2 at the optimum
    int sign = 0;           // +1 / -1 winning branch, 0 if both infeasible
    bool converged = false;
    double kkt_residual = 0.0;
};

inline void validate_manifolds(const std::vector<ClassManifold>& ms) {
    require(!ms.empty(), ErrorCode::InvalidArgument, "no manifolds");
    const auto n = ms.front().points.cols();
    for (const auto& m : ms) {
        require(m.points.rows() >= 1, ErrorCode::InvalidArgument, "empty manifold " + std::to_string(m.class_id));
        require(m.points.cols() == n, ErrorCode::DimensionMismatch, "manifolds differ in ambient dimension");
    }
}

// Signed point matrix and its Gram matrix for one (manifolds, y) pair, reused
// across directions.
class InnerQp {
public:
    InnerQp(const std::vector<ClassManifold>& ms, const Dichotomy& y) {
        validate_manifolds(ms);
        validate_dichotomy(y, ms.size());
        Eigen::Index rows = 0;
        for (const auto& m : ms) {
            offsets_.push_back(rows);
            rows += m.points.rows();
        }
        offsets_.push_back(rows);
        signed_ = Matrix(rows, ms.front().points.cols());
        for (std::size_t mu = 0; mu < ms.size(); ++mu)
            signed_.middleRows(offsets_[mu], ms[mu].points.rows()) = static_cast<double>(y.y[mu]) * ms[mu].points;
        gram_ = signed_ * signed_.transpose();
    }

    const Matrix& signed_points() const { return signed_; }
    const Matrix& gram() const { return gram_; }
    const std::vector<Eigen::Index>& offsets() const { return offsets_; }

    QPSolution solve(const Vector& t, double tol = 1e-8) const {
        require(t.size() == signed_.cols(), ErrorCode::DimensionMismatch, "direction dimension differs from points");
        const Vector h = signed_ * t;
        const double t2 = t.squaredNorm();
        const std::size_t cap = 50 * static_cast<std::size_t>(signed_.rows());

        QPSolution best;
        best.lambda = Vector::Zero(signed_.rows());
        best.converged = true;
        double worst_kkt = 0.0;
        bool all_converged = true;
        for (int s : {1, -1}) {
            const NnlsResult r = nnls_gram(gram_, s * h, tol, cap);
            worst_kkt = std::max(worst_kkt, r.kkt_residual);
            all_converged = all_converged && r.converged;
            const double norm2 = r.x.dot(gram_ * r.x);
            const double dot = s * h.dot(r.x);
            // Branch is infeasible when the projection onto the cone vanishes.
            if (!(norm2 > 1e-14 * std::max(t2, 1e-300)) || dot <= 0.0) continue;
            const double value = std::min(dot * dot / norm2, t2);
            if (best.sign == 0 || value > best.value) {
                best.value = value;
                best.sign = s;
                best.lambda = r.x / dot;
                best.kkt_residual = r.kkt_residual;
                best.converged = r.converged;
            }
        }
        if (best.sign == 0) {
            best.kkt_residual = worst_kkt;
            best.converged = all_converged;
        }
        return best;
    }

private:
    Matrix signed_;
    Matrix gram_;
    std::vector<Eigen::Index> offsets_;
};

inline QPSolution solve_inner_qp(const std::vector<ClassManifold>& ms, const Dichotomy& y, const Vector& t,
                                 double tol = 1e-8) {
    return InnerQp(ms, y).solve(t, tol);
}

// ---------------------------------------------------------------------------
// Anchors and per-sample moments

struct AnchorSet {
    Matrix anchors;                      // P x N
    Vector mass;                         // per-manifold sum of lambda
    std::vector<bool> centroid_fallback; // manifold received (relatively) zero mass
};

// s^mu = lambda-weighted mean of manifold mu. Manifolds whose mass is below
// mass_floor * total mass fall back to their centroid.
inline AnchorSet extract_anchors(const QPSolution& sol, const std::vector<ClassManifold>& ms, double mass_floor = 1e-12) {
    validate_manifolds(ms);
    const auto p = static_cast<Eigen::Index>(ms.size());
    AnchorSet out;
    out.anchors.resize(p, ms.front().points.cols());
    out.mass.resize(p);
    Eigen::Index offset = 0;
    for (Eigen::Index mu = 0; mu < p; ++mu) {
        const auto& pts = ms[static_cast<std::size_t>(mu)].points;
        out.mass[mu] = sol.lambda.size() ? sol.lambda.segment(offset, pts.rows()).sum() : 0.0;
        offset += pts.rows();
    }
    require(sol.lambda.size() == 0 || sol.lambda.size() == offset, ErrorCode::DimensionMismatch,
            "lambda length does not match manifolds");
    const double total = out.mass.sum();
    offset = 0;
    for (Eigen::Index mu = 0; mu < p; ++mu) {
        const auto& pts = ms[static_cast<std::size_t>(mu)].points;
        const bool fallback = !(total > 0.0) || out.mass[mu] < mass_floor * total || out.mass[mu] <= 0.0;
        out.centroid_fallback.push_back(fallback);
        if (fallback) out.anchors.row(mu) = pts.colwise().mean();
        else out.anchors.row(mu) = (sol.lambda.segment(offset, pts.rows()).transpose() * pts) / out.mass[mu];
        offset += pts.rows();
    }
    return out;
}

struct CapacitySample {
    double a = 0.0;
    double b = std::numeric_limits<double>::quiet_NaN(); // needs anchor centers
    double c = std::numeric_limits<double>::quiet_NaN();
};

inline Matrix signed_rows(const Matrix& s, const Dichotomy& y) {
    Matrix out = s;
    for (Eigen::Index mu = 0; mu < s.rows(); ++mu) out.row(mu) *= static_cast<double>(y.y[static_cast<std::size_t>(mu)]);
    return out;
}

// a = (S_y t)^T (S_y S_y^T)^+ (S_y t); b, c from the center/axis split
// S_y = S_{y,0} + S_{y,1} when anchor centers are supplied.
inline CapacitySample capacity_sample(const Matrix& anchors, const Dichotomy& y, const Vector& t,
                                      const Matrix* anchor_centers = nullptr) {
    require(anchors.rows() == static_cast<Eigen::Index>(y.y.size()), ErrorCode::DimensionMismatch,
            "anchor rows differ from dichotomy length");
    require(anchors.cols() == t.size(), ErrorCode::DimensionMismatch, "anchor dimension differs from direction");
    CapacitySample out;
    const Matrix sy = signed_rows(anchors, y);
    const Matrix gram = sy * sy.transpose();
    out.a = pinv_quadratic(gram, sy * t);
    if (anchor_centers) {
        require(anchor_centers->rows() == anchors.rows() && anchor_centers->cols() == anchors.cols(),
                ErrorCode::DimensionMismatch, "anchor centers shape");
        const double reference = spectral_max(gram);
        const Matrix sy0 = signed_rows(*anchor_centers, y);
        const Matrix sy1 = sy - sy0;
        const Vector v = sy1 * t;
        const Matrix g1 = sy1 * sy1.transpose();
        out.b = pinv_quadratic(g1, v, reference);
        out.c = pinv_quadratic(sy0 * sy0.transpose() + g1, v, reference);
    }
    return out;
}

inline CapacitySample capacity_sample(const std::vector<ClassManifold>& ms, const Dichotomy& y, const Vector& t,
                                      const Matrix* anchor_centers = nullptr, double tol = 1e-8) {
    const auto sol = solve_inner_qp(ms, y, t, tol);
    return capacity_sample(extract_anchors(sol, ms).anchors, y, t, anchor_centers);
}

// ---------------------------------------------------------------------------
// Monte-Carlo estimate

struct Moment {
    double mean = 0.0;
    double se = 0.0;
};

inline Moment moment_of(const std::vector<double>& xs) {
    Moment m;
    if (xs.empty()) return m;
    double sum = 0.0;
    for (double x : xs) sum += x;
    m.mean = sum / static_cast<double>(xs.size());
    if (xs.size() > 1) {
        double ss = 0.0;
        for (double x : xs) ss += (x - m.mean) * (x - m.mean);
        m.se = std::sqrt(ss / static_cast<double>(xs.size() - 1)) / std::sqrt(static_cast<double>(xs.size()));
    }
    return m;
}

struct CapacityEstimate {
    Moment a, b, c;
    double alpha = 0.0;   // P / mean_a
    double n_crit = 0.0;  // mean_a
    double d_eff = 0.0;   // mean_b / P
    double r_eff = 0.0;   // sqrt(mean_c / (mean_b - mean_c))
    double psi_eff = 0.0; // mean_c / mean_a
    std::size_t num_manifolds = 0;
    std::size_t n_dirs = 0;  // samples entering the moments
    std::uint64_t seed = 0;
};

// Effective geometry from the three moments.
inline void derive_geometry(CapacityEstimate& e) {
    const double p = static_cast<double>(e.num_manifolds);
    const double a = e.a.mean, b = e.b.mean, c = e.c.mean;
    e.n_crit = a;
    e.alpha = a > 0.0 ? p / a : std::numeric_limits<double>::infinity();
    e.d_eff = b / p;
    if (c <= 0.0) e.r_eff = 0.0;
    else if (b > c) e.r_eff = std::sqrt(c / (b - c));
    else e.r_eff = std::numeric_limits<double>::infinity();
    e.psi_eff = a > 0.0 ? c / a : 0.0;
}

struct AnchorStats {
    std::size_t samples = 0;
    std::size_t fallback_count = 0; // manifold-sample pairs that used the centroid
    std::size_t nonconverged = 0;
    std::size_t infeasible = 0;     // both sign branches empty
};

struct CapacityConfig {
    std::size_t n_dirs = 200;
    std::uint64_t seed = 0;
    double tol = 1e-8;
    unsigned jobs = 1;
    bool store_anchors = false;
    double mass_floor = 1e-12;
};

struct CapacityResult {
    CapacityEstimate estimate;
    AnchorStats stats;
    Matrix anchor_centers;                     // P x N, s^mu_0
    bool anchors_stored = false;
    std::vector<Matrix> anchors;               // per used sample, P x N
    std::vector<std::size_t> dichotomy_index;  // per used sample
    std::vector<CapacitySample> samples;       // per used sample
};

// Draw k of the (y, t) stream: dichotomy index then direction, both from one
// counter stream keyed by (seed, k).
inline std::pair<std::size_t, Vector> draw_direction(std::uint64_t seed, std::size_t k, std::size_t n_dichotomies,
                                                     Eigen::Index dim) {
    CounterRng rng(seed, {stream::kGlueDirections, k});
    const auto yi = static_cast<std::size_t>(rng.below(n_dichotomies));
    return {yi, standard_normal(dim, rng)};
}

// Two passes over the same stream: pass one solves the QPs and averages the
// anchors into the centers s^mu_0, pass two splits every anchor into center
// and axis parts and evaluates (a, b, c). Reductions run in draw order.
inline CapacityResult estimate_capacity(const std::vector<ClassManifold>& ms, const std::vector<Dichotomy>& dichotomies,
                                        const CapacityConfig& cfg) {
    validate_manifolds(ms);
    require(cfg.n_dirs >= 2, ErrorCode::InvalidArgument, "n_dirs must be >= 2");
    require(!dichotomies.empty(), ErrorCode::InvalidArgument, "no dichotomies");
    std::vector<InnerQp> qps;
    qps.reserve(dichotomies.size());
    for (const auto& d : dichotomies) qps.emplace_back(ms, d);

    const auto n = ms.front().points.cols();
    const auto p = static_cast<Eigen::Index>(ms.size());
    struct Draw {
        std::size_t yi = 0;
        Vector t;
        Matrix anchors;
        bool converged = false;
        bool infeasible = false;
        std::size_t fallbacks = 0;
        CapacitySample sample;
    };
    std::vector<Draw> draws(cfg.n_dirs);

    parallel_for(cfg.n_dirs, cfg.jobs, [&](std::size_t k) {
        Draw& d = draws[k];
        auto [yi, t] = draw_direction(cfg.seed, k, dichotomies.size(), n);
        d.yi = yi;
        d.t = std::move(t);
        const QPSolution sol = qps[yi].solve(d.t, cfg.tol);
        const AnchorSet as = extract_anchors(sol, ms, cfg.mass_floor);
        d.anchors = as.anchors;
        d.converged = sol.converged;
        d.infeasible = sol.sign == 0;
        for (bool f : as.centroid_fallback) d.fallbacks += f ? 1 : 0;
    });

    CapacityResult res;
    res.stats.samples = cfg.n_dirs;
    Matrix centers = Matrix::Zero(p, n);
    std::size_t used = 0;
    for (const auto& d : draws) {
        if (!d.converged) {
            ++res.stats.nonconverged;
            continue;
        }
        centers += d.anchors;
        ++used;
        res.stats.fallback_count += d.fallbacks;
        res.stats.infeasible += d.infeasible ? 1 : 0;
    }
    require(used >= 2, ErrorCode::TooFewConverged,
            std::to_string(used) + " of " + std::to_string(cfg.n_dirs) + " samples converged");
    centers /= static_cast<double>(used);

    parallel_for(cfg.n_dirs, cfg.jobs, [&](std::size_t k) {
        Draw& d = draws[k];
        if (d.converged) d.sample = capacity_sample(d.anchors, dichotomies[d.yi], d.t, &centers);
    });

    std::vector<double> as, bs, cs;
    for (auto& d : draws) {
        if (!d.converged) continue;
        as.push_back(d.sample.a);
        bs.push_back(d.sample.b);
        cs.push_back(d.sample.c);
        res.samples.push_back(d.sample);
        res.dichotomy_index.push_back(d.yi);
        if (cfg.store_anchors) res.anchors.push_back(std::move(d.anchors));
    }
    res.anchors_stored = cfg.store_anchors;
    res.anchor_centers = std::move(centers);

    CapacityEstimate& e = res.estimate;
    e.a = moment_of(as);
    e.b = moment_of(bs);
    e.c = moment_of(cs);
    e.num_manifolds = ms.size();
    e.n_dirs = used;
    e.seed = cfg.seed;
    derive_geometry(e);
    return res;
}

// ---------------------------------------------------------------------------
// Alignment

struct AlignmentMatrix {
    Matrix rho_center; // |<s0^mu, s0^nu>|
    Matrix rho_axis;   // E |<s1^mu, s1^nu>|
    Matrix psi_ca;     // E |<s0^mu, s1^nu>|
};

// Unnormalized inner products, averaged over the stored (y, t) stream.
inline AlignmentMatrix alignment_measures(const CapacityResult& res) {
    require(res.anchors_stored && !res.anchors.empty(), ErrorCode::AnchorsNotStored,
            "run estimate_capacity with store_anchors = true");
    const Matrix& s0 = res.anchor_centers;
    const auto p = s0.rows();
    AlignmentMatrix out;
    out.rho_center = (s0 * s0.transpose()).cwiseAbs();
    out.rho_axis = Matrix::Zero(p, p);
    out.psi_ca = Matrix::Zero(p, p);
    for (const auto& s : res.anchors) {
        const Matrix s1 = s - s0;
        out.rho_axis += (s1 * s1.transpose()).cwiseAbs();
        out.psi_ca += (s0 * s1.transpose()).cwiseAbs();
    }
    const double count = static_cast<double>(res.anchors.size());
    out.rho_axis /= count;
    out.psi_ca /= count;
    return out;
}

// ---------------------------------------------------------------------------
// Repeated pairwise analysis on a bundle

struct GlueConfig {
    std::size_t n_dirs = 200;
    double tol = 1e-8;
    unsigned jobs = 1;
    DichotomyMode dichotomies = DichotomyMode::OneVsRest;
    double mass_floor = 1e-12;
};

struct GlueRow {
    std::size_t rep = 0;
    std::vector<std::uint32_t> classes;
    CapacityEstimate estimate;
    AnchorStats stats;
};

struct PairwiseReport {
    SubsampleSpec subsample;
    WhitenConfig whiten;
    GlueConfig glue;
    std::vector<GlueRow> rows;
    // Per measure: mean over repetitions and std/sqrt(reps) (absent for one repetition).
    std::map<std::string, std::pair<double, std::optional<double>>> aggregate;
};

inline const std::vector<std::string>& glue_measure_names() {
    static const std::vector<std::string> names = {"d_eff", "r_eff", "psi_eff", "n_crit", "alpha"};
    return names;
}

inline double glue_measure(const CapacityEstimate& e, const std::string& name) {
    if (name == "d_eff") return e.d_eff;
    if (name == "r_eff") return e.r_eff;
    if (name == "psi_eff") return e.psi_eff;
    if (name == "n_crit") return e.n_crit;
    if (name == "alpha") return e.alpha;
    throw Error(ErrorCode::InvalidArgument, "unknown GLUE measure '" + name + "'");
}

// Per-repetition estimate on one subsample; exposed for callers that already
// hold the subsampled manifolds.
inline CapacityResult glue_on_manifolds(const std::vector<ClassManifold>& picked, const WhitenConfig& whiten,
                                        const GlueConfig& cfg, std::uint64_t seed, unsigned jobs) {
    const auto whitened = unstack_points(picked, gaussianize(stack_points(picked), whiten));
    CapacityConfig cc;
    cc.n_dirs = cfg.n_dirs;
    cc.seed = seed;
    cc.tol = cfg.tol;
    cc.jobs = jobs;
    cc.mass_floor = cfg.mass_floor;
    return estimate_capacity(whitened, make_dichotomies(whitened.size(), cfg.dichotomies), cc);
}

inline std::uint64_t repetition_seed(std::uint64_t seed, std::size_t rep) {
    return stream_key(seed, {stream::kGlueRepetition, rep});
}

inline PairwiseReport glue_pairwise(const FeatureBundle& bundle, const SubsampleSpec& spec, const WhitenConfig& whiten,
                                    const GlueConfig& cfg) {
    validate_subsample(bundle, spec);
    require(spec.classes_per_draw >= 2, ErrorCode::InvalidArgument, "GLUE needs at least 2 classes per draw");
    PairwiseReport rep;
    rep.subsample = spec;
    rep.whiten = whiten;
    rep.glue = cfg;
    rep.rows.resize(spec.repetitions);

    // Parallelize across repetitions when there are several, else inside.
    const unsigned outer = spec.repetitions > 1 ? cfg.jobs : 1;
    const unsigned inner = spec.repetitions > 1 ? 1 : cfg.jobs;
    parallel_for(spec.repetitions, outer, [&](std::size_t r) {
        const auto picked = subsample(bundle, spec, r);
        const auto res = glue_on_manifolds(picked, whiten, cfg, repetition_seed(spec.seed, r), inner);
        GlueRow& row = rep.rows[r];
        row.rep = r;
        for (const auto& m : picked) row.classes.push_back(m.class_id);
        row.estimate = res.estimate;
        row.stats = res.stats;
    });

    for (const auto& name : glue_measure_names()) {
        std::vector<double> xs;
        for (const auto& row : rep.rows) xs.push_back(glue_measure(row.estimate, name));
        const Moment m = moment_of(xs);
        rep.aggregate[name] = {m.mean, xs.size() > 1 ? std::optional<double>(m.se) : std::nullopt};
    }
    return rep;
}

// ---------------------------------------------------------------------------
// JSON

inline nlohmann::json finite_or_null(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }

inline nlohmann::json to_json(const CapacityEstimate& e) {
    return {{"mean_a", finite_or_null(e.a.mean)}, {"stderr_a", finite_or_null(e.a.se)},
            {"mean_b", finite_or_null(e.b.mean)}, {"stderr_b", finite_or_null(e.b.se)},
            {"mean_c", finite_or_null(e.c.mean)}, {"stderr_c", finite_or_null(e.c.se)},
            {"alpha", finite_or_null(e.alpha)},   {"n_crit", finite_or_null(e.n_crit)},
            {"d_eff", finite_or_null(e.d_eff)},   {"r_eff", finite_or_null(e.r_eff)},
            {"psi_eff", finite_or_null(e.psi_eff)}, {"num_manifolds", e.num_manifolds},
            {"n_dirs", e.n_dirs},                 {"seed", e.seed}};
}

inline nlohmann::json to_json(const PairwiseReport& r) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& row : r.rows) {
        rows.push_back({{"rep", row.rep},
                        {"class_pair", row.classes},
                        {"d_eff", finite_or_null(row.estimate.d_eff)},
                        {"r_eff", finite_or_null(row.estimate.r_eff)},
                        {"psi_eff", finite_or_null(row.estimate.psi_eff)},
                        {"n_crit", finite_or_null(row.estimate.n_crit)},
                        {"alpha", finite_or_null(row.estimate.alpha)},
                        {"fallback_count", row.stats.fallback_count},
                        {"nonconverged", row.stats.nonconverged}});
    }
    nlohmann::json agg = nlohmann::json::object();
    for (const auto& [name, v] : r.aggregate) {
        agg[name] = {{"mean", finite_or_null(v.first)},
                     {"stderr", v.second ? finite_or_null(*v.second) : nlohmann::json(nullptr)}};
    }
    return {{"config",
             {{"classes_per_draw", r.subsample.classes_per_draw},
              {"points_per_class", r.subsample.points_per_class},
              {"repetitions", r.subsample.repetitions},
              {"seed", r.subsample.seed},
              {"whiten", to_string(r.whiten.mode)},
              {"ridge_fraction", r.whiten.ridge_fraction},
              {"n_dirs", r.glue.n_dirs},
              {"qp_tol", r.glue.tol},
              {"dichotomies", to_string(r.glue.dichotomies)},
              {"pinv_relative_cutoff", kPinvRelativeCutoff}}},
            {"repetitions", rows},
            {"aggregate", agg}};
}

} // namespace geodiag
