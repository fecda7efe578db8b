#pragma once

// Baseline markers (statistical, spectral, Neural Collapse, logit scores) and
// compute_all, which gathers them together with the GLUE geometry into one
// MarkerReport.

#include <algorithm>
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
#include "gluecap.hpp"
#include "linalg.hpp"
#include "parallel.hpp"
#include "preprocess.hpp"
#include "rng.hpp"

namespace geodiag {

// ---------------------------------------------------------------------------
// Statistical summaries

inline double sparsity(const Matrix& x, double eps = 1e-6) {
    if (x.size() == 0) return 0.0;
    return static_cast<double>((x.array().abs() > eps).count()) / static_cast<double>(x.size());
}

// Mean absolute off-diagonal entry of the feature covariance.
inline double mean_covariance(const Matrix& x) {
    require(x.rows() >= 2 && x.cols() >= 2, ErrorCode::InvalidArgument, "mean_covariance needs M >= 2 and N >= 2");
    const Matrix cov = covariance(x);
    const double off = cov.cwiseAbs().sum() - cov.diagonal().cwiseAbs().sum();
    const double n = static_cast<double>(x.cols());
    return off / (n * (n - 1.0));
}

inline constexpr Eigen::Index kExactPairLimit = 10000;
inline constexpr std::size_t kSampledPairs = 1000000;

namespace detail {

// Mean of f(i, j) over unordered pairs: exact up to kExactPairLimit rows,
// otherwise over kSampledPairs uniformly drawn pairs.
template <class F>
double mean_over_pairs(Eigen::Index m, std::uint64_t seed, std::uint64_t which, F&& f) {
    double sum = 0.0;
    if (m <= kExactPairLimit) {
        std::size_t count = 0;
        for (Eigen::Index i = 0; i < m; ++i)
            for (Eigen::Index j = i + 1; j < m; ++j) {
                sum += f(i, j);
                ++count;
            }
        return count ? sum / static_cast<double>(count) : 0.0;
    }
    CounterRng rng(seed, {stream::kPairs, which});
    const auto mm = static_cast<std::uint64_t>(m);
    for (std::size_t k = 0; k < kSampledPairs; ++k) {
        const auto i = static_cast<Eigen::Index>(rng.below(mm));
        auto j = static_cast<Eigen::Index>(rng.below(mm - 1));
        if (j >= i) ++j;
        sum += f(i, j);
    }
    return sum / static_cast<double>(kSampledPairs);
}

} // namespace detail

inline double mean_pairwise_distance(const Matrix& x, std::uint64_t seed = 0) {
    require(x.rows() >= 2, ErrorCode::InvalidArgument, "mean_pairwise_distance needs M >= 2");
    return detail::mean_over_pairs(x.rows(), seed, 0, [&](Eigen::Index i, Eigen::Index j) { return (x.row(i) - x.row(j)).norm(); });
}

struct PairwiseAngle {
    double value = 0.0;    // radians
    std::size_t zero_rows = 0;
};

// Zero rows are excluded before pairing.
inline PairwiseAngle mean_pairwise_angle(const Matrix& x, std::uint64_t seed = 0) {
    const auto normalized = l2_normalize_rows(x);
    PairwiseAngle out;
    out.zero_rows = normalized.zero_rows.size();
    const auto kept = x.rows() - static_cast<Eigen::Index>(out.zero_rows);
    require(x.rows() >= 2, ErrorCode::InvalidArgument, "mean_pairwise_angle needs M >= 2");
    require(kept >= 1, ErrorCode::InvalidArgument, "all rows are zero");
    require(kept >= 2, ErrorCode::InvalidArgument, "fewer than 2 nonzero rows");
    Matrix u(kept, x.cols());
    Eigen::Index r = 0;
    std::size_t z = 0;
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        if (z < normalized.zero_rows.size() && normalized.zero_rows[z] == i) {
            ++z;
            continue;
        }
        u.row(r++) = normalized.rows.row(i);
    }
    out.value = detail::mean_over_pairs(kept, seed, 1, [&](Eigen::Index i, Eigen::Index j) {
        return std::acos(std::clamp(u.row(i).dot(u.row(j)), -1.0, 1.0));
    });
    return out;
}

enum class Statistic { Sparsity, MeanCovariance, MeanDistance, MeanAngle };

inline double apply_statistic(Statistic s, const Matrix& x, std::uint64_t seed = 0) {
    switch (s) {
    case Statistic::Sparsity: return sparsity(x);
    case Statistic::MeanCovariance: return mean_covariance(x);
    case Statistic::MeanDistance: return mean_pairwise_distance(x, seed);
    case Statistic::MeanAngle: return mean_pairwise_angle(x, seed).value;
    }
    return 0.0;
}

// Statistic per class, unweighted mean over classes.
inline double per_class_variant(Statistic s, const std::vector<ClassManifold>& ms, std::uint64_t seed = 0) {
    require(!ms.empty(), ErrorCode::InvalidArgument, "no classes");
    double sum = 0.0;
    for (const auto& m : ms) sum += apply_statistic(s, m.points, stream_key(seed, {m.class_id}));
    return sum / static_cast<double>(ms.size());
}

// ---------------------------------------------------------------------------
// Spectral markers

struct ClassAverage {
    double value = 0.0;
    std::vector<std::uint32_t> degenerate_classes; // classes whose covariance is zero
};

inline double participation_ratio_of(const Vector& eigenvalues) {
    const double s1 = eigenvalues.sum();
    const double s2 = eigenvalues.squaredNorm();
    return s2 > 0.0 ? s1 * s1 / s2 : 0.0;
}

// Mean over classes of (sum lambda)^2 / sum lambda^2 of the class covariance.
inline ClassAverage participation_ratio(const std::vector<ClassManifold>& ms) {
    require(!ms.empty(), ErrorCode::InvalidArgument, "no classes");
    ClassAverage out;
    for (const auto& m : ms) {
        require(m.points.rows() >= 2, ErrorCode::InvalidArgument, "class " + std::to_string(m.class_id) + " has < 2 points");
        const Vector ev = symmetric_eigenvalues_desc(covariance(m.points));
        if (!(ev.size() && ev[0] > 0.0)) out.degenerate_classes.push_back(m.class_id);
        else out.value += participation_ratio_of(ev);
    }
    out.value /= static_cast<double>(ms.size());
    return out;
}

inline double numerical_rank_of(const Vector& spectrum_desc, double tau = 1e-3) {
    if (spectrum_desc.size() == 0 || !(spectrum_desc[0] > 0.0)) return 0.0;
    const double cut = tau * spectrum_desc[0];
    return static_cast<double>((spectrum_desc.array() >= cut).count());
}

// Per-class count of covariance singular values >= tau * sigma_1, averaged.
inline ClassAverage numerical_rank(const std::vector<ClassManifold>& ms, double tau = 1e-3) {
    require(!ms.empty(), ErrorCode::InvalidArgument, "no classes");
    ClassAverage out;
    for (const auto& m : ms) {
        const Vector ev = symmetric_eigenvalues_desc(covariance(m.points, 0));
        if (!(ev.size() && ev[0] > 0.0)) out.degenerate_classes.push_back(m.class_id);
        out.value += numerical_rank_of(ev, tau);
    }
    out.value /= static_cast<double>(ms.size());
    return out;
}

struct ScatterPair {
    Matrix sigma_w; // pooled within-class covariance
    Matrix sigma_b; // covariance of class means about the global mean
};

inline ScatterPair scatter_matrices(const std::vector<ClassManifold>& ms) {
    require(!ms.empty(), ErrorCode::InvalidArgument, "no classes");
    const auto n = ms.front().points.cols();
    Eigen::Index total = 0;
    Vector global = Vector::Zero(n);
    for (const auto& m : ms) {
        total += m.points.rows();
        global += m.points.colwise().sum().transpose();
    }
    global /= static_cast<double>(total);
    ScatterPair s{Matrix::Zero(n, n), Matrix::Zero(n, n)};
    for (const auto& m : ms) {
        const Vector mean = column_mean(m.points);
        const Matrix centered = m.points.rowwise() - mean.transpose();
        s.sigma_w += centered.transpose() * centered;
        const Vector d = mean - global;
        s.sigma_b += d * d.transpose();
    }
    s.sigma_w /= static_cast<double>(total);
    s.sigma_b /= static_cast<double>(ms.size());
    return s;
}

// tr(Sigma_W Sigma_B^+) / P with Sigma_B directions below tau * lambda_max dropped.
inline double nc1_from_scatter(const ScatterPair& s, std::size_t num_classes, double tau = 1e-3) {
    require(num_classes >= 2, ErrorCode::InvalidArgument, "nc1 needs at least 2 classes");
    Eigen::SelfAdjointEigenSolver<Matrix> es(s.sigma_b);
    require(es.info() == Eigen::Success, ErrorCode::EigenFailure, "between-class scatter");
    const Vector& ev = es.eigenvalues();
    const double top = ev.size() ? ev.maxCoeff() : 0.0;
    require(top > 0.0, ErrorCode::InvalidArgument, "between-class scatter is zero");
    const Matrix& v = es.eigenvectors();
    double trace = 0.0;
    for (Eigen::Index i = 0; i < ev.size(); ++i) {
        if (ev[i] < tau * top) continue;
        trace += v.col(i).dot(s.sigma_w * v.col(i)) / ev[i];
    }
    return trace / static_cast<double>(num_classes);
}

inline double nc1(const std::vector<ClassManifold>& ms, double tau = 1e-3) {
    return nc1_from_scatter(scatter_matrices(ms), ms.size(), tau);
}

// ---------------------------------------------------------------------------
// Logit markers

struct LogitMarkers {
    double confidence = 0.0; // mean max softmax probability
    double entropy = 0.0;    // mean softmax entropy, nats
    double energy = 0.0;     // mean -T log sum exp(logit / T)
};

inline LogitMarkers logit_markers(const Matrix& logits, double temperature = 1.0) {
    require(logits.rows() >= 1 && logits.cols() >= 1, ErrorCode::InvalidArgument, "empty logits");
    require(temperature > 0.0, ErrorCode::InvalidArgument, "temperature must be > 0");
    LogitMarkers out;
    for (Eigen::Index i = 0; i < logits.rows(); ++i) {
        const auto row = logits.row(i);
        const double mx = row.maxCoeff();
        const Eigen::RowVectorXd e = (row.array() - mx).exp();
        const double z = e.sum();
        const Eigen::RowVectorXd p = e / z;
        out.confidence += p.maxCoeff();
        double h = 0.0;
        for (Eigen::Index j = 0; j < p.size(); ++j)
            if (p[j] > 0.0) h -= p[j] * std::log(p[j]);
        out.entropy += h;
        const double mt = mx / temperature;
        const double zt = (row.array() / temperature - mt).exp().sum();
        out.energy += -temperature * (mt + std::log(zt));
    }
    const double m = static_cast<double>(logits.rows());
    out.confidence /= m;
    out.entropy /= m;
    out.energy /= m;
    return out;
}

// ---------------------------------------------------------------------------
// Marker report

struct MarkerValue {
    double value = 0.0;
    std::optional<double> se;
};

struct MarkerReport {
    std::map<std::string, MarkerValue> markers;
    nlohmann::json provenance = nlohmann::json::object();
    std::vector<std::string> warnings;

    bool has(const std::string& name) const { return markers.count(name) > 0; }
};

inline const std::vector<std::string>& baseline_marker_names() {
    static const std::vector<std::string> names = {
        "sparsity",      "sparsity_per_class",      "mean_covariance", "mean_covariance_per_class",
        "mean_distance", "mean_distance_per_class", "mean_angle",      "mean_angle_per_class",
        "participation_ratio", "nc1", "numerical_rank"};
    return names;
}

inline const std::vector<std::string>& logit_marker_names() {
    static const std::vector<std::string> names = {"confidence", "entropy", "energy"};
    return names;
}

inline std::vector<std::string> marker_catalogue() {
    std::vector<std::string> all = baseline_marker_names();
    for (const auto& n : logit_marker_names()) all.push_back(n);
    for (const auto& n : glue_measure_names()) all.push_back(n);
    return all;
}

inline bool is_glue_marker(const std::string& name) {
    const auto& g = glue_measure_names();
    return std::find(g.begin(), g.end(), name) != g.end();
}

inline bool is_logit_marker(const std::string& name) {
    const auto& l = logit_marker_names();
    return std::find(l.begin(), l.end(), name) != l.end();
}

struct MarkerConfig {
    // Set: every repetition computes all markers on one subsample and the
    // report holds mean and std/sqrt(reps). Unset: baselines on the full
    // bundle (no stderr) and GLUE over glue_subsample.
    std::optional<SubsampleSpec> subsample;
    SubsampleSpec glue_subsample;
    std::vector<std::string> selected; // empty: whole catalogue
    WhitenConfig whiten;
    GlueConfig glue;
    double sparsity_eps = 1e-6;
    double spectral_tau = 1e-3;
    double energy_temperature = 1.0;
    std::uint64_t seed = 0; // pair subsampling for large M
};

namespace detail {

inline std::map<std::string, double> baseline_values(const FeatureBundle& b, const std::vector<std::string>& wanted,
                                                     const MarkerConfig& cfg, std::uint64_t seed) {
    auto want = [&](const std::string& n) { return std::find(wanted.begin(), wanted.end(), n) != wanted.end(); };
    std::map<std::string, double> out;
    const auto ms = group_by_class(b);
    Matrix x;
    auto features = [&]() -> const Matrix& {
        if (x.size() == 0) x = to_double(b.features);
        return x;
    };
    if (want("sparsity")) out["sparsity"] = sparsity(features(), cfg.sparsity_eps);
    if (want("sparsity_per_class")) {
        double s = 0.0;
        for (const auto& m : ms) s += sparsity(m.points, cfg.sparsity_eps);
        out["sparsity_per_class"] = s / static_cast<double>(ms.size());
    }
    if (want("mean_covariance")) out["mean_covariance"] = mean_covariance(features());
    if (want("mean_covariance_per_class")) out["mean_covariance_per_class"] = per_class_variant(Statistic::MeanCovariance, ms, seed);
    if (want("mean_distance")) out["mean_distance"] = mean_pairwise_distance(features(), seed);
    if (want("mean_distance_per_class")) out["mean_distance_per_class"] = per_class_variant(Statistic::MeanDistance, ms, seed);
    if (want("mean_angle")) out["mean_angle"] = mean_pairwise_angle(features(), seed).value;
    if (want("mean_angle_per_class")) out["mean_angle_per_class"] = per_class_variant(Statistic::MeanAngle, ms, seed);
    if (want("participation_ratio")) out["participation_ratio"] = participation_ratio(ms).value;
    if (want("nc1")) out["nc1"] = nc1(ms, cfg.spectral_tau);
    if (want("numerical_rank")) out["numerical_rank"] = numerical_rank(ms, cfg.spectral_tau).value;
    if (b.logits) {
        const bool any = want("confidence") || want("entropy") || want("energy");
        if (any) {
            const auto lm = logit_markers(to_double(*b.logits), cfg.energy_temperature);
            if (want("confidence")) out["confidence"] = lm.confidence;
            if (want("entropy")) out["entropy"] = lm.entropy;
            if (want("energy")) out["energy"] = lm.energy;
        }
    }
    return out;
}

inline nlohmann::json num_or_null(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }

} // namespace detail

inline MarkerReport compute_all(const FeatureBundle& b, const MarkerConfig& cfg) {
    validate_bundle(b);
    const auto catalogue = marker_catalogue();
    std::vector<std::string> wanted = cfg.selected.empty() ? catalogue : cfg.selected;
    for (const auto& n : wanted)
        require(std::find(catalogue.begin(), catalogue.end(), n) != catalogue.end(), ErrorCode::InvalidArgument,
                "unknown marker '" + n + "'");

    MarkerReport rep;
    if (!b.logits) {
        std::vector<std::string> kept;
        for (const auto& n : wanted) {
            if (is_logit_marker(n)) {
                if (!cfg.selected.empty()) rep.warnings.push_back("bundle has no logits; marker '" + n + "' omitted");
            } else {
                kept.push_back(n);
            }
        }
        if (cfg.selected.empty()) rep.warnings.emplace_back("bundle has no logits; logit markers omitted");
        wanted = kept;
    }
    std::vector<std::string> baseline, glue;
    for (const auto& n : wanted) (is_glue_marker(n) ? glue : baseline).push_back(n);

    nlohmann::json prov;
    prov["bundle"] = meta_to_json(b);
    prov["mode"] = cfg.subsample ? "subsample" : "full";
    prov["markers"] = wanted;
    prov["sparsity_eps"] = cfg.sparsity_eps;
    prov["spectral_tau"] = cfg.spectral_tau;
    prov["energy_temperature"] = cfg.energy_temperature;
    prov["seed"] = cfg.seed;
    prov["pair_exact_limit"] = kExactPairLimit;

    auto glue_prov = [&](const SubsampleSpec& s) {
        return nlohmann::json{{"classes_per_draw", s.classes_per_draw},
                              {"points_per_class", s.points_per_class},
                              {"repetitions", s.repetitions},
                              {"seed", s.seed},
                              {"whiten", to_string(cfg.whiten.mode)},
                              {"ridge_fraction", cfg.whiten.ridge_fraction},
                              {"n_dirs", cfg.glue.n_dirs},
                              {"qp_tol", cfg.glue.tol},
                              {"dichotomies", to_string(cfg.glue.dichotomies)}};
    };

    if (cfg.subsample) {
        const SubsampleSpec& spec = *cfg.subsample;
        validate_subsample(b, spec);
        if (!glue.empty())
            require(spec.classes_per_draw >= 2, ErrorCode::InvalidArgument, "GLUE markers need classes_per_draw >= 2");
        prov["subsample"] = glue_prov(spec);
        std::vector<std::map<std::string, double>> per_rep(spec.repetitions);
        parallel_for(spec.repetitions, cfg.glue.jobs, [&](std::size_t r) {
            const auto rows = subsample_rows(b, spec, r);
            std::vector<Eigen::Index> idx;
            std::vector<ClassManifold> picked;
            for (const auto& [c, ri] : rows) {
                idx.insert(idx.end(), ri.begin(), ri.end());
                picked.push_back({c, gather_rows(b.features, ri)});
            }
            std::sort(idx.begin(), idx.end());
            const FeatureBundle sub = select_rows(b, idx);
            auto values = detail::baseline_values(sub, baseline, cfg, stream_key(cfg.seed, {r}));
            if (!glue.empty()) {
                const auto res = glue_on_manifolds(picked, cfg.whiten, cfg.glue, repetition_seed(spec.seed, r), 1);
                for (const auto& n : glue) values[n] = glue_measure(res.estimate, n);
            }
            per_rep[r] = std::move(values);
        });
        for (const auto& n : wanted) {
            std::vector<double> xs;
            for (const auto& v : per_rep) xs.push_back(v.at(n));
            const Moment m = moment_of(xs);
            rep.markers[n] = {m.mean, xs.size() > 1 ? std::optional<double>(m.se) : std::nullopt};
        }
    } else {
        for (const auto& [n, v] : detail::baseline_values(b, baseline, cfg, cfg.seed)) rep.markers[n] = {v, std::nullopt};
        if (!glue.empty()) {
            SubsampleSpec gs = cfg.glue_subsample;
            std::size_t smallest = std::numeric_limits<std::size_t>::max();
            for (const auto& rows : class_rows(b)) smallest = std::min(smallest, rows.size());
            gs.points_per_class = std::min(gs.points_per_class, smallest);
            prov["glue"] = glue_prov(gs);
            const auto pr = glue_pairwise(b, gs, cfg.whiten, cfg.glue);
            for (const auto& n : glue) {
                const auto& [mean, se] = pr.aggregate.at(n);
                rep.markers[n] = {mean, se};
            }
        }
    }
    rep.provenance = prov;
    return rep;
}

inline nlohmann::json to_json(const MarkerReport& r) {
    nlohmann::json m = nlohmann::json::object();
    for (const auto& [name, v] : r.markers) {
        nlohmann::json e{{"value", detail::num_or_null(v.value)}};
        if (v.se) e["stderr"] = detail::num_or_null(*v.se);
        m[name] = e;
    }
    nlohmann::json out{{"markers", m}, {"provenance", r.provenance}};
    if (!r.warnings.empty()) out["warnings"] = r.warnings;
    return out;
}

// Accepts the report layout above; null values read back as NaN.
inline MarkerReport marker_report_from_json(const nlohmann::json& j) {
    require(j.is_object() && j.contains("markers") && j["markers"].is_object(), ErrorCode::InvalidArgument,
            "marker report lacks a 'markers' object");
    auto num = [](const nlohmann::json& v) {
        return v.is_number() ? v.get<double>() : std::numeric_limits<double>::quiet_NaN();
    };
    MarkerReport r;
    for (const auto& [name, e] : j["markers"].items()) {
        MarkerValue v;
        if (e.is_number()) {
            v.value = e.get<double>();
        } else {
            require(e.is_object() && e.contains("value"), ErrorCode::InvalidArgument, "marker '" + name + "' lacks a value");
            v.value = num(e["value"]);
            if (e.contains("stderr") && !e["stderr"].is_null()) v.se = num(e["stderr"]);
        }
        r.markers[name] = v;
    }
    if (j.contains("provenance")) r.provenance = j["provenance"];
    return r;
}

} // namespace geodiag
