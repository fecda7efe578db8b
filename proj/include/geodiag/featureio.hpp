#pragma once

// Feature bundles: the on-disk "geodiag-bundle/1" format, class grouping,
// reproducible subsampling and the synthetic generators used for validation.
//
// Directory layout:
//   meta.json    format, num_samples, feature_dim, num_classes, class_names?,
//                has_logits, logit_dim (iff has_logits), source? {model, layer, dataset, split}
//   features.bin M*N little-endian binary32, row-major
//   labels.bin   M little-endian uint32
//   logits.bin   M*logit_dim little-endian binary32, row-major (iff has_logits)

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "error.hpp"
#include "linalg.hpp"
#include "rng.hpp"

namespace geodiag {

inline constexpr const char* kBundleFormat = "geodiag-bundle/1";

// Stream domains, so unrelated consumers of one seed never share numbers.
namespace stream {
inline constexpr std::uint64_t kSubsampleClasses = 1;
inline constexpr std::uint64_t kSubsamplePoints = 2;
inline constexpr std::uint64_t kGlueDirections = 3;
inline constexpr std::uint64_t kGlueRepetition = 4;
inline constexpr std::uint64_t kOracle = 5;
inline constexpr std::uint64_t kProbe = 6;
inline constexpr std::uint64_t kSpheres = 7;
inline constexpr std::uint64_t kPlanted = 8;
inline constexpr std::uint64_t kPairs = 9;
inline constexpr std::uint64_t kSplit = 10;
} // namespace stream

struct BundleSource {
    std::string model;
    std::string layer;
    std::string dataset;
    std::string split;
};

struct BundleMeta {
    std::vector<std::string> class_names;
    std::optional<BundleSource> source;
    // Unrecognised meta.json keys, preserved across read/write.
    nlohmann::json extra = nlohmann::json::object();
};

struct FeatureBundle {
    FloatMatrix features;                 // M x N
    std::vector<std::uint32_t> labels;    // M, values in [0, num_classes)
    std::optional<FloatMatrix> logits;    // M x P_logit
    std::uint32_t num_classes = 0;
    BundleMeta meta;

    Eigen::Index num_samples() const { return features.rows(); }
    Eigen::Index feature_dim() const { return features.cols(); }
};

struct ClassManifold {
    std::uint32_t class_id = 0;
    Matrix points; // M^mu x N
};

// ---------------------------------------------------------------------------
// Validation

// `require_all_classes` is relaxed for evaluation sets, which may miss classes.
inline void validate_bundle(const FeatureBundle& b, bool require_all_classes = true) {
    const auto m = b.features.rows();
    require(static_cast<Eigen::Index>(b.labels.size()) == m, ErrorCode::SizeMismatch,
            "labels length " + std::to_string(b.labels.size()) + " != num_samples " + std::to_string(m));
    require(b.num_classes >= 1, ErrorCode::BadMeta, "num_classes must be >= 1");
    require(b.meta.class_names.empty() || b.meta.class_names.size() == b.num_classes, ErrorCode::BadMeta,
            "class_names has " + std::to_string(b.meta.class_names.size()) + " entries, expected " +
                std::to_string(b.num_classes));
    require(b.features.allFinite(), ErrorCode::NonFinite, "features contain NaN or Inf");
    if (b.logits) {
        require(b.logits->rows() == m, ErrorCode::SizeMismatch, "logits rows differ from num_samples");
        require(b.logits->allFinite(), ErrorCode::NonFinite, "logits contain NaN or Inf");
    }
    std::vector<std::size_t> counts(b.num_classes, 0);
    for (std::size_t i = 0; i < b.labels.size(); ++i) {
        require(b.labels[i] < b.num_classes, ErrorCode::LabelOutOfRange,
                "label " + std::to_string(b.labels[i]) + " at row " + std::to_string(i) + " >= num_classes " +
                    std::to_string(b.num_classes));
        ++counts[b.labels[i]];
    }
    for (std::uint32_t c = 0; c < b.num_classes && require_all_classes; ++c)
        require(counts[c] > 0, ErrorCode::MissingClass, "class " + std::to_string(c) + " has no samples");
}

// Non-fatal findings for a valid bundle.
inline std::vector<std::string> bundle_warnings(const FeatureBundle& b) {
    std::vector<std::string> w;
    if (!b.meta.source) w.emplace_back("meta.json has no source descriptor");
    if (b.meta.class_names.empty()) w.emplace_back("meta.json has no class_names");
    return w;
}

inline bool identical(const FeatureBundle& a, const FeatureBundle& b) {
    auto same_matrix = [](const FloatMatrix& x, const FloatMatrix& y) {
        return x.rows() == y.rows() && x.cols() == y.cols() &&
               (x.size() == 0 || std::memcmp(x.data(), y.data(), sizeof(float) * x.size()) == 0);
    };
    if (a.num_classes != b.num_classes || a.labels != b.labels) return false;
    if (!same_matrix(a.features, b.features)) return false;
    if (a.logits.has_value() != b.logits.has_value()) return false;
    if (a.logits && !same_matrix(*a.logits, *b.logits)) return false;
    return a.meta.class_names == b.meta.class_names;
}

// ---------------------------------------------------------------------------
// Binary I/O

namespace detail {

inline std::uint32_t byteswap32(std::uint32_t v) {
    return ((v & 0xffu) << 24) | ((v & 0xff00u) << 8) | ((v >> 8) & 0xff00u) | (v >> 24);
}

template <class T>
void encode_le(const T* src, std::size_t n, std::vector<char>& out) {
    static_assert(sizeof(T) == 4);
    out.resize(n * 4);
    std::memcpy(out.data(), src, n * 4);
    if constexpr (std::endian::native == std::endian::big) {
        for (std::size_t i = 0; i < n; ++i) {
            std::uint32_t v;
            std::memcpy(&v, out.data() + 4 * i, 4);
            v = byteswap32(v);
            std::memcpy(out.data() + 4 * i, &v, 4);
        }
    }
}

template <class T>
void decode_le(const std::vector<char>& in, T* dst, std::size_t n) {
    static_assert(sizeof(T) == 4);
    std::memcpy(dst, in.data(), n * 4);
    if constexpr (std::endian::native == std::endian::big) {
        for (std::size_t i = 0; i < n; ++i) {
            std::uint32_t v;
            std::memcpy(&v, reinterpret_cast<char*>(dst) + 4 * i, 4);
            v = byteswap32(v);
            std::memcpy(reinterpret_cast<char*>(dst) + 4 * i, &v, 4);
        }
    }
}

inline std::vector<char> read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    require(static_cast<bool>(in), ErrorCode::MissingFile, p.string());
    return std::vector<char>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

inline void write_file(const std::filesystem::path& p, const std::vector<char>& bytes) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    require(static_cast<bool>(out), ErrorCode::Io, "cannot open " + p.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    require(static_cast<bool>(out), ErrorCode::Io, "write failed: " + p.string());
}

inline void check_size(const std::vector<char>& bytes, std::size_t expected, ErrorCode truncated,
                       const std::string& name) {
    require(bytes.size() >= expected, truncated,
            name + " has " + std::to_string(bytes.size()) + " bytes, expected " + std::to_string(expected));
    require(bytes.size() == expected, ErrorCode::SizeMismatch,
            name + " has " + std::to_string(bytes.size()) + " bytes, expected " + std::to_string(expected));
}

template <class T>
T meta_get(const nlohmann::json& j, const char* key) {
    require(j.contains(key), ErrorCode::BadMeta, std::string("meta.json lacks '") + key + "'");
    try {
        return j.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::BadMeta, std::string("meta.json key '") + key + "': " + e.what());
    }
}

} // namespace detail

inline nlohmann::json meta_to_json(const FeatureBundle& b) {
    nlohmann::json j = b.meta.extra.is_object() ? b.meta.extra : nlohmann::json::object();
    j["format"] = kBundleFormat;
    j["num_samples"] = b.features.rows();
    j["feature_dim"] = b.features.cols();
    j["num_classes"] = b.num_classes;
    if (!b.meta.class_names.empty()) j["class_names"] = b.meta.class_names;
    j["has_logits"] = b.logits.has_value();
    if (b.logits) j["logit_dim"] = b.logits->cols();
    else j.erase("logit_dim");
    if (b.meta.source) {
        j["source"] = {{"model", b.meta.source->model},
                       {"layer", b.meta.source->layer},
                       {"dataset", b.meta.source->dataset},
                       {"split", b.meta.source->split}};
    }
    return j;
}

inline FeatureBundle read_bundle(const std::filesystem::path& dir) {
    namespace fs = std::filesystem;
    const fs::path meta_path = dir / "meta.json";
    require(fs::is_regular_file(meta_path), ErrorCode::MissingFile, meta_path.string());

    nlohmann::json meta;
    try {
        std::ifstream in(meta_path);
        meta = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::BadMeta, e.what());
    }
    require(meta.is_object(), ErrorCode::BadMeta, "meta.json is not an object");
    require(detail::meta_get<std::string>(meta, "format") == kBundleFormat, ErrorCode::BadMeta,
            "unsupported format '" + meta["format"].dump() + "'");

    const auto m = detail::meta_get<std::int64_t>(meta, "num_samples");
    const auto n = detail::meta_get<std::int64_t>(meta, "feature_dim");
    const auto p = detail::meta_get<std::int64_t>(meta, "num_classes");
    const bool has_logits = detail::meta_get<bool>(meta, "has_logits");
    require(m >= 0 && n >= 0 && p >= 1, ErrorCode::BadMeta, "negative shape or zero classes");

    FeatureBundle b;
    b.num_classes = static_cast<std::uint32_t>(p);
    if (meta.contains("class_names")) b.meta.class_names = detail::meta_get<std::vector<std::string>>(meta, "class_names");
    if (meta.contains("source")) {
        const auto& s = meta["source"];
        require(s.is_object(), ErrorCode::BadMeta, "source must be an object");
        BundleSource src;
        src.model = s.value("model", "");
        src.layer = s.value("layer", "");
        src.dataset = s.value("dataset", "");
        src.split = s.value("split", "");
        b.meta.source = src;
    }
    for (const auto& [k, v] : meta.items()) {
        static const std::vector<std::string> known = {"format",      "num_samples", "feature_dim", "num_classes",
                                                       "class_names", "has_logits",  "logit_dim",   "source"};
        if (std::find(known.begin(), known.end(), k) == known.end()) b.meta.extra[k] = v;
    }

    const auto mm = static_cast<std::size_t>(m), nn = static_cast<std::size_t>(n);
    const fs::path feat_path = dir / "features.bin";
    const fs::path label_path = dir / "labels.bin";
    require(fs::is_regular_file(feat_path), ErrorCode::MissingFile, feat_path.string());
    require(fs::is_regular_file(label_path), ErrorCode::MissingFile, label_path.string());

    const auto feat_bytes = detail::read_file(feat_path);
    detail::check_size(feat_bytes, mm * nn * 4, ErrorCode::TruncatedFeatures, "features.bin");
    b.features.resize(m, n);
    detail::decode_le(feat_bytes, b.features.data(), mm * nn);

    const auto label_bytes = detail::read_file(label_path);
    detail::check_size(label_bytes, mm * 4, ErrorCode::TruncatedLabels, "labels.bin");
    b.labels.resize(mm);
    detail::decode_le(label_bytes, b.labels.data(), mm);

    if (has_logits) {
        const auto k = detail::meta_get<std::int64_t>(meta, "logit_dim");
        require(k >= 1, ErrorCode::BadMeta, "logit_dim must be >= 1");
        const fs::path logit_path = dir / "logits.bin";
        require(fs::is_regular_file(logit_path), ErrorCode::MissingFile, logit_path.string());
        const auto logit_bytes = detail::read_file(logit_path);
        detail::check_size(logit_bytes, mm * static_cast<std::size_t>(k) * 4, ErrorCode::TruncatedLogits, "logits.bin");
        FloatMatrix logits(m, k);
        detail::decode_le(logit_bytes, logits.data(), mm * static_cast<std::size_t>(k));
        b.logits = std::move(logits);
    }

    validate_bundle(b);
    return b;
}

inline void write_bundle(const FeatureBundle& b, const std::filesystem::path& dir) {
    namespace fs = std::filesystem;
    validate_bundle(b);
    std::error_code ec;
    fs::create_directories(dir, ec);
    require(!ec && fs::is_directory(dir), ErrorCode::Io, "cannot create " + dir.string());

    std::vector<char> bytes;
    detail::encode_le(b.features.data(), static_cast<std::size_t>(b.features.size()), bytes);
    detail::write_file(dir / "features.bin", bytes);
    detail::encode_le(b.labels.data(), b.labels.size(), bytes);
    detail::write_file(dir / "labels.bin", bytes);
    if (b.logits) {
        detail::encode_le(b.logits->data(), static_cast<std::size_t>(b.logits->size()), bytes);
        detail::write_file(dir / "logits.bin", bytes);
    } else {
        fs::remove(dir / "logits.bin", ec);
    }

    const std::string text = meta_to_json(b).dump(2) + "\n";
    detail::write_file(dir / "meta.json", std::vector<char>(text.begin(), text.end()));
}

// ---------------------------------------------------------------------------
// Grouping and subsampling

inline std::vector<std::vector<Eigen::Index>> class_rows(const FeatureBundle& b) {
    std::vector<std::vector<Eigen::Index>> rows(b.num_classes);
    for (std::size_t i = 0; i < b.labels.size(); ++i) rows[b.labels[i]].push_back(static_cast<Eigen::Index>(i));
    return rows;
}

inline Matrix gather_rows(const FloatMatrix& x, const std::vector<Eigen::Index>& idx) {
    Matrix out(static_cast<Eigen::Index>(idx.size()), x.cols());
    for (std::size_t r = 0; r < idx.size(); ++r) out.row(static_cast<Eigen::Index>(r)) = x.row(idx[r]).cast<double>();
    return out;
}

// Manifolds ordered by ascending class id; rows keep bundle order.
inline std::vector<ClassManifold> group_by_class(const FeatureBundle& b) {
    const auto rows = class_rows(b);
    std::vector<ClassManifold> out;
    for (std::uint32_t c = 0; c < b.num_classes; ++c) {
        if (rows[c].empty()) continue;
        out.push_back({c, gather_rows(b.features, rows[c])});
    }
    return out;
}

// Manifolds stacked into one matrix (rows in manifold order).
inline Matrix stack_points(const std::vector<ClassManifold>& ms) {
    Eigen::Index rows = 0;
    const Eigen::Index cols = ms.empty() ? 0 : ms.front().points.cols();
    for (const auto& m : ms) rows += m.points.rows();
    Matrix out(rows, cols);
    Eigen::Index r = 0;
    for (const auto& m : ms) {
        out.middleRows(r, m.points.rows()) = m.points;
        r += m.points.rows();
    }
    return out;
}

// Inverse of stack_points for a transformed stack.
inline std::vector<ClassManifold> unstack_points(const std::vector<ClassManifold>& like, const Matrix& stacked) {
    std::vector<ClassManifold> out;
    Eigen::Index r = 0;
    for (const auto& m : like) {
        out.push_back({m.class_id, stacked.middleRows(r, m.points.rows())});
        r += m.points.rows();
    }
    return out;
}

struct SubsampleSpec {
    std::size_t classes_per_draw = 2;
    std::size_t points_per_class = 50;
    std::size_t repetitions = 100;
    std::uint64_t seed = 0;
};

inline void validate_subsample(const FeatureBundle& b, const SubsampleSpec& spec) {
    require(spec.repetitions >= 1, ErrorCode::InvalidArgument, "repetitions must be >= 1");
    require(spec.classes_per_draw >= 1 && spec.classes_per_draw <= b.num_classes, ErrorCode::InvalidArgument,
            "classes_per_draw " + std::to_string(spec.classes_per_draw) + " not in [1, " +
                std::to_string(b.num_classes) + "]");
    require(spec.points_per_class >= 1, ErrorCode::InvalidArgument, "points_per_class must be >= 1");
    const auto rows = class_rows(b);
    for (std::uint32_t c = 0; c < b.num_classes; ++c)
        require(rows[c].size() >= spec.points_per_class, ErrorCode::ClassTooSmall,
                "class " + std::to_string(c) + " has " + std::to_string(rows[c].size()) + " points, need " +
                    std::to_string(spec.points_per_class));
}

// First k entries of a seeded Fisher-Yates shuffle of [0, n).
inline std::vector<std::size_t> draw_without_replacement(std::size_t n, std::size_t k, CounterRng& rng) {
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    for (std::size_t i = 0; i < k && i < n; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(rng.below(n - i));
        std::swap(perm[i], perm[j]);
    }
    perm.resize(std::min(k, n));
    return perm;
}

// Classes drawn for repetition `rep`, ascending.
inline std::vector<std::uint32_t> subsample_classes(std::uint32_t num_classes, const SubsampleSpec& spec,
                                                    std::size_t rep) {
    CounterRng rng(spec.seed, {stream::kSubsampleClasses, rep});
    const auto picked = draw_without_replacement(num_classes, spec.classes_per_draw, rng);
    std::vector<std::uint32_t> classes(picked.begin(), picked.end());
    std::sort(classes.begin(), classes.end());
    return classes;
}

// Pure function of (bundle, spec, rep): classes without replacement, then
// points without replacement within each class. Point streams are keyed by
// class id so a class's draw does not depend on which partner was drawn.
// Returns bundle row indices per drawn class, ascending.
inline std::vector<std::pair<std::uint32_t, std::vector<Eigen::Index>>> subsample_rows(const FeatureBundle& b,
                                                                                       const SubsampleSpec& spec,
                                                                                       std::size_t rep) {
    validate_subsample(b, spec);
    const auto rows = class_rows(b);
    std::vector<std::pair<std::uint32_t, std::vector<Eigen::Index>>> out;
    for (auto c : subsample_classes(b.num_classes, spec, rep)) {
        CounterRng rng(spec.seed, {stream::kSubsamplePoints, rep, c});
        auto picked = draw_without_replacement(rows[c].size(), spec.points_per_class, rng);
        std::sort(picked.begin(), picked.end());
        std::vector<Eigen::Index> idx;
        idx.reserve(picked.size());
        for (auto p : picked) idx.push_back(rows[c][p]);
        out.emplace_back(c, std::move(idx));
    }
    return out;
}

inline std::vector<ClassManifold> subsample(const FeatureBundle& b, const SubsampleSpec& spec, std::size_t rep) {
    std::vector<ClassManifold> out;
    for (const auto& [c, idx] : subsample_rows(b, spec, rep)) out.push_back({c, gather_rows(b.features, idx)});
    return out;
}

// Row subset of a bundle; class ids are kept as-is.
inline FeatureBundle select_rows(const FeatureBundle& b, const std::vector<Eigen::Index>& idx) {
    FeatureBundle out;
    out.num_classes = b.num_classes;
    out.meta = b.meta;
    out.features.resize(static_cast<Eigen::Index>(idx.size()), b.features.cols());
    if (b.logits) out.logits = FloatMatrix(static_cast<Eigen::Index>(idx.size()), b.logits->cols());
    for (std::size_t r = 0; r < idx.size(); ++r) {
        const auto rr = static_cast<Eigen::Index>(r);
        out.features.row(rr) = b.features.row(idx[r]);
        if (b.logits) out.logits->row(rr) = b.logits->row(idx[r]);
        out.labels.push_back(b.labels[static_cast<std::size_t>(idx[r])]);
    }
    return out;
}

// Stratified split: round(test_fraction * M^mu) rows of each class go to the
// test side, clamped so both sides keep at least one row per class.
inline std::pair<FeatureBundle, FeatureBundle> train_test_split(const FeatureBundle& b, double test_fraction,
                                                                std::uint64_t seed) {
    require(test_fraction > 0.0 && test_fraction < 1.0, ErrorCode::InvalidArgument, "test_fraction must be in (0,1)");
    const auto rows = class_rows(b);
    std::vector<Eigen::Index> train, test;
    for (std::uint32_t c = 0; c < b.num_classes; ++c) {
        require(rows[c].size() >= 2, ErrorCode::ClassTooSmall, "class " + std::to_string(c) + " needs >= 2 rows to split");
        CounterRng rng(seed, {stream::kSplit, c});
        const auto n = rows[c].size();
        auto n_test = static_cast<std::size_t>(std::lround(test_fraction * static_cast<double>(n)));
        n_test = std::clamp<std::size_t>(n_test, 1, n - 1);
        auto perm = draw_without_replacement(n, n, rng);
        std::vector<std::size_t> t(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_test));
        std::sort(t.begin(), t.end());
        std::size_t ti = 0;
        for (std::size_t i = 0; i < n; ++i) {
            if (ti < t.size() && t[ti] == i) {
                test.push_back(rows[c][i]);
                ++ti;
            } else {
                train.push_back(rows[c][i]);
            }
        }
    }
    std::sort(train.begin(), train.end());
    std::sort(test.begin(), test.end());
    auto tr = select_rows(b, train);
    auto te = select_rows(b, test);
    if (tr.meta.source) tr.meta.source->split = "train";
    if (te.meta.source) te.meta.source->split = "test";
    return {std::move(tr), std::move(te)};
}

// ---------------------------------------------------------------------------
// Synthetic generators

struct SphereSpec {
    std::size_t dim = 5;             // intrinsic dimension D
    double radius = 0.5;             // R
    std::size_t ambient = 200;       // N
    std::size_t num_classes = 2;     // P
    std::size_t points_per_class = 50;
    std::uint64_t seed = 0;
    bool shared_frame = false;       // all classes use one axis frame
};

struct SphereEnsemble {
    FeatureBundle bundle;
    Matrix centers;             // N x P, unit columns
    std::vector<Matrix> frames; // per class, N x D orthonormal
};

// Class mu: c_mu + R * U_mu * v with v uniform on the unit sphere of R^D.
// Centers and frames are mutually orthonormal (frames shared if requested).
inline SphereEnsemble gen_sphere_ensemble(const SphereSpec& spec) {
    const auto d = static_cast<Eigen::Index>(spec.dim);
    const auto n = static_cast<Eigen::Index>(spec.ambient);
    const auto p = static_cast<Eigen::Index>(spec.num_classes);
    require(p >= 1 && spec.points_per_class >= 1, ErrorCode::InvalidArgument, "need classes and points");
    require(spec.radius >= 0.0 && std::isfinite(spec.radius), ErrorCode::InvalidArgument, "radius must be >= 0");
    const Eigen::Index needed = spec.shared_frame ? p + d : (d + 1) * p;
    require(needed <= n, ErrorCode::NotOrthogonalizable,
            std::to_string(needed) + " orthonormal directions do not fit in ambient dimension " + std::to_string(n));

    CounterRng basis_rng(spec.seed, {stream::kSpheres, 0});
    const Matrix q = random_orthonormal(n, needed, basis_rng);

    SphereEnsemble out;
    out.centers = q.leftCols(p);
    for (Eigen::Index mu = 0; mu < p; ++mu) {
        const Eigen::Index start = spec.shared_frame ? p : p + mu * d;
        out.frames.push_back(q.middleCols(start, d));
    }

    const auto m = static_cast<Eigen::Index>(spec.points_per_class);
    FeatureBundle& b = out.bundle;
    b.num_classes = static_cast<std::uint32_t>(p);
    b.features.resize(m * p, n);
    for (Eigen::Index mu = 0; mu < p; ++mu) {
        CounterRng rng(spec.seed, {stream::kSpheres, 1, static_cast<std::uint64_t>(mu)});
        for (Eigen::Index i = 0; i < m; ++i) {
            Vector x = out.centers.col(mu);
            if (d > 0) {
                Vector v = standard_normal(d, rng);
                const double norm = v.norm();
                if (norm > 0) x += spec.radius * out.frames[static_cast<std::size_t>(mu)] * (v / norm);
            }
            b.features.row(mu * m + i) = x.transpose().cast<float>();
            b.labels.push_back(static_cast<std::uint32_t>(mu));
        }
        b.meta.class_names.push_back("sphere" + std::to_string(mu));
    }
    b.meta.source = BundleSource{"synthetic", "spheres",
                                 "spheres(D=" + std::to_string(spec.dim) + ",R=" + nlohmann::json(spec.radius).dump() + ")",
                                 "train"};
    return out;
}

inline FeatureBundle gen_spheres(const SphereSpec& spec) { return gen_sphere_ensemble(spec).bundle; }

// Planted compression model. A shared latent space of `latent_dim` modes is
// embedded in the ambient space by a random orthonormal map; the "network"
// keeps only the first `retained_modes(compression)` modes. ID classes sit on
// a ring in the first `core_modes` modes (always retained) with isotropic
// within-class variability over all modes; OOD classes have random centers
// over all modes, so discarding modes removes OOD class information while ID
// classes stay separable.
struct PlantedSpec {
    double compression = 0.0;
    std::uint64_t seed = 0;
    std::size_t latent_dim = 32;
    std::size_t ambient_dim = 64;
    std::size_t core_modes = 2;
    std::size_t id_classes = 6;
    std::size_t id_points = 100;
    double id_ring_radius = 8.0;
    std::size_t ood_classes = 10;
    std::size_t ood_points = 200;
    double ood_center_scale = 0.6;
    double within_scale = 1.0;
};

inline std::size_t retained_modes(const PlantedSpec& spec) {
    const double free_modes = static_cast<double>(spec.latent_dim - spec.core_modes);
    return spec.core_modes + static_cast<std::size_t>(std::lround((1.0 - spec.compression) * free_modes));
}

struct PlantedPair {
    FeatureBundle id;
    FeatureBundle ood;
    std::size_t retained = 0;
};

inline PlantedPair gen_planted_pair(const PlantedSpec& spec) {
    require(spec.compression >= 0.0 && spec.compression <= 1.0, ErrorCode::InvalidArgument,
            "compression must be in [0,1]");
    require(spec.core_modes >= 2 && spec.core_modes <= spec.latent_dim && spec.latent_dim <= spec.ambient_dim,
            ErrorCode::InvalidArgument, "need 2 <= core_modes <= latent_dim <= ambient_dim");
    const auto l = static_cast<Eigen::Index>(spec.latent_dim);
    const auto n = static_cast<Eigen::Index>(spec.ambient_dim);

    CounterRng basis_rng(spec.seed, {stream::kPlanted, 0});
    const Matrix embed = random_orthonormal(n, l, basis_rng);
    const std::size_t kept = retained_modes(spec);
    Vector mask = Vector::Zero(l);
    mask.head(static_cast<Eigen::Index>(kept)).setOnes();

    auto make = [&](std::size_t classes, std::size_t points, const Matrix& centers, std::uint64_t domain,
                    const std::string& dataset) {
        FeatureBundle b;
        b.num_classes = static_cast<std::uint32_t>(classes);
        b.features.resize(static_cast<Eigen::Index>(classes * points), n);
        for (std::size_t mu = 0; mu < classes; ++mu) {
            CounterRng rng(spec.seed, {stream::kPlanted, domain, mu});
            for (std::size_t i = 0; i < points; ++i) {
                const Vector latent = centers.col(static_cast<Eigen::Index>(mu)) + spec.within_scale * standard_normal(l, rng);
                const Vector feature = embed * latent.cwiseProduct(mask);
                b.features.row(static_cast<Eigen::Index>(mu * points + i)) = feature.transpose().cast<float>();
                b.labels.push_back(static_cast<std::uint32_t>(mu));
            }
            b.meta.class_names.push_back(dataset + std::to_string(mu));
        }
        b.meta.source = BundleSource{"planted(c=" + nlohmann::json(spec.compression).dump() + ")", "features", dataset,
                                     "all"};
        return b;
    };

    Matrix id_centers = Matrix::Zero(l, static_cast<Eigen::Index>(spec.id_classes));
    const double pi = std::acos(-1.0);
    for (std::size_t mu = 0; mu < spec.id_classes; ++mu) {
        const double angle = 2.0 * pi * static_cast<double>(mu) / static_cast<double>(spec.id_classes);
        id_centers(0, static_cast<Eigen::Index>(mu)) = spec.id_ring_radius * std::cos(angle);
        id_centers(1, static_cast<Eigen::Index>(mu)) = spec.id_ring_radius * std::sin(angle);
    }
    CounterRng ood_rng(spec.seed, {stream::kPlanted, 1});
    const Matrix ood_centers = spec.ood_center_scale * standard_normal(l, static_cast<Eigen::Index>(spec.ood_classes), ood_rng);

    PlantedPair out;
    out.id = make(spec.id_classes, spec.id_points, id_centers, 2, "planted-id");
    out.ood = make(spec.ood_classes, spec.ood_points, ood_centers, 3, "planted-ood");
    out.retained = kept;
    return out;
}

} // namespace geodiag
