#pragma once

// Multinomial logistic-regression probe on frozen features, trained with Adam
// on seeded mini-batches.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "error.hpp"
#include "featureio.hpp"
#include "linalg.hpp"
#include "parallel.hpp"
#include "rng.hpp"

namespace geodiag {

struct ProbeConfig {
    std::size_t epochs = 50;
    double learning_rate = 0.1;
    std::size_t batch_size = 256;
    std::uint64_t seed = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    bool bias = true;
};

inline void validate_probe_config(const ProbeConfig& c) {
    require(c.epochs >= 1, ErrorCode::InvalidArgument, "epochs must be >= 1");
    require(c.learning_rate > 0.0, ErrorCode::InvalidArgument, "learning_rate must be > 0");
    require(c.batch_size >= 1, ErrorCode::InvalidArgument, "batch_size must be >= 1");
    require(c.beta1 >= 0.0 && c.beta1 < 1.0 && c.beta2 >= 0.0 && c.beta2 < 1.0, ErrorCode::InvalidArgument,
            "moment decay rates must be in [0,1)");
}

struct EpochStats {
    double loss = 0.0;
    double accuracy = 0.0;
};

struct ProbeModel {
    Matrix weights; // N x P
    Vector bias;    // P (zeros when disabled)
    std::vector<EpochStats> curve;
};

inline Matrix probe_logits(const ProbeModel& m, const Matrix& x) {
    require(x.cols() == m.weights.rows(), ErrorCode::DimensionMismatch,
            "features have " + std::to_string(x.cols()) + " columns, probe expects " + std::to_string(m.weights.rows()));
    return (x * m.weights).rowwise() + m.bias.transpose();
}

// Argmax per row; ties go to the lowest class index.
inline std::vector<std::uint32_t> probe_predict(const ProbeModel& m, const Matrix& x) {
    const Matrix z = probe_logits(m, x);
    std::vector<std::uint32_t> out(static_cast<std::size_t>(z.rows()));
    for (Eigen::Index i = 0; i < z.rows(); ++i) {
        Eigen::Index best = 0;
        for (Eigen::Index j = 1; j < z.cols(); ++j)
            if (z(i, j) > z(i, best)) best = j;
        out[static_cast<std::size_t>(i)] = static_cast<std::uint32_t>(best);
    }
    return out;
}

namespace detail {

// Softmax probabilities in place; returns the summed cross-entropy.
inline double softmax_xent(Matrix& z, const std::vector<std::uint32_t>& labels, const std::vector<Eigen::Index>& rows) {
    double loss = 0.0;
    for (Eigen::Index i = 0; i < z.rows(); ++i) {
        const double mx = z.row(i).maxCoeff();
        z.row(i) = (z.row(i).array() - mx).exp();
        const double s = z.row(i).sum();
        const auto y = labels[static_cast<std::size_t>(rows[static_cast<std::size_t>(i)])];
        loss += std::log(s) - std::log(z(i, y));
        z.row(i) /= s;
    }
    return loss;
}

inline double accuracy_of(const std::vector<std::uint32_t>& pred, const std::vector<std::uint32_t>& labels) {
    if (labels.empty()) return 0.0;
    std::size_t hit = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) hit += pred[i] == labels[i] ? 1 : 0;
    return static_cast<double>(hit) / static_cast<double>(labels.size());
}

} // namespace detail

inline EpochStats probe_full_stats(const ProbeModel& m, const Matrix& x, const std::vector<std::uint32_t>& labels) {
    Matrix z = probe_logits(m, x);
    std::vector<Eigen::Index> rows(labels.size());
    for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = static_cast<Eigen::Index>(i);
    const auto pred = probe_predict(m, x);
    const double loss = detail::softmax_xent(z, labels, rows) / static_cast<double>(std::max<std::size_t>(labels.size(), 1));
    return {loss, detail::accuracy_of(pred, labels)};
}

// Zero-initialized weights; one seeded permutation per epoch; Adam updates
// per mini-batch; full-data loss and accuracy recorded after every epoch.
inline ProbeModel train_probe(const FeatureBundle& train, const ProbeConfig& cfg) {
    validate_bundle(train);
    validate_probe_config(cfg);
    const Matrix x = to_double(train.features);
    const auto m = x.rows();
    const auto n = x.cols();
    const auto p = static_cast<Eigen::Index>(train.num_classes);

    ProbeModel model;
    model.weights = Matrix::Zero(n, p);
    model.bias = Vector::Zero(p);
    Matrix mw = Matrix::Zero(n, p), vw = Matrix::Zero(n, p);
    Vector mb = Vector::Zero(p), vb = Vector::Zero(p);
    std::size_t step = 0;

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        CounterRng rng(cfg.seed, {stream::kProbe, epoch});
        const auto order = draw_without_replacement(static_cast<std::size_t>(m), static_cast<std::size_t>(m), rng);
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const std::size_t end = std::min(order.size(), start + cfg.batch_size);
            std::vector<Eigen::Index> rows;
            for (std::size_t k = start; k < end; ++k) rows.push_back(static_cast<Eigen::Index>(order[k]));
            const auto bsz = static_cast<Eigen::Index>(rows.size());
            Matrix xb(bsz, n);
            for (Eigen::Index i = 0; i < bsz; ++i) xb.row(i) = x.row(rows[static_cast<std::size_t>(i)]);
            Matrix z = (xb * model.weights).rowwise() + model.bias.transpose();
            detail::softmax_xent(z, train.labels, rows);
            for (Eigen::Index i = 0; i < bsz; ++i) z(i, train.labels[static_cast<std::size_t>(rows[static_cast<std::size_t>(i)])]) -= 1.0;
            z /= static_cast<double>(bsz);
            const Matrix gw = xb.transpose() * z;
            const Vector gb = z.colwise().sum().transpose();

            ++step;
            const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
            const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
            mw = cfg.beta1 * mw + (1.0 - cfg.beta1) * gw;
            vw = cfg.beta2 * vw + (1.0 - cfg.beta2) * gw.cwiseAbs2();
            model.weights.array() -= cfg.learning_rate * (mw.array() / c1) / ((vw.array() / c2).sqrt() + cfg.eps);
            if (cfg.bias) {
                mb = cfg.beta1 * mb + (1.0 - cfg.beta1) * gb;
                vb = cfg.beta2 * vb + (1.0 - cfg.beta2) * gb.cwiseAbs2();
                model.bias.array() -= cfg.learning_rate * (mb.array() / c1) / ((vb.array() / c2).sqrt() + cfg.eps);
            }
        }
        const EpochStats stats = probe_full_stats(model, x, train.labels);
        require(std::isfinite(stats.loss) && model.weights.allFinite() && model.bias.allFinite(), ErrorCode::Divergence,
                "training loss is not finite at epoch " + std::to_string(epoch + 1));
        model.curve.push_back(stats);
    }
    return model;
}

inline double evaluate_probe(const ProbeModel& model, const FeatureBundle& test) {
    validate_bundle(test, false);
    require(test.feature_dim() == model.weights.rows(), ErrorCode::DimensionMismatch,
            "test features have " + std::to_string(test.feature_dim()) + " columns, probe expects " +
                std::to_string(model.weights.rows()));
    return detail::accuracy_of(probe_predict(model, to_double(test.features)), test.labels);
}

struct ProbeRun {
    std::uint64_t seed = 0;
    double train_acc = 0.0;
    double test_acc = 0.0;
};

struct ProbeSummary {
    double train_acc = 0.0;
    double test_acc = 0.0;
    std::vector<ProbeRun> per_seed;
    ProbeConfig config;
};

// Seed of repeat r; repeat 0 uses the configured seed itself.
inline std::uint64_t probe_repeat_seed(std::uint64_t seed, std::size_t r) {
    return r == 0 ? seed : stream_key(seed, {stream::kProbe, r});
}

// Independent probes per repeat, accuracies averaged.
inline ProbeSummary probe_repeats(const FeatureBundle& train, const FeatureBundle& test, const ProbeConfig& cfg,
                                  std::size_t repeats = 1, unsigned jobs = 1) {
    require(repeats >= 1, ErrorCode::InvalidArgument, "repeats must be >= 1");
    require(test.num_classes <= train.num_classes, ErrorCode::DimensionMismatch, "test has more classes than train");
    ProbeSummary s;
    s.config = cfg;
    s.per_seed.resize(repeats);
    parallel_for(repeats, jobs, [&](std::size_t r) {
        ProbeConfig c = cfg;
        c.seed = probe_repeat_seed(cfg.seed, r);
        const auto model = train_probe(train, c);
        s.per_seed[r] = {c.seed, model.curve.back().accuracy, evaluate_probe(model, test)};
    });
    for (const auto& run : s.per_seed) {
        s.train_acc += run.train_acc;
        s.test_acc += run.test_acc;
    }
    s.train_acc /= static_cast<double>(repeats);
    s.test_acc /= static_cast<double>(repeats);
    return s;
}

inline nlohmann::json to_json(const ProbeConfig& c) {
    return {{"epochs", c.epochs}, {"learning_rate", c.learning_rate}, {"batch_size", c.batch_size}, {"seed", c.seed},
            {"beta1", c.beta1},   {"beta2", c.beta2},                 {"eps", c.eps},               {"bias", c.bias},
            {"weight_decay", 0.0}};
}

inline nlohmann::json to_json(const ProbeSummary& s) {
    nlohmann::json runs = nlohmann::json::array();
    for (const auto& r : s.per_seed) runs.push_back({{"seed", r.seed}, {"train_acc", r.train_acc}, {"test_acc", r.test_acc}});
    return {{"train_acc", s.train_acc}, {"test_acc", s.test_acc}, {"per_seed", runs}, {"config", to_json(s.config)}};
}

} // namespace geodiag
