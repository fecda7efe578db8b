#include <gtest/gtest.h>

#include "geodiag/preprocess.hpp"

using namespace geodiag;

namespace {

Matrix sample_cov(const Matrix& x) {
    const Matrix c = x.rowwise() - x.colwise().mean();
    return (c.transpose() * c) / static_cast<double>(x.rows() - 1);
}

} // namespace

TEST(CenterGlobal, Examples) {
    EXPECT_EQ(center_global(Matrix::Constant(4, 3, 2.5)), Matrix::Zero(4, 3));
    Matrix two(2, 2);
    two << 0, 0, 2, 2;
    Matrix expected(2, 2);
    expected << -1, -1, 1, 1;
    EXPECT_EQ(center_global(two), expected);
    CounterRng rng(1, {50});
    const Matrix c = center_global(standard_normal(30, 4, rng));
    EXPECT_LT((center_global(c) - c).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LT(c.colwise().mean().cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Gaussianize, DiagonalCovarianceBecomesIdentity) {
    // Sample with covariance exactly diag(4, 1) under denominator M-1.
    CounterRng rng(2, {51});
    Matrix z = standard_normal(200, 2, rng);
    z = center_global(z);
    const Eigen::LLT<Matrix> llt(sample_cov(z));
    z = z * llt.matrixU().solve(Matrix::Identity(2, 2)); // now covariance I
    Matrix x = z;
    x.col(0) *= 2.0;
    x.array() += 5.0;
    WhitenConfig cfg;
    cfg.ridge_fraction = 0.0;
    const Matrix w = gaussianize(x, cfg);
    EXPECT_LT((sample_cov(w) - Matrix::Identity(2, 2)).cwiseAbs().maxCoeff(), 1e-6);
    EXPECT_LT(w.colwise().mean().cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Gaussianize, IsotropicSampleNearlyUnchanged) {
    CounterRng rng(3, {52});
    const Matrix x = standard_normal(10000, 5, rng);
    const Matrix w = gaussianize(x);
    // Sample covariance deviates from I by O(1/sqrt(M)); whitening removes it.
    EXPECT_LT((w - center_global(x)).cwiseAbs().maxCoeff(), 0.1);
    EXPECT_LT((sample_cov(w) - Matrix::Identity(5, 5)).cwiseAbs().maxCoeff(), 1e-5);
}

TEST(Gaussianize, RankDeficientStaysFinite) {
    CounterRng rng(4, {53});
    const Matrix basis = standard_normal(2, 6, rng);
    const Matrix x = standard_normal(40, 2, rng) * basis;
    const Matrix w = gaussianize(x);
    EXPECT_TRUE(w.allFinite());
    WhitenConfig exact;
    exact.ridge_fraction = 0.0;
    const Matrix w0 = gaussianize(x, exact);
    EXPECT_TRUE(w0.allFinite());
    // Within the occupied subspace the covariance is a projector of rank 2.
    const Vector ev = symmetric_eigenvalues_desc(sample_cov(w0));
    EXPECT_NEAR(ev[0], 1.0, 1e-8);
    EXPECT_NEAR(ev[1], 1.0, 1e-8);
    EXPECT_LT(ev.tail(4).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(Gaussianize, ModeNoneAndErrors) {
    CounterRng rng(5, {54});
    const Matrix x = standard_normal(5, 3, rng);
    WhitenConfig none;
    none.mode = WhitenMode::None;
    EXPECT_EQ(gaussianize(x, none), x);
    EXPECT_THROW(gaussianize(x.topRows(1)), Error);
    WhitenConfig neg;
    neg.ridge_fraction = -1.0;
    EXPECT_THROW(gaussianize(x, neg), Error);
    EXPECT_EQ(parse_whiten_mode("zca"), WhitenMode::Zca);
    EXPECT_THROW(parse_whiten_mode("pca"), Error);
}

TEST(Gaussianize, RotationEquivariant) {
    CounterRng rng(6, {55});
    Matrix x = standard_normal(60, 4, rng);
    x.col(1) *= 3.0;
    x.col(2) += 0.5 * x.col(0);
    const Matrix r = random_orthonormal(4, 4, rng);
    WhitenConfig cfg;
    cfg.ridge_fraction = 0.0;
    const Matrix a = gaussianize(x, cfg);
    const Matrix b = gaussianize(x * r, cfg);
    EXPECT_LT((sample_cov(a) - sample_cov(b)).cwiseAbs().maxCoeff(), 1e-9);
    // ZCA commutes with rotations exactly: W(xR) = W(x) R.
    EXPECT_LT((a * r - b).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(Gaussianize, IdempotentAtCovarianceLevel) {
    CounterRng rng(7, {56});
    Matrix x = standard_normal(80, 3, rng);
    x.col(0) *= 10.0;
    WhitenConfig cfg;
    cfg.ridge_fraction = 0.0;
    const Matrix once = gaussianize(x, cfg);
    const Matrix twice = gaussianize(once, cfg);
    EXPECT_LT((sample_cov(twice) - Matrix::Identity(3, 3)).cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_LT((twice - once).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(L2Normalize, Examples) {
    Matrix x(3, 2);
    x << 3, 4, 0, 1, 0, 0;
    const auto r = l2_normalize_rows(x);
    EXPECT_NEAR(r.rows(0, 0), 0.6, 1e-15);
    EXPECT_NEAR(r.rows(0, 1), 0.8, 1e-15);
    EXPECT_EQ(r.rows.row(1), x.row(1));
    EXPECT_EQ(r.rows.row(2), x.row(2));
    EXPECT_EQ(r.zero_rows, std::vector<Eigen::Index>{2});
}
