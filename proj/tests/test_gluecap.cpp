#include <gtest/gtest.h>

#include <cmath>

#include "geodiag/gluecap.hpp"
#include "geodiag/nnls.hpp"
#include "oracles.hpp"

using namespace geodiag;

namespace {

// Exhaustive NNLS: best unconstrained least-squares solution over every
// support set that is feasible.
Vector nnls_enumerate(const Matrix& a, const Vector& b) {
    const auto k = a.cols();
    Vector best = Vector::Zero(k);
    double best_obj = b.squaredNorm();
    for (std::uint32_t mask = 1; mask < (1u << k); ++mask) {
        std::vector<Eigen::Index> idx;
        for (Eigen::Index i = 0; i < k; ++i)
            if (mask & (1u << i)) idx.push_back(i);
        Matrix as(a.rows(), static_cast<Eigen::Index>(idx.size()));
        for (std::size_t j = 0; j < idx.size(); ++j) as.col(static_cast<Eigen::Index>(j)) = a.col(idx[j]);
        const Vector z = as.completeOrthogonalDecomposition().solve(b);
        if ((z.array() < 0.0).any()) continue;
        const double obj = (as * z - b).squaredNorm();
        if (obj < best_obj - 1e-12) {
            best_obj = obj;
            best.setZero();
            for (std::size_t j = 0; j < idx.size(); ++j) best[idx[j]] = z[static_cast<Eigen::Index>(j)];
        }
    }
    return best;
}

std::vector<ClassManifold> random_manifolds(CounterRng& rng, std::size_t p, std::size_t points, Eigen::Index n) {
    std::vector<ClassManifold> ms;
    for (std::size_t mu = 0; mu < p; ++mu) ms.push_back({static_cast<std::uint32_t>(mu), standard_normal(static_cast<Eigen::Index>(points), n, rng)});
    return ms;
}

// (<t,x>/||x||)^2 for x = sum_i y^mu lambda_i z_i, evaluated directly.
double qp_objective(const std::vector<ClassManifold>& ms, const Dichotomy& y, const Vector& t, const Vector& lambda) {
    Vector x = Vector::Zero(t.size());
    Eigen::Index k = 0;
    for (std::size_t mu = 0; mu < ms.size(); ++mu)
        for (Eigen::Index i = 0; i < ms[mu].points.rows(); ++i)
            x += y.y[mu] * lambda[k++] * ms[mu].points.row(i).transpose();
    const double n2 = x.squaredNorm();
    return n2 > 0 ? std::pow(t.dot(x), 2) / n2 : 0.0;
}

} // namespace

TEST(Nnls, MatchesSupportEnumeration) {
    for (std::uint64_t s = 0; s < 40; ++s) {
        CounterRng rng(s, {99});
        const Eigen::Index m = 3 + static_cast<Eigen::Index>(s % 4);
        const Eigen::Index k = 2 + static_cast<Eigen::Index>(s % 5);
        const Matrix a = standard_normal(m, k, rng);
        const Vector b = standard_normal(m, rng);
        const auto r = nnls_gram(a.transpose() * a, a.transpose() * b);
        const Vector ref = nnls_enumerate(a, b);
        EXPECT_TRUE(r.converged) << "seed " << s;
        EXPECT_NEAR((a * r.x - b).squaredNorm(), (a * ref - b).squaredNorm(), 1e-9) << "seed " << s;
        EXPECT_GE(r.x.minCoeff(), 0.0);
    }
}

TEST(Nnls, ZeroRightHandSide) {
    const Matrix g = Matrix::Identity(3, 3);
    const auto r = nnls_gram(g, Vector::Zero(3));
    EXPECT_TRUE(r.converged);
    EXPECT_EQ(r.x.norm(), 0.0);
}

TEST(Nnls, DuplicateColumnsStillConverge) {
    Matrix a(3, 3);
    a << 1, 1, 0, 0, 0, 1, 0, 0, 0;
    const Vector b = Vector::Ones(3);
    const auto r = nnls_gram(a.transpose() * a, a.transpose() * b);
    EXPECT_TRUE(r.converged);
    EXPECT_NEAR((a * r.x - b).squaredNorm(), 1.0, 1e-12);
}

TEST(Dichotomy, Validation) {
    EXPECT_THROW(validate_dichotomy({{1, 1}}, 2), Error);
    EXPECT_THROW(validate_dichotomy({{1, 0}}, 2), Error);
    EXPECT_THROW(validate_dichotomy({{1, -1}}, 3), Error);
    EXPECT_NO_THROW(validate_dichotomy({{1, -1, 1}}, 3));
    EXPECT_EQ(make_dichotomies(2, DichotomyMode::All).size(), 1u);
    EXPECT_EQ(make_dichotomies(4, DichotomyMode::OneVsRest).size(), 4u);
    EXPECT_EQ(make_dichotomies(4, DichotomyMode::All).size(), 14u);
}

TEST(InnerQp, TwoPointExampleByGrid) {
    std::vector<ClassManifold> ms = {{0, Matrix(1, 2)}, {1, Matrix(1, 2)}};
    ms[0].points << 1, 0;
    ms[1].points << 0, 1;
    Vector t(2);
    t << 1, -1;
    const Dichotomy y{{1, -1}};
    const auto sol = solve_inner_qp(ms, y, t);
    EXPECT_TRUE(sol.converged);
    EXPECT_NEAR(sol.value, 2.0, 1e-12);
    EXPECT_EQ(sol.sign, 1);

    double grid_best = 0.0;
    for (int i = 0; i <= 1000; ++i) {
        Vector l(2);
        l << i / 1000.0, 1.0 - i / 1000.0;
        grid_best = std::max(grid_best, qp_objective(ms, y, t, l));
    }
    EXPECT_NEAR(sol.value, grid_best, 1e-9);
    // sign * <t, x> = 1 at the returned lambda.
    EXPECT_NEAR(sol.lambda[0] * 1.0 + sol.lambda[1] * 1.0, 1.0, 1e-12);
}

TEST(InnerQp, OrthogonalDirectionIsInfeasible) {
    std::vector<ClassManifold> ms = {{0, Matrix(2, 3)}, {1, Matrix(1, 3)}};
    ms[0].points << 1, 0, 0, 1, 1, 0;
    ms[1].points << 0, 1, 0;
    Vector t(3);
    t << 0, 0, 2;
    const auto sol = solve_inner_qp(ms, {{1, -1}}, t);
    EXPECT_EQ(sol.value, 0.0);
    EXPECT_EQ(sol.sign, 0);
    EXPECT_EQ(sol.lambda.norm(), 0.0);
}

TEST(InnerQp, QuadraticInTAndDirectionInvariant) {
    CounterRng rng(5, {1});
    const auto ms = random_manifolds(rng, 2, 4, 6);
    const Vector t = standard_normal(6, rng);
    const Dichotomy y{{1, -1}};
    const auto a = solve_inner_qp(ms, y, t);
    const auto b = solve_inner_qp(ms, y, 3.0 * t);
    EXPECT_NEAR(b.value, 9.0 * a.value, 1e-9 * b.value);
    ASSERT_GT(a.lambda.norm(), 0.0);
    EXPECT_NEAR((a.lambda.normalized() - b.lambda.normalized()).norm(), 0.0, 1e-9);
}

TEST(InnerQp, ValueWithinBoundsAndScaleInvariant) {
    for (std::uint64_t s = 0; s < 30; ++s) {
        CounterRng rng(s, {2});
        const auto ms = random_manifolds(rng, 2, 1 + s % 5, 3 + static_cast<Eigen::Index>(s % 8));
        const Vector t = standard_normal(ms[0].points.cols(), rng);
        const Dichotomy y{{1, -1}};
        const auto sol = solve_inner_qp(ms, y, t);
        EXPECT_TRUE(sol.converged);
        EXPECT_LE(sol.kkt_residual, 1e-8);
        EXPECT_GE(sol.value, 0.0);
        EXPECT_LE(sol.value, t.squaredNorm() * (1 + 1e-12));
        EXPECT_GE(sol.lambda.minCoeff(), 0.0);
        if (sol.sign != 0) {
            EXPECT_NEAR(qp_objective(ms, y, t, sol.lambda), sol.value, 1e-9 * std::max(1.0, sol.value));
            EXPECT_NEAR(qp_objective(ms, y, t, 2.0 * sol.lambda), sol.value, 1e-9 * std::max(1.0, sol.value));
        }
    }
}

TEST(InnerQp, MatchesDenseGridOnTinyInstances) {
    for (std::uint64_t s = 0; s < 50; ++s) {
        const auto [ms, t] = oracle::tiny_qp_instance(s);
        const Dichotomy y{{1, -1}};
        const auto sol = solve_inner_qp(ms, y, t);
        const auto grid = oracle::grid_qp(ms, y, t);
        EXPECT_TRUE(sol.converged) << "instance " << s;
        EXPECT_NEAR(sol.value, grid.refined, 1e-3) << "instance " << s;
        // No grid point may beat the optimum.
        EXPECT_GE(sol.value, grid.refined - 1e-12) << "instance " << s;
    }
}

TEST(Anchors, MassRulesAndFallback) {
    std::vector<ClassManifold> ms = {{0, Matrix(2, 2)}, {1, Matrix(2, 2)}};
    ms[0].points << 1, 0, 3, 0;
    ms[1].points << 0, 1, 0, 5;
    QPSolution sol;
    sol.lambda = Vector(4);
    sol.lambda << 0, 2, 1, 1;
    auto a = extract_anchors(sol, ms);
    EXPECT_TRUE(a.anchors.row(0).isApprox(Eigen::RowVector2d(3, 0)));
    EXPECT_TRUE(a.anchors.row(1).isApprox(Eigen::RowVector2d(0, 3)));
    EXPECT_FALSE(a.centroid_fallback[0]);
    sol.lambda << 1, 1, 0, 0;
    a = extract_anchors(sol, ms);
    EXPECT_TRUE(a.anchors.row(0).isApprox(Eigen::RowVector2d(2, 0)));
    EXPECT_TRUE(a.centroid_fallback[1]);
    EXPECT_TRUE(a.anchors.row(1).isApprox(Eigen::RowVector2d(0, 3)));
    EXPECT_EQ(a.mass[1], 0.0);
}

TEST(Anchors, LieInConvexHull) {
    CounterRng rng(11, {4});
    const auto ms = random_manifolds(rng, 2, 6, 10);
    const auto sol = solve_inner_qp(ms, {{1, -1}}, standard_normal(10, rng));
    const auto a = extract_anchors(sol, ms);
    Eigen::Index off = 0;
    for (std::size_t mu = 0; mu < 2; ++mu) {
        const auto rows = ms[mu].points.rows();
        if (!a.centroid_fallback[mu]) {
            const Vector w = sol.lambda.segment(off, rows) / a.mass[static_cast<Eigen::Index>(mu)];
            EXPECT_NEAR(w.sum(), 1.0, 1e-12);
            EXPECT_GE(w.minCoeff(), 0.0);
            EXPECT_LE((ms[mu].points.transpose() * w - a.anchors.row(static_cast<Eigen::Index>(mu)).transpose()).norm(), 1e-8);
        }
        off += rows;
    }
}

TEST(CapacitySample, ProjectionIdentities) {
    CounterRng rng(1, {5});
    const Vector t = standard_normal(7, rng);
    // One row equal to t: projection of t onto its own span.
    Matrix s = t.transpose();
    EXPECT_NEAR(capacity_sample(s, Dichotomy{{1}}, t).a, t.squaredNorm(), 1e-10);

    // Point manifolds: anchors equal their centers, so b = c = 0.
    Matrix centers = standard_normal(2, 7, rng);
    const auto cs = capacity_sample(centers, Dichotomy{{1, -1}}, t, &centers);
    EXPECT_EQ(cs.b, 0.0);
    EXPECT_EQ(cs.c, 0.0);
    const Matrix q = centers.transpose().householderQr().householderQ() * Matrix::Identity(7, 2);
    EXPECT_NEAR(cs.a, (q.transpose() * t).squaredNorm(), 1e-10);
}

TEST(CapacitySample, InvariantsOnRandomInstances) {
    for (std::uint64_t s = 0; s < 20; ++s) {
        CounterRng rng(s, {6});
        const auto ms = random_manifolds(rng, 2, 5, 8);
        const Dichotomy y{{1, -1}};
        const Vector t = standard_normal(8, rng);
        const Matrix centers = standard_normal(2, 8, rng) * 0.1;
        const auto sol = solve_inner_qp(ms, y, t);
        const auto anchors = extract_anchors(sol, ms).anchors;
        const auto cs = capacity_sample(anchors, y, t, &centers);
        EXPECT_GE(cs.a, 0.0);
        EXPECT_LE(cs.a, t.squaredNorm() + 1e-8);
        EXPECT_LE(cs.c, cs.b + 1e-8);
        EXPECT_GE(cs.c, -1e-12);
        // The span of S_y contains each anchor direction.
        for (Eigen::Index mu = 0; mu < 2; ++mu) {
            const Vector d = anchors.row(mu).transpose();
            EXPECT_GE(cs.a + 1e-9, std::pow(t.dot(d), 2) / d.squaredNorm());
        }

        // Rotating points, centers and t together leaves a, b, c unchanged.
        CounterRng rr(s, {7});
        const Matrix r = random_orthonormal(8, 8, rr);
        const auto rot = capacity_sample(anchors * r, y, r.transpose() * t, nullptr);
        const Matrix rc = centers * r;
        const auto rot2 = capacity_sample(anchors * r, y, r.transpose() * t, &rc);
        EXPECT_NEAR(rot.a, cs.a, 1e-8);
        EXPECT_NEAR(rot2.b, cs.b, 1e-8);
        EXPECT_NEAR(rot2.c, cs.c, 1e-8);
    }
}

TEST(EstimateCapacity, PointManifoldsAverageTwo) {
    SphereSpec spec;
    spec.dim = 0;
    spec.ambient = 50;
    spec.points_per_class = 5;
    spec.seed = 3;
    const auto ms = group_by_class(gen_spheres(spec));
    CapacityConfig cfg;
    cfg.n_dirs = 2000;
    cfg.store_anchors = true;
    const auto res = estimate_capacity(ms, make_dichotomies(2, DichotomyMode::OneVsRest), cfg);
    EXPECT_NEAR(res.estimate.n_crit, 2.0, 4 * res.estimate.a.se);
    EXPECT_LE(res.estimate.d_eff, 1e-9);
    EXPECT_LE(res.estimate.psi_eff, 1e-9);
    const auto al = alignment_measures(res);
    EXPECT_LE(al.rho_axis.cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_NEAR(al.rho_center(0, 1), 0.0, 1e-6); // orthogonal centers
}

TEST(EstimateCapacity, DeterministicAcrossJobsAndIdentity) {
    SphereSpec spec;
    spec.dim = 4;
    spec.radius = 0.8;
    spec.ambient = 40;
    spec.points_per_class = 20;
    spec.seed = 9;
    const auto ms = group_by_class(gen_spheres(spec));
    const auto dich = make_dichotomies(2, DichotomyMode::OneVsRest);
    CapacityConfig c1;
    c1.n_dirs = 100;
    c1.seed = 4;
    CapacityConfig c4 = c1;
    c4.jobs = 4;
    const auto r1 = estimate_capacity(ms, dich, c1);
    const auto r4 = estimate_capacity(ms, dich, c4);
    EXPECT_EQ(r1.estimate.a.mean, r4.estimate.a.mean);
    EXPECT_EQ(r1.estimate.b.mean, r4.estimate.b.mean);
    EXPECT_EQ(r1.estimate.c.mean, r4.estimate.c.mean);
    const auto& e = r1.estimate;
    ASSERT_GT(e.c.mean, 0.0);
    ASSERT_GT(e.b.mean, e.c.mean);
    const double rhs = 2.0 * e.d_eff / (e.psi_eff * (1.0 + 1.0 / (e.r_eff * e.r_eff)));
    EXPECT_LE(std::abs(e.n_crit - rhs) / e.n_crit, 1e-9);
    EXPECT_GE(e.psi_eff, 0.0);
    EXPECT_LE(e.psi_eff, 1.0 + 1e-8);
    EXPECT_EQ(e.n_dirs, 100u);
}

TEST(EstimateCapacity, RejectsTooFewDirections) {
    CounterRng rng(1, {8});
    const auto ms = random_manifolds(rng, 2, 3, 4);
    CapacityConfig cfg;
    cfg.n_dirs = 1;
    EXPECT_THROW(estimate_capacity(ms, make_dichotomies(2, DichotomyMode::OneVsRest), cfg), Error);
}

TEST(Alignment, RequiresStoredAnchors) {
    CounterRng rng(1, {9});
    const auto ms = random_manifolds(rng, 2, 3, 6);
    CapacityConfig cfg;
    cfg.n_dirs = 10;
    const auto res = estimate_capacity(ms, make_dichotomies(2, DichotomyMode::OneVsRest), cfg);
    try {
        alignment_measures(res);
        FAIL() << "expected AnchorsNotStored";
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::AnchorsNotStored);
    }
}

TEST(Alignment, SharedFrameRaisesAxisAlignment) {
    SphereSpec spec;
    spec.dim = 3;
    spec.radius = 1.0;
    spec.ambient = 30;
    spec.points_per_class = 30;
    spec.seed = 2;
    CapacityConfig cfg;
    cfg.n_dirs = 300;
    cfg.store_anchors = true;
    const auto dich = make_dichotomies(2, DichotomyMode::OneVsRest);
    const auto sep = alignment_measures(estimate_capacity(group_by_class(gen_spheres(spec)), dich, cfg));
    spec.shared_frame = true;
    const auto shared = alignment_measures(estimate_capacity(group_by_class(gen_spheres(spec)), dich, cfg));
    EXPECT_GT(shared.rho_axis(0, 1), sep.rho_axis(0, 1));
    EXPECT_NEAR(sep.rho_axis(0, 1), sep.rho_axis(1, 0), 1e-12);
    EXPECT_GE(sep.psi_ca.minCoeff(), 0.0);
}

TEST(Alignment, DuplicatedManifolds) {
    CounterRng rng(4, {10});
    const Matrix pts = standard_normal(4, 5, rng);
    std::vector<ClassManifold> ms = {{0, pts}, {1, pts}};
    CapacityConfig cfg;
    cfg.n_dirs = 50;
    cfg.store_anchors = true;
    const auto al = alignment_measures(estimate_capacity(ms, make_dichotomies(2, DichotomyMode::OneVsRest), cfg));
    EXPECT_TRUE(al.rho_center.isApprox(al.rho_center.transpose()));
    EXPECT_GE(al.rho_center.minCoeff(), 0.0);
}

TEST(GluePairwise, SingleRepetitionMatchesDirectEstimate) {
    SphereSpec spec;
    spec.dim = 3;
    spec.ambient = 30;
    spec.num_classes = 3;
    spec.points_per_class = 25;
    spec.seed = 8;
    const auto b = gen_spheres(spec);
    const SubsampleSpec ss{2, 20, 1, 5};
    GlueConfig gc;
    gc.n_dirs = 60;
    const auto rep = glue_pairwise(b, ss, {}, gc);
    ASSERT_EQ(rep.rows.size(), 1u);
    const auto picked = subsample(b, ss, 0);
    const auto direct = glue_on_manifolds(picked, {}, gc, repetition_seed(ss.seed, 0), 1);
    EXPECT_EQ(rep.rows[0].estimate.d_eff, direct.estimate.d_eff);
    EXPECT_EQ(rep.aggregate.at("n_crit").first, direct.estimate.n_crit);
    EXPECT_FALSE(rep.aggregate.at("n_crit").second.has_value());

    const auto again = glue_pairwise(b, ss, {}, gc);
    EXPECT_EQ(to_json(again).dump(), to_json(rep).dump());
}

TEST(GluePairwise, ParallelRepetitionsMatchSerial) {
    SphereSpec spec;
    spec.dim = 2;
    spec.ambient = 20;
    spec.num_classes = 4;
    spec.points_per_class = 15;
    const auto b = gen_spheres(spec);
    const SubsampleSpec ss{2, 10, 6, 1};
    GlueConfig gc;
    gc.n_dirs = 30;
    const auto serial = glue_pairwise(b, ss, {}, gc);
    gc.jobs = 3;
    const auto par = glue_pairwise(b, ss, {}, gc);
    EXPECT_EQ(to_json(serial).dump(), to_json(par).dump());
    EXPECT_EQ(serial.rows.size(), 6u);
    EXPECT_TRUE(serial.aggregate.at("d_eff").second.has_value());
}
