#include <random>

#include <gtest/gtest.h>

#include "expertaf/pose_geometry.hpp"
#include "expertaf/synthetic.hpp"
#include "oracles.hpp"

using namespace expertaf;

namespace {

PointCloud random_cloud(std::mt19937_64& rng, Eigen::Index n) {
    std::normal_distribution<double> d(0.0, 0.5);
    PointCloud p(n, 3);
    for (Eigen::Index i = 0; i < n; ++i)
        for (int a = 0; a < 3; ++a) p(i, a) = d(rng);
    return p;
}

PoseFrame random_frame(std::mt19937_64& rng) {
    JointMatrix m = random_cloud(rng, kNumJoints);
    return PoseFrame(m);
}

} // namespace

TEST(PoseFrame, RejectsNonFinite) {
    JointMatrix m = JointMatrix::Zero();
    m(3, 1) = std::numeric_limits<double>::quiet_NaN();
    EXPECT_THROW(PoseFrame{m}, InvalidPose);
}

TEST(PoseSequence, WindowBounds) {
    std::mt19937_64 rng(1);
    PoseSequence s(std::vector<PoseFrame>(10, random_frame(rng)), 32.0);
    EXPECT_NO_THROW(s.view(Window{2, 8}));
    EXPECT_THROW(s.view(Window{3, 8}), InvalidWindow);
    EXPECT_THROW(s.view(Window{0, 0}), InvalidWindow);
    EXPECT_THROW(PoseSequence({}, 32.0), InvalidPose);
    EXPECT_THROW(PoseSequence(std::vector<PoseFrame>(1), 0.0), InvalidPose);
}

TEST(Procrustes, RecoversKnownTransform) {
    std::mt19937_64 rng(2);
    for (int t = 0; t < 50; ++t) {
        const PointCloud src = random_cloud(rng, 17);
        const auto g = synthetic::random_similarity(rng);
        const auto fit = procrustes_fit(src, g.apply(src));
        EXPECT_NEAR(fit.transform.scale, g.scale, 1e-9);
        EXPECT_LT((fit.transform.rotation - g.rotation).cwiseAbs().maxCoeff(), 1e-9);
        EXPECT_LT((fit.transform.translation - g.translation).cwiseAbs().maxCoeff(), 1e-9);
        EXPECT_LT(fit.residual, 1e-18);
    }
}

TEST(Procrustes, MatchesQuaternionOracle) {
    std::mt19937_64 rng(3);
    for (int t = 0; t < 200; ++t) {
        const auto n = static_cast<Eigen::Index>(3 + t % 15);
        const PointCloud a = random_cloud(rng, n), b = random_cloud(rng, n);
        for (bool scale : {true, false}) {
            const auto fit = procrustes_fit(a, b, {scale});
            const auto ref = oracle::horn_fit(oracle::to_points(a), oracle::to_points(b), scale);
            EXPECT_NEAR(fit.residual, ref.residual, 1e-9 * (1 + ref.residual));
            EXPECT_TRUE(fit.transform.is_valid());
            if (!scale) EXPECT_EQ(fit.transform.scale, 1.0);
        }
    }
}

TEST(Procrustes, NoWorseThanRotationGrid) {
    std::mt19937_64 rng(4);
    for (int t = 0; t < 4; ++t) {
        const PointCloud a = random_cloud(rng, 5), b = random_cloud(rng, 5);
        for (bool scale : {true, false}) {
            const double grid = oracle::grid_search_residual(oracle::to_points(a), oracle::to_points(b), scale);
            EXPECT_LE(procrustes_fit(a, b, {scale}).residual, grid + 1e-6);
        }
    }
}

TEST(Procrustes, NeverReturnsReflection) {
    std::mt19937_64 rng(4);
    for (int t = 0; t < 50; ++t) {
        const PointCloud a = random_cloud(rng, 6);
        PointCloud mirrored = a;
        mirrored.col(0) *= -1.0;
        const auto fit = procrustes_fit(a, mirrored);
        EXPECT_NEAR(fit.transform.rotation.determinant(), 1.0, 1e-12);
        const auto ref = oracle::horn_fit(oracle::to_points(a), oracle::to_points(mirrored));
        EXPECT_NEAR(fit.residual, ref.residual, 1e-9);
    }
}

TEST(Procrustes, Errors) {
    PointCloud a = PointCloud::Ones(5, 3);
    PointCloud b(5, 3);
    b.setRandom();
    EXPECT_THROW(procrustes_fit(a, b), DegenerateInput);
    EXPECT_THROW(procrustes_fit(b, a), DegenerateInput);
    PointCloud c(4, 3);
    c.setRandom();
    EXPECT_THROW(procrustes_fit(b, c), ShapeMismatch);
    EXPECT_THROW(procrustes_fit(b.topRows(2), c.topRows(2)), ShapeMismatch);
}

TEST(PaMpjpe, InvariantToSimilarity) {
    std::mt19937_64 rng(5);
    for (int t = 0; t < 100; ++t) {
        const auto p = random_frame(rng);
        const auto g = synthetic::random_similarity(rng);
        const std::vector<PoseFrame> a{p}, b{g.apply(p)};
        EXPECT_LT(pa_mpjpe(b, a), 1e-6);
        EXPECT_LT(pa_mpjpe(b, a, {AlignMode::PerSequence, true}), 1e-6);
    }
}

TEST(PaMpjpe, RigidModeSeesScale) {
    std::mt19937_64 rng(6);
    const auto p = random_frame(rng);
    SimilarityTransform g;
    g.scale = 2.0;
    const std::vector<PoseFrame> a{p}, b{g.apply(p)};
    EXPECT_LT(pa_mpjpe(b, a), 1e-6);
    EXPECT_GT(pa_mpjpe(b, a, {AlignMode::PerFrame, false}), 1.0);
}

// One transform for the whole stack can only do worse than one per frame.
TEST(PaMpjpe, PerSequenceAtLeastPerFrame) {
    std::mt19937_64 rng(7);
    for (int t = 0; t < 30; ++t) {
        std::vector<PoseFrame> a, b;
        for (int i = 0; i < 5; ++i) {
            a.push_back(random_frame(rng));
            b.push_back(random_frame(rng));
        }
        EXPECT_GE(pa_mpjpe(a, b, {AlignMode::PerSequence, true}) + 1e-9, pa_mpjpe(a, b));
    }
}

// Mean joint error rebuilt from the quaternion fit.
TEST(PaMpjpe, MeanJointErrorMatchesOracle) {
    std::mt19937_64 rng(8);
    for (int t = 0; t < 20; ++t) {
        const auto p = random_frame(rng), q = random_frame(rng);
        const std::vector<PoseFrame> a{p}, b{q};
        const auto ref = oracle::horn_fit(oracle::to_points(p.joints()), oracle::to_points(q.joints()));
        const auto& src = p.joints();
        const auto& tgt = q.joints();
        Eigen::Matrix3d r;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) r(i, j) = ref.rotation[i][j];
        const Eigen::RowVector3d ms = src.colwise().mean(), mt = tgt.colwise().mean();
        double err = 0;
        for (int i = 0; i < 17; ++i) {
            const Eigen::RowVector3d moved = ref.scale * ((src.row(i) - ms) * r.transpose()) + mt;
            err += (moved - tgt.row(i)).norm();
        }
        EXPECT_NEAR(pa_mpjpe(a, b), 1000.0 * err / 17.0, 1e-7);
    }
}

TEST(PaMpjpe, LengthMismatch) {
    std::mt19937_64 rng(9);
    const std::vector<PoseFrame> a{random_frame(rng)}, b{random_frame(rng), random_frame(rng)};
    EXPECT_THROW(pa_mpjpe(a, b), LengthMismatch);
    EXPECT_THROW(pa_mpjpe(std::span<const PoseFrame>{}, std::span<const PoseFrame>{}), LengthMismatch);
}

TEST(AlignMode, Parse) {
    EXPECT_EQ(parse_align_mode("PerSequence"), AlignMode::PerSequence);
    EXPECT_EQ(parse_align_mode("per-frame"), AlignMode::PerFrame);
    EXPECT_THROW(parse_align_mode("sideways"), ConfigError);
}
