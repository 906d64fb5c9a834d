#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "support/gradcheck.hpp"
#include "ws3d/detector/losses.hpp"
#include "ws3d/error.hpp"

using namespace ws3d;
using namespace ws3d::detector;

namespace {

constexpr double kGradTol = 1e-4;

nn::Matrix random_matrix(Eigen::Index r, Eigen::Index c, std::mt19937_64& rng, double scale = 1.0) {
    std::normal_distribution<double> n(0.0, scale);
    nn::Matrix m(r, c);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
    return m;
}

std::vector<double> row_of(const nn::Matrix& m, Eigen::Index r) {
    std::vector<double> v(static_cast<std::size_t>(m.cols()));
    for (Eigen::Index c = 0; c < m.cols(); ++c) v[static_cast<std::size_t>(c)] = m(r, c);
    return v;
}

}  // namespace

TEST(SmoothL1, BothBranches) {
    EXPECT_DOUBLE_EQ(smooth_l1(0.5), 0.125);
    EXPECT_DOUBLE_EQ(smooth_l1(-2.0), 1.5);
    EXPECT_DOUBLE_EQ(smooth_l1(1.0), 0.5);
    EXPECT_DOUBLE_EQ(smooth_l1_grad(0.5), 0.5);
    EXPECT_DOUBLE_EQ(smooth_l1_grad(-3.0), -1.0);
}

TEST(SegLoss, PerfectPredictionIsZero) {
    const std::vector<double> p{1.0, 0.0};
    const std::vector<double> f{1.0, 0.0};
    EXPECT_NEAR(seg_loss(p, f), 0.0, 1e-15);
}

TEST(SegLoss, HalfConfidenceOnForeground) {
    const std::vector<double> p{0.5};
    const std::vector<double> f{1.0};
    EXPECT_NEAR(seg_loss(p, f), 0.25 * 0.25 * std::log(2.0), 1e-12);
    EXPECT_NEAR(seg_loss(p, f), 0.043322, 1e-6);
}

TEST(SegLoss, SoftTargetMinimizedAtHalf) {
    // f = 0.5 makes the blended probability 0.5 regardless of p
    const std::vector<double> f{0.5};
    const double at_half = seg_loss(std::vector<double>{0.5}, f);
    for (double p = 0.0; p <= 1.0; p += 0.05) EXPECT_GE(seg_loss(std::vector<double>{p}, f) + 1e-15, at_half);
}

TEST(SegLoss, SizeMismatchThrows) {
    EXPECT_THROW(seg_loss(std::vector<double>{0.5}, std::vector<double>{}), ShapeError);
}

TEST(BinLoss, UniformLogitsGiveLogOfBinCount) {
    const std::vector<double> logits(10, 0.3);
    const std::vector<double> res(10, 0.0);
    EXPECT_NEAR(bin_loss(logits, res, {4, 0.0}), std::log(10.0), 1e-12);
    EXPECT_NEAR(bin_loss(logits, res, {4, 0.5}), std::log(10.0) + 0.125, 1e-12);
}

TEST(BinLoss, OutOfRangeTargetThrows) {
    const std::vector<double> v(4, 0.0);
    EXPECT_THROW(bin_loss(v, v, {4, 0.0}), Error);
}

TEST(CenterLoss, SumsBothAxes) {
    std::vector<double> row(40, 0.0);
    EXPECT_NEAR(center_loss(row, CenterTarget{2, 7, 0.5, -0.5}, 10), 2 * std::log(10.0) + 0.25, 1e-12);
}

TEST(ThetaCodec, RoundTripAndBinEdges) {
    for (int nb : {1, 4, 12}) {
        for (int i = -50; i <= 50; ++i) {
            const double th = i * 0.0628;
            const auto t = encode_theta(th, nb);
            EXPECT_GE(t.bin, 0);
            EXPECT_LT(t.bin, nb);
            EXPECT_LE(std::abs(t.residual), 1.0 + 1e-12);
            EXPECT_NEAR(normalize_angle(decode_theta(t.bin, t.residual, nb) - th), 0.0, 1e-12);
        }
    }
    EXPECT_EQ(encode_theta(-kPi, 12).bin, 0);
    EXPECT_NEAR(encode_theta(-kPi, 12).residual, -1.0, 1e-12);
}

TEST(BoxCodec, RegressesOffsetsFromAnchor) {
    const Cuboid anchor{0, 0, 0, 1.5, 1.6, 3.9, 0};
    const Cuboid gt{0.2, -0.1, 0.3, 1.4, 1.8, 4.4, 0.5};
    const auto t = encode_box(gt, anchor, 12);
    EXPECT_NEAR(t.reg[3], -0.1, 1e-12);
    EXPECT_NEAR(t.reg[5], 0.5, 1e-12);
    std::vector<double> row(30, 0.0);
    row[static_cast<std::size_t>(t.theta.bin)] = 5.0;
    row[12 + static_cast<std::size_t>(t.theta.bin)] = t.theta.residual;
    for (std::size_t k = 0; k < 6; ++k) row[24 + k] = t.reg[k];
    const Cuboid back = decode_box(row, anchor, 12);
    EXPECT_NEAR(back.cx, gt.cx, 1e-12);
    EXPECT_NEAR(back.h, gt.h, 1e-12);
    EXPECT_NEAR(back.l, gt.l, 1e-12);
    EXPECT_NEAR(back.theta, gt.theta, 1e-12);
}

TEST(BoxCodec, SizesClampedToOneCentimeter) {
    std::vector<double> row(30, 0.0);
    row[24 + 3] = -10.0;
    EXPECT_DOUBLE_EQ(decode_box(row, Cuboid{0, 0, 0, 1.5, 1.6, 3.9, 0}, 12).h, 0.01);
}

TEST(BoxLoss, ZeroRegressionErrorLeavesOnlyCrossEntropy) {
    const Cuboid anchor{0, 0, 0, 1.5, 1.6, 3.9, 0};
    const auto t = encode_box(anchor, anchor, 12);
    std::vector<double> row(30, 0.0);
    row[12 + static_cast<std::size_t>(t.theta.bin)] = t.theta.residual;
    EXPECT_NEAR(box_loss(row, t, 12), std::log(12.0), 1e-12);
    row[24] = 3.0;
    EXPECT_NEAR(box_loss(row, t, 12), std::log(12.0) + 2.5, 1e-12);
}

TEST(ConfidenceLoss, TargetIsBestIou) {
    const Cuboid a{0, 0, 0, 1, 1, 1, 0};
    const Cuboid half{0.5, 0, 0, 1, 1, 1, 0};
    const Cuboid far{50, 0, 0, 1, 1, 1, 0};
    const std::vector<Cuboid> gts{far, half};
    EXPECT_NEAR(confidence_target(a, gts), 1.0 / 3.0, 1e-12);
    EXPECT_NEAR(confidence_loss(1.0 / 3.0, a, gts), 0.0, 1e-12);
    EXPECT_NEAR(confidence_loss(1.0, a, gts), 0.5 * (2.0 / 3.0) * (2.0 / 3.0), 1e-12);
    EXPECT_EQ(confidence_target(a, {}), 0.0);
}

// -- graph ops ----------------------------------------------------------------

TEST(FusedLosses, SegMatchesReferenceAndGradient) {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(0.05, 0.95);
    nn::Matrix p(9, 1);
    std::vector<double> f(9);
    for (int i = 0; i < 9; ++i) {
        p(i, 0) = u(rng);
        f[static_cast<std::size_t>(i)] = i % 3 == 0 ? 1.0 : u(rng);
    }
    auto prob = oracle::make_input("prob", p);
    nn::Graph g;
    const double fused = seg_loss(g.param(prob), f).scalar();
    EXPECT_NEAR(fused, seg_loss(std::span<const double>(p.data(), 9), f), 1e-12);
    const auto rep = oracle::gradcheck([&](nn::Graph& gg) { return seg_loss(gg.param(prob), f); }, {&prob}, 1e-6);
    EXPECT_LT(rep.max_rel_error, kGradTol);
}

TEST(FusedLosses, CenterMatchesReferenceAndGradient) {
    std::mt19937_64 rng(2);
    const int nb = 5;
    auto pred = oracle::make_input("pred", random_matrix(6, 4 * nb, rng));
    const std::vector<int> rows{0, 3, 5};
    const std::vector<CenterTarget> targets{{1, 4, 0.2, -0.4}, {0, 0, 0.9, 0.1}, {3, 2, -2.5, 0.0}};
    nn::Graph g;
    const double fused = center_loss(g.param(pred), rows, targets, nb).scalar();
    double ref = 0.0;
    for (std::size_t i = 0; i < rows.size(); ++i) ref += center_loss(row_of(pred.value, rows[i]), targets[i], nb);
    EXPECT_NEAR(fused, ref / 3.0, 1e-12);
    const auto rep =
        oracle::gradcheck([&](nn::Graph& gg) { return center_loss(gg.param(pred), rows, targets, nb); }, {&pred});
    EXPECT_LT(rep.max_rel_error, kGradTol);
}

TEST(FusedLosses, BoxMatchesReferenceAndGradient) {
    std::mt19937_64 rng(3);
    const int nb = 4;
    auto pred = oracle::make_input("pred", random_matrix(5, 2 * nb + 6, rng));
    const Cuboid anchor{0, 0, 0, 1.5, 1.6, 3.9, 0};
    const std::vector<int> rows{1, 2, 4};
    std::vector<BoxTarget> targets;
    for (int i = 0; i < 3; ++i) targets.push_back(encode_box(Cuboid{0.1 * i, 0.2, -0.3, 1.2, 1.9, 4.5, 0.7 * i - 1}, anchor, nb));
    targets[1].reg[0] = 4.0;  // linear branch of smooth-l1
    nn::Graph g;
    const double fused = box_loss(g.param(pred), rows, targets, nb).scalar();
    double ref = 0.0;
    for (std::size_t i = 0; i < rows.size(); ++i) ref += box_loss(row_of(pred.value, rows[i]), targets[i], nb);
    EXPECT_NEAR(fused, ref / 3.0, 1e-12);
    const auto rep = oracle::gradcheck([&](nn::Graph& gg) { return box_loss(gg.param(pred), rows, targets, nb); }, {&pred});
    EXPECT_LT(rep.max_rel_error, kGradTol);
}

TEST(FusedLosses, ConfidenceMatchesReferenceAndGradient) {
    std::mt19937_64 rng(4);
    auto conf = oracle::make_input("conf", random_matrix(4, 1, rng));
    const std::vector<double> targets{0.1, 0.9, 0.0, -2.5};
    nn::Graph g;
    const double fused = confidence_loss(g.param(conf), targets).scalar();
    double ref = 0.0;
    for (int i = 0; i < 4; ++i) ref += smooth_l1(conf.value(i, 0) - targets[static_cast<std::size_t>(i)]);
    EXPECT_NEAR(fused, ref / 4.0, 1e-12);
    const auto rep = oracle::gradcheck([&](nn::Graph& gg) { return confidence_loss(gg.param(conf), targets); }, {&conf});
    EXPECT_LT(rep.max_rel_error, kGradTol);
}

TEST(FusedLosses, EmptySupervisionIsZero) {
    nn::Graph g;
    auto p = g.constant(nn::Matrix::Zero(3, 40));
    EXPECT_EQ(center_loss(p, {}, {}, 10).scalar(), 0.0);
    EXPECT_THROW(center_loss(p, {7}, {CenterTarget{}}, 10), ShapeError);
}
