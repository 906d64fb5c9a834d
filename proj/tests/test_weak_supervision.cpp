#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "ws3d/weak_supervision.hpp"

using namespace ws3d;
using kitti::ClickAnnotation;

namespace {

const PseudoLabelConfig kCar = PseudoLabelConfig::car();
const BinEncoderConfig kBins;

std::vector<ClickAnnotation> one_click(double x, double z) { return {{"Car", x, z}}; }

}  // namespace

TEST(Falloff, FlatInsideNearRadius) {
    EXPECT_DOUBLE_EQ(foreground_falloff(0.0, kCar), 1.0);
    EXPECT_DOUBLE_EQ(foreground_falloff(0.7, kCar), 1.0);
}

TEST(Falloff, GaussianBranchIsContinuousAtSeam) {
    EXPECT_NEAR(foreground_falloff(0.7 + 1e-12, kCar), 1.0, 1e-9);
    EXPECT_NEAR(foreground_falloff(0.7 - 1e-12, kCar), 1.0, 1e-9);
}

TEST(Falloff, OneMeterPastSeam) { EXPECT_NEAR(foreground_falloff(1.7, kCar), std::exp(-1.0 / 3.0), 1e-9); }

TEST(Falloff, MonotoneNonIncreasing) {
    double prev = 2.0;
    for (int i = 0; i <= 1000; ++i) {
        const double f = foreground_falloff(i * 0.01, kCar);
        EXPECT_LE(f, prev);
        EXPECT_GE(f, 0.0);
        prev = f;
    }
}

TEST(ClickDistance, HalvesSquaredHeight) {
    EXPECT_NEAR(click_distance(Point{1, 2, 0}, 1, 0, kCar), std::sqrt(2.0), 1e-12);
    EXPECT_NEAR(click_distance(Point{4, 0, 3}, 0, 0, kCar), 5.0, 1e-12);
}

TEST(PseudoForeground, EmptyCentersGiveZero) {
    EXPECT_EQ(pseudo_foreground(Point{0, 0, 0}, {}, kCar), 0.0);
}

TEST(PseudoForeground, MaxOverCentersAndOrderFree) {
    std::vector<ClickAnnotation> a{{"Car", 0, 0}, {"Car", 3, 0}};
    std::vector<ClickAnnotation> b{a[1], a[0]};
    const Point p{2.2, 0, 0};
    const double f = pseudo_foreground(p, a, kCar);
    EXPECT_DOUBLE_EQ(f, pseudo_foreground(p, b, kCar));
    EXPECT_DOUBLE_EQ(f, foreground_falloff(0.8, kCar));
}

TEST(PseudoForeground, PillarIsBinary) {
    const auto cfg = PseudoLabelConfig::pedestrian();
    const auto c = one_click(0, 0);
    EXPECT_EQ(pseudo_foreground(Point{0.3, 5.0, 0.2}, c, cfg), 1.0);
    EXPECT_EQ(pseudo_foreground(Point{0.4, 0, 0}, c, cfg), 1.0);
    EXPECT_EQ(pseudo_foreground(Point{0.41, 0, 0}, c, cfg), 0.0);
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(-1, 1);
    for (int i = 0; i < 1000; ++i) {
        const double f = pseudo_foreground(Point{u(rng), u(rng), u(rng)}, c, cfg);
        EXPECT_TRUE(f == 0.0 || f == 1.0);
    }
}

TEST(PseudoForeground, CloudVersionMatchesPointwise) {
    PointCloud cloud;
    cloud.points = {{0, 0, 0}, {1, 1, 1}, {3, 0, 2}, {-5, 2, 0}};
    const auto c = one_click(0.5, 0.5);
    const auto fg = pseudo_foreground(cloud, c, kCar);
    for (std::size_t i = 0; i < cloud.size(); ++i) EXPECT_DOUBLE_EQ(fg[i], pseudo_foreground(cloud[i], c, kCar));
}

TEST(SupportPoints, DistanceAndScoreGates) {
    PointCloud cloud;
    cloud.points = {{3, 0, 0}, {5, 0, 0}, {0, 0, 3}};
    const std::vector<double> fg{0.2, 0.9, 0.05};
    const auto idx = select_support_points(cloud, {"Car", 0, 0}, fg, kCar);
    EXPECT_EQ(idx, (std::vector<std::size_t>{0}));
}

TEST(BinCodec, SpecifiedOffsets) {
    auto [b0, r0] = encode_offset(0.0, kBins);
    EXPECT_EQ(b0, 5);
    EXPECT_NEAR(r0, -1.0, 1e-12);
    auto [b1, r1] = encode_offset(3.6, kBins);
    EXPECT_EQ(b1, 9);
    EXPECT_NEAR(r1, 0.0, 1e-12);
    auto [b2, r2] = encode_offset(-4.0, kBins);
    EXPECT_EQ(b2, 0);
    EXPECT_NEAR(r2, -1.0, 1e-12);
}

TEST(BinCodec, ClampsOutOfRangeOffsets) {
    auto [bh, rh] = encode_offset(4.0, kBins);
    EXPECT_EQ(bh, 9);
    EXPECT_NEAR(rh, 1.0, 1e-12);
    auto [bo, ro] = encode_offset(6.0, kBins);
    EXPECT_EQ(bo, 9);
    EXPECT_NEAR(ro, 1.0, 1e-12);
    auto [bl, rl] = encode_offset(-7.0, kBins);
    EXPECT_EQ(bl, 0);
    EXPECT_NEAR(rl, -1.0, 1e-12);
}

TEST(BinCodec, DecodeInvertsEncode) {
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> u(-4.0, 4.0);
    for (int i = 0; i < 10000; ++i) {
        const double off = u(rng);
        const auto [b, r] = encode_offset(off, kBins);
        ASSERT_GE(b, 0);
        ASSERT_LT(b, 10);
        ASSERT_GE(r, -1.0 - 1e-12);
        ASSERT_LE(r, 1.0 + 1e-12);
        EXPECT_NEAR(decode_offset(b, r, kBins), off, 1e-12);
    }
}

TEST(CenterCodec, SpecifiedDecodes) {
    const auto o = decode_center(Point{0, 0, 0}, CenterTarget{5, 5, -1.0, -1.0}, kBins);
    EXPECT_NEAR(o.first, 0.0, 1e-12);
    EXPECT_NEAR(o.second, 0.0, 1e-12);
    // support point at (10, 20), click 3.6 m behind on x and 4 m ahead on z
    const Point p{10, 0, 20};
    const auto t = encode_center(p, 6.4, 24.0, kBins);
    EXPECT_EQ(t.bin_x, 9);
    EXPECT_EQ(t.bin_z, 0);
    const auto d = decode_center(p, t, kBins);
    EXPECT_NEAR(d.first, 6.4, 1e-12);
    EXPECT_NEAR(d.second, 24.0, 1e-12);
}
