#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "ws3d/dataset.hpp"
#include "ws3d/kitti_io.hpp"
#include "ws3d/synthgen.hpp"

using namespace ws3d;
using namespace ws3d::synth;

namespace {

SynthConfig small(int scenes, std::uint64_t seed) {
    SynthConfig c;
    c.scenes = scenes;
    c.seed = seed;
    return c;
}

}  // namespace

TEST(Synth, SameSeedSameScene) {
    const auto a = generate_scene(small(1, 3), 5);
    const auto b = generate_scene(small(1, 3), 5);
    ASSERT_EQ(a.cloud.size(), b.cloud.size());
    for (std::size_t i = 0; i < a.cloud.size(); ++i) {
        EXPECT_EQ(a.cloud[i].x, b.cloud[i].x);
        EXPECT_EQ(a.cloud[i].intensity, b.cloud[i].intensity);
    }
    ASSERT_EQ(a.boxes.size(), b.boxes.size());
    const auto c = generate_scene(small(1, 4), 5);
    EXPECT_TRUE(c.cloud.size() != a.cloud.size() || c.cloud[0].x != a.cloud[0].x);
}

TEST(Synth, ScenesAreIndependentOfDatasetSize) {
    const auto few = generate_dataset(small(2, 9));
    const auto many = generate_dataset(small(4, 9));
    ASSERT_EQ(few[1].cloud.size(), many[1].cloud.size());
    EXPECT_EQ(few[1].boxes.front().cx, many[1].boxes.front().cx);
}

TEST(Synth, BoxesStayInRangeAndNeverOverlap) {
    const auto cfg = small(20, 11);
    for (const auto& s : generate_dataset(cfg)) {
        EXPECT_GE(static_cast<int>(s.boxes.size()), cfg.min_vehicles);
        EXPECT_LE(static_cast<int>(s.boxes.size()), cfg.max_vehicles);
        for (std::size_t i = 0; i < s.boxes.size(); ++i) {
            const Cuboid& b = s.boxes[i];
            EXPECT_NO_THROW(validate(b));
            EXPECT_GE(b.cx, cfg.x_min);
            EXPECT_LE(b.cx, cfg.x_max);
            EXPECT_GE(b.cz, cfg.z_min);
            EXPECT_LE(b.cz, cfg.z_max);
            // standing on the ground
            EXPECT_NEAR(b.cy + 0.5 * b.h, cfg.ground_y, 1e-9);
            for (std::size_t j = i + 1; j < s.boxes.size(); ++j) EXPECT_EQ(bev_iou(b, s.boxes[j]), 0.0);
        }
    }
}

TEST(Synth, UnoccludedBoxesHavePoints) {
    for (const auto& s : generate_dataset(small(20, 12))) {
        for (std::size_t i = 0; i < s.boxes.size(); ++i) {
            if (s.occlusion[i] == 0) EXPECT_GE(count_points_in_box(s.cloud, s.boxes[i]), 1u);
            EXPECT_GE(s.occlusion[i], 0);
            EXPECT_LE(s.occlusion[i], 2);
        }
    }
}

TEST(Synth, ShadowingRemovesPoints) {
    auto on = small(1, 13);
    auto off = on;
    off.shadowing = false;
    EXPECT_LT(generate_scene(on, 0).cloud.size(), generate_scene(off, 0).cloud.size());
}

TEST(Synth, ClickNoiseStatistics) {
    auto cfg = small(1, 14);
    cfg.click_sigma_x = 0.25;
    cfg.click_sigma_z = 0.75;
    std::vector<Cuboid> boxes(20000, Cuboid{0, 0.9, 20, 1.5, 1.6, 3.9, 0});
    std::mt19937_64 rng(1);
    const auto clicks = generate_clicks(boxes, cfg, rng);
    ASSERT_EQ(clicks.size(), boxes.size());
    double ax = 0, az = 0, mx = 0;
    for (const auto& c : clicks) {
        ax += std::abs(c.x);
        az += std::abs(c.z - 20);
        mx += c.x;
        EXPECT_EQ(c.cls, "Car");
    }
    const double n = static_cast<double>(clicks.size());
    // E|N(0, s)| = s sqrt(2 / pi)
    EXPECT_NEAR(ax / n, 0.25 * std::sqrt(2 / kPi), 0.1 * 0.25 * std::sqrt(2 / kPi));
    EXPECT_NEAR(az / n, 0.75 * std::sqrt(2 / kPi), 0.1 * 0.75 * std::sqrt(2 / kPi));
    EXPECT_NEAR(mx / n, 0.0, 0.01);
}

TEST(Synth, OneClickPerBoxAndExactPreciseCount) {
    auto cfg = small(12, 15);
    cfg.precise_fraction = 0.25;
    const auto scenes = generate_dataset(cfg);
    std::size_t total = 0, precise = 0;
    for (const auto& s : scenes) {
        EXPECT_EQ(s.clicks.size(), s.boxes.size());
        EXPECT_EQ(s.precise.size(), s.boxes.size());
        total += s.boxes.size();
        for (bool p : s.precise) precise += p;
    }
    EXPECT_EQ(precise, static_cast<std::size_t>(std::llround(0.25 * static_cast<double>(total))));
}

TEST(Synth, WrittenTreeReadsBack) {
    const auto cfg = small(3, 16);
    const auto scenes = generate_dataset(cfg);
    const auto root = std::filesystem::temp_directory_path() / "ws3d_synth_tree";
    std::filesystem::remove_all(root);
    write_dataset(root, scenes, cfg);
    for (const char* d : {"velodyne", "label_2", "calib", "clicks", "instances"})
        EXPECT_TRUE(std::filesystem::is_directory(root / d)) << d;
    const auto ids = data::scene_ids(root);
    ASSERT_EQ(ids.size(), 3u);
    EXPECT_EQ(ids[0], scene_id(0));
    for (std::size_t k = 0; k < scenes.size(); ++k) {
        const auto& s = scenes[k];
        const auto cloud = data::load_cloud(root, s.id);
        ASSERT_EQ(cloud.size(), s.cloud.size());
        // float32 storage through the calibration round trip
        for (std::size_t i = 0; i < cloud.size(); i += 97) {
            EXPECT_NEAR(cloud[i].x, s.cloud[i].x, 1e-4);
            EXPECT_NEAR(cloud[i].y, s.cloud[i].y, 1e-4);
            EXPECT_NEAR(cloud[i].z, s.cloud[i].z, 1e-4);
        }
        const auto labels = data::load_labels(root / "label_2", s.id, "Car");
        ASSERT_EQ(labels.size(), s.boxes.size());
        for (std::size_t i = 0; i < labels.size(); ++i) {
            const Cuboid b = kitti::to_cuboid(labels[i]);
            EXPECT_NEAR(b.cx, s.boxes[i].cx, 1e-2);
            EXPECT_NEAR(b.cz, s.boxes[i].cz, 1e-2);
            EXPECT_NEAR(normalize_angle(b.theta - s.boxes[i].theta), 0, 1e-2);
        }
        const auto clicks = kitti::read_clicks_file(root / "clicks" / (s.id + ".txt"));
        EXPECT_EQ(clicks.size(), s.clicks.size());
    }
    std::filesystem::remove_all(root);
}
