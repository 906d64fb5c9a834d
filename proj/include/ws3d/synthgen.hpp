#pragma once

// Synthetic lidar scenes in the internal (camera) frame: cars built from a
// body and a cabin block standing on flat ground, plus poles, walls and
// bushes as clutter. Sampling density falls off with the squared range and
// points hidden behind other objects are removed.

#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "ws3d/geometry.hpp"
#include "ws3d/kitti_io.hpp"

namespace ws3d::synth {

struct SynthConfig {
    std::uint64_t seed = 7;
    int scenes = 10;
    int min_vehicles = 3;
    int max_vehicles = 6;
    double size_jitter = 0.05;  // relative standard deviation around the class mean
    double x_min = -20.0;
    double x_max = 20.0;
    double z_min = 6.0;
    double z_max = 45.0;
    double yaw_min = -kPi;
    double yaw_max = kPi;
    double surface_density = 25.0;  // points per m^2 at 10 m range
    int ground_points = 1500;
    int clutter_min = 3;
    int clutter_max = 7;
    bool shadowing = true;
    double click_sigma_x = 0.25;
    double click_sigma_z = 0.75;
    double precise_fraction = 0.25;
    double ground_y = 1.73;  // sensor height above the ground
    std::string cls = "Car";
};

struct SynthScene {
    std::string id;
    PointCloud cloud;
    std::vector<Cuboid> boxes;
    std::vector<int> occlusion;              // 0 / 1 / 2 from the shadowed fraction
    std::vector<kitti::ClickAnnotation> clicks;
    std::vector<bool> precise;               // aligned with boxes
};

std::mt19937_64 scene_rng(std::uint64_t seed, std::uint64_t index);

/// Cloud and boxes only (clicks and precise flags are left empty).
SynthScene generate_scene(const SynthConfig& cfg, std::uint64_t index);

/// One noisy click per box.
std::vector<kitti::ClickAnnotation> generate_clicks(std::span<const Cuboid> boxes, const SynthConfig& cfg,
                                                    std::mt19937_64& rng);

/// All scenes with clicks; exactly round(precise_fraction * total) boxes of
/// the whole dataset are flagged precise.
std::vector<SynthScene> generate_dataset(const SynthConfig& cfg);

std::size_t count_points_in_box(const PointCloud& cloud, const Cuboid& box);

/// KITTI tree: velodyne/, label_2/, calib/, plus clicks/ and instances/
/// (labels of the precise subset only).
void write_dataset(const std::filesystem::path& root, std::span<const SynthScene> scenes, const SynthConfig& cfg);

std::string scene_id(std::uint64_t index);

}  // namespace ws3d::synth
