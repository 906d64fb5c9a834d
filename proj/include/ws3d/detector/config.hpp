#pragma once

// Detector configuration. Two presets exist: `full` carries the published
// network sizes and schedules; `desk` shrinks widths, point counts and
// iteration counts so the whole pipeline trains on one CPU core.

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ws3d/geometry.hpp"
#include "ws3d/nn/adam.hpp"
#include "ws3d/nn/layers.hpp"
#include "ws3d/weak_supervision.hpp"

namespace ws3d::detector {

enum class ClassProfile { Car, Pedestrian };
enum class Preset { Full, Desk };

struct ProfileParams {
    ClassProfile profile = ClassProfile::Car;
    std::string cls = "Car";
    double proposal_radius = 4.0;    // cylinder radius and CA-NMS distance
    double gt_match_distance = 1.4;  // stage-2 training-sample selection
    Cuboid anchor{0, 0, 0, 1.53, 1.63, 3.88, 0};  // mean size (h, w, l)
    PseudoLabelConfig pseudo;
    // optional search window on the (x,z)-plane
    std::optional<std::array<double, 4>> search_range;  // x_min, x_max, z_min, z_max

    static ProfileParams car();
    static ProfileParams pedestrian();
};

struct Stage1Config {
    int num_points = 16384;
    std::vector<nn::LayerSpec> sa;  // four multi-scale levels
    std::vector<nn::LayerSpec> fp;  // four levels, coarse to fine
    int head_hidden = 128;
    BinEncoderConfig bins;
    double fg_threshold = 0.1;

    static constexpr int kSegOut = 1;
    int center_out() const { return 2 * 2 * bins.num_bins; }
};

struct Stage2Config {
    int num_points = 512;
    int in_channels = 5;            // canonical x, y, z, intensity, foreground
    std::vector<nn::LayerSpec> sa;  // four single-scale levels, the last groups all
    std::vector<int> head_hidden{256, 256};
    int theta_bins = 12;
    double cuboid_margin = 0.3;

    int trunk_features() const;
    int box_out() const { return 2 * theta_bins + 6; }
};

struct LossConfig {
    double focal_alpha = 0.25;
    double focal_gamma = 2.0;
    double smooth_l1_beta = 1.0;
    double center_weight = 1.0;  // stage-1: seg + weight * bin
};

struct AugmentConfig {
    // scene level
    bool scene_flip = true;
    double scene_scale_min = 0.95;
    double scene_scale_max = 1.05;
    double scene_yaw_deg = 10.0;
    int insert_max = 2;
    double insert_prob = 0.5;
    double drop_prob = 0.3;
    // proposal level
    bool proposal_flip = true;
    double proposal_scale_min = 0.8;
    double proposal_scale_max = 1.2;
    double proposal_yaw_deg = 90.0;
    double jitter_variance = 0.1;  // per axis, m^2
    double fg_flip_prob = 0.05;
    double sector_prob = 0.3;
    double removal_prob = 0.3;
    int min_points = 32;
};

struct TrainConfig {
    int stage1_iterations = 8000;
    int stage1_batch = 25;
    int stage2_iterations = 50000;  // per network (initial, then refinement)
    int stage2_batch = 800;
    int proposals_per_gt = 16;
    int negatives_per_scene = 2;
    nn::AdamConfig adam;
    int log_every = 100;
    std::uint64_t seed = 1;
};

struct DetectorConfig {
    Preset preset = Preset::Full;
    ProfileParams profile;
    Stage1Config stage1;
    Stage2Config stage2;
    LossConfig loss;
    AugmentConfig augment;
    TrainConfig train;

    static DetectorConfig full(ClassProfile p = ClassProfile::Car);
    static DetectorConfig desk(ClassProfile p = ClassProfile::Car);

    std::string to_json() const;
    static DetectorConfig from_json(const std::string& text);
};

std::string to_string(ClassProfile p);
ClassProfile parse_profile(const std::string& name);
Preset parse_preset(const std::string& name);

}  // namespace ws3d::detector
