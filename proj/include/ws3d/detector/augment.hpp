#pragma once

// Scene-level and proposal-level data augmentation. Every draw comes from
// the caller's rng, so a fixed seed reproduces the exact sequence.

#include <optional>
#include <random>
#include <span>
#include <vector>

#include "ws3d/detector/config.hpp"
#include "ws3d/geometry.hpp"
#include "ws3d/kitti_io.hpp"
#include "ws3d/nn/graph.hpp"

namespace ws3d::detector {

/// Turns every augmentation off; applying it returns the input unchanged.
AugmentConfig no_augmentation();

/// Points of one labeled cylinder, kept in world coordinates so they can be
/// pasted back at the same location in another scene.
struct InstanceSample {
    PointCloud points;
    kitti::ClickAnnotation click;
};

std::vector<InstanceSample> collect_instances(const PointCloud& cloud, std::span<const kitti::ClickAnnotation> clicks,
                                              double radius);

struct AugmentedScene {
    PointCloud cloud;
    std::vector<kitti::ClickAnnotation> clicks;
    std::vector<Cuboid> boxes;
};

/// Instance insertion, in-cylinder point drop, mirror flip (x -> -x), global
/// scale and global yaw about the sensor, applied in that order.
AugmentedScene augment_scene(const PointCloud& cloud, std::span<const kitti::ClickAnnotation> clicks,
                             std::span<const Cuboid> boxes, const AugmentConfig& cfg,
                             std::span<const InstanceSample> bank, double radius, std::mt19937_64& rng);

// Rigid pieces, exposed for tests.
void flip_x(PointCloud& cloud);
Cuboid flip_x(const Cuboid& box);
Cuboid rotate_yaw(const Cuboid& box, double yaw);
Cuboid scale_box(const Cuboid& box, double s);

/// Center jitter drawn with the configured per-axis variance.
Vec2 draw_jitter(const AugmentConfig& cfg, std::mt19937_64& rng);

/// Proposal block rows are (x, y, z, intensity, foreground) in a canonical
/// frame centered at the origin. Applies flip, scale, yaw, foreground flips,
/// sector omission and random removal; the removal steps never leave fewer
/// than min(cfg.min_points, rows) rows.
nn::Matrix augment_proposal(const nn::Matrix& rows, std::optional<Cuboid>& gt, const AugmentConfig& cfg,
                            std::mt19937_64& rng);

}  // namespace ws3d::detector
