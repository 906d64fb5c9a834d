#pragma once

// Cylindrical proposals from stage-1 votes, center-aware NMS, canonical
// crops for stage-2, and oriented NMS over final boxes.

#include <cstddef>
#include <random>
#include <span>
#include <vector>

#include "ws3d/detector/config.hpp"
#include "ws3d/geometry.hpp"
#include "ws3d/nn/graph.hpp"

namespace ws3d::detector {

/// One proposal per point with foreground score above cfg.fg_threshold,
/// centered at that point's decoded vote. `center_pred` is N x 4B.
std::vector<CylinderProposal> generate_proposals(const PointCloud& points, std::span<const double> fg,
                                                 const nn::Matrix& center_pred, const Stage1Config& cfg,
                                                 const ProfileParams& profile);

/// Indices (into `props`) kept by greedy center-distance suppression, in
/// keep order: confidence descending, ties by lower index.
std::vector<std::size_t> ca_nms_indices(std::span<const CylinderProposal> props, double min_distance);
std::vector<CylinderProposal> ca_nms(std::span<const CylinderProposal> props, double min_distance);

/// Exactly n rows: uniform subsampling without replacement when there are
/// more, otherwise every row once plus random repeats.
nn::Matrix resample_rows(const nn::Matrix& rows, int n, std::mt19937_64& rng);

/// In-cylinder points translated to the proposal center, as n x 5 rows of
/// (x, y, z, intensity, foreground). Throws EmptyProposal when no point
/// falls inside.
nn::Matrix crop_proposal(const PointCloud& scene, std::span<const double> fg, const CylinderProposal& prop, int n,
                         std::mt19937_64& rng);

/// Unsampled canonical rows of a cylinder crop (any count, possibly zero).
nn::Matrix cylinder_rows(const PointCloud& scene, std::span<const double> fg, const CylinderProposal& prop);

/// Points inside the cuboid enlarged by `margin`, fully canonicalized
/// (translation and yaw) into the cuboid's frame.
nn::Matrix cuboid_rows(const PointCloud& scene, std::span<const double> fg, const Cuboid& box, double margin);
nn::Matrix crop_cuboid(const PointCloud& scene, std::span<const double> fg, const Cuboid& box, double margin, int n,
                       std::mt19937_64& rng);

/// Greedy suppression by BEV IoU > threshold; returns kept indices in keep
/// order (confidence descending, ties by lower index).
std::vector<std::size_t> oriented_nms(std::span<const Cuboid> boxes, std::span<const double> confidence,
                                      double iou_threshold = 0.3);

}  // namespace ws3d::detector
