#pragma once

// On-disk dataset access: a KITTI-style tree with velodyne/, calib/ and
// label_2/, plus clicks/ (weak labels) and instances/ (precise labels).

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "ws3d/detector/training.hpp"
#include "ws3d/kitti_io.hpp"

namespace ws3d::data {

/// Sorted stems of velodyne/*.bin.
std::vector<std::string> scene_ids(const std::filesystem::path& root);

/// calib/<id>.txt, or the identity when the file is missing.
kitti::CalibRecord scene_calib(const std::filesystem::path& root, const std::string& id);

/// Velodyne scan moved into the camera frame.
PointCloud load_cloud(const std::filesystem::path& root, const std::string& id);

/// Labels of one class from <dir>/<id>.txt; an absent file means no labels.
std::vector<kitti::LabelRecord> load_labels(const std::filesystem::path& dir, const std::string& id,
                                            const std::string& cls);

/// Scenes with clicks of class `cls` and precise cuboids from `instances`
/// (the instances directory may be absent).
std::vector<detector::TrainingScene> load_training_scenes(const std::filesystem::path& root,
                                                          const std::filesystem::path& clicks,
                                                          const std::optional<std::filesystem::path>& instances,
                                                          const std::string& cls);

}  // namespace ws3d::data
