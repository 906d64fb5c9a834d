#pragma once

// KITTI object-benchmark file formats (velodyne .bin, label_2, calib) and
// the click-annotation format used by this project:
//
//     <class> <x> <z>          one click per line, meters in the camera frame
//
// Lines that are empty or start with '#' are skipped when reading clicks.

#include <array>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ws3d/geometry.hpp"

namespace ws3d::kitti {

struct LabelRecord {
    std::string cls;
    double truncation = 0.0;
    int occlusion = 0;
    double alpha = 0.0;
    std::array<double, 4> bbox{};  // left, top, right, bottom (pixels)
    double h = 0.0;
    double w = 0.0;
    double l = 0.0;
    double x = 0.0;  // bottom-face center, rectified camera frame
    double y = 0.0;
    double z = 0.0;
    double rotation_y = 0.0;
    std::optional<double> score;
};

using Mat3x4 = std::array<double, 12>;  // row-major
using Mat3 = std::array<double, 9>;     // row-major

struct CalibRecord {
    Mat3x4 velo_to_cam{1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1, 0};
    Mat3 rect{1, 0, 0, 0, 1, 0, 0, 0, 1};
    Mat3x4 p2{1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1, 0};

    static CalibRecord identity() { return {}; }
};

/// Camera intrinsics and axis permutation of a typical KITTI recording: the
/// velodyne frame (x fwd, y left, z up) maps onto the camera frame without
/// any extra offset. Used for synthetic datasets.
CalibRecord synthetic_calib();

struct ClickAnnotation {
    std::string cls;
    double x = 0.0;
    double z = 0.0;
};

inline constexpr std::size_t kImageWidth = 1242;
inline constexpr std::size_t kImageHeight = 375;

// -- velodyne ---------------------------------------------------------------

PointCloud parse_velodyne(std::span<const std::byte> bytes);
std::vector<std::byte> encode_velodyne(const PointCloud& cloud);
PointCloud read_velodyne(const std::filesystem::path& path);
void write_velodyne(const std::filesystem::path& path, const PointCloud& cloud);

// -- calibration ------------------------------------------------------------

CalibRecord parse_calib(std::string_view text);
std::string format_calib(const CalibRecord& calib);
CalibRecord read_calib(const std::filesystem::path& path);

/// Applies rect * velo_to_cam to every point; intensity is kept.
PointCloud transform_to_internal(const PointCloud& velodyne, const CalibRecord& calib);
/// Inverse of transform_to_internal (for emitting synthetic scans).
PointCloud transform_to_velodyne(const PointCloud& camera, const CalibRecord& calib);

/// Pixel coordinates of a camera-frame point through P2; nullopt when the
/// point is not in front of the camera.
std::optional<std::array<double, 2>> project(const CalibRecord& calib, const Point& p);

// -- labels -----------------------------------------------------------------

std::vector<LabelRecord> parse_labels(std::string_view text);
std::vector<LabelRecord> read_labels(const std::filesystem::path& path);
std::string format_label(const LabelRecord& rec);
std::string format_labels(std::span<const LabelRecord> recs);

/// Lifts the bottom-face y to the volume center and copies rotation_y.
Cuboid to_cuboid(const LabelRecord& rec);

/// Inverse of to_cuboid. The 2D box is the clamped projection of the eight
/// corners, or -1 -1 -1 -1 when any corner lies behind the camera.
LabelRecord from_cuboid(const Cuboid& box, const std::string& cls, const CalibRecord& calib,
                        std::optional<double> score = std::nullopt);

struct Prediction {
    Cuboid box;
    double confidence = 0.0;
};

std::string write_predictions(std::span<const Prediction> preds, const CalibRecord& calib,
                              const std::string& cls = "Car");

// -- clicks -----------------------------------------------------------------

std::vector<ClickAnnotation> read_clicks(std::string_view text);
std::string write_clicks(std::span<const ClickAnnotation> clicks);
std::vector<ClickAnnotation> read_clicks_file(const std::filesystem::path& path);

// -- files ------------------------------------------------------------------

std::string read_text_file(const std::filesystem::path& path);
/// Writes through a temporary sibling and renames it over the target.
void write_text_file_atomic(const std::filesystem::path& path, std::string_view text);

/// Canonical class name ("car" -> "Car", "pedestrian" -> "Pedestrian").
std::string canonical_class(std::string_view name);

}  // namespace ws3d::kitti
