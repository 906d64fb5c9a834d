#pragma once

// Training signals derived from click annotations: the pseudo foreground
// field around each clicked center, support-point selection, and the
// bin + residual encoding of a support point's offset to its center.

#include <cstddef>
#include <span>
#include <vector>

#include "ws3d/geometry.hpp"
#include "ws3d/kitti_io.hpp"

namespace ws3d {

enum class PseudoShape { Gaussian, Pillar };

struct PseudoLabelConfig {
    double near_radius = 0.7;  // full-confidence radius
    double gaussian_mean = 0.7;
    double gaussian_variance = 1.5;  // m^2
    double y_weight = 0.5;
    PseudoShape shape = PseudoShape::Gaussian;
    double pillar_radius = 0.4;
    double click_height = 0.0;  // y_o, the sensor height

    static PseudoLabelConfig car() { return {}; }
    static PseudoLabelConfig pedestrian() {
        PseudoLabelConfig c;
        c.shape = PseudoShape::Pillar;
        return c;
    }
};

struct BinEncoderConfig {
    double half_range = 4.0;
    double bin_size = 0.8;
    int num_bins = 10;

    double residual_scale() const { return 0.5 * bin_size; }
};

struct CenterTarget {
    int bin_x = 0;
    int bin_z = 0;
    double res_x = 0.0;
    double res_z = 0.0;
};

/// Weighted distance between a point and a click center whose height is
/// fixed at cfg.click_height.
double click_distance(const Point& p, double cx, double cz, const PseudoLabelConfig& cfg);

/// Foreground confidence for a given weighted distance (gaussian shape).
double foreground_falloff(double d, const PseudoLabelConfig& cfg);

double pseudo_foreground(const Point& p, std::span<const kitti::ClickAnnotation> centers,
                         const PseudoLabelConfig& cfg);

std::vector<double> pseudo_foreground(const PointCloud& cloud, std::span<const kitti::ClickAnnotation> centers,
                                      const PseudoLabelConfig& cfg);

inline constexpr double kSupportRadius = 4.0;
inline constexpr double kSupportMinForeground = 0.1;

std::vector<std::size_t> select_support_points(const PointCloud& cloud, const kitti::ClickAnnotation& center,
                                               std::span<const double> fg, const PseudoLabelConfig& cfg = {});

/// Bin index and normalized residual of a single axis offset.
std::pair<int, double> encode_offset(double offset, const BinEncoderConfig& cfg);
double decode_offset(int bin, double residual, const BinEncoderConfig& cfg);

CenterTarget encode_center(const Point& p, double center_x, double center_z, const BinEncoderConfig& cfg);
/// Returns (x_o, z_o).
std::pair<double, double> decode_center(const Point& p, const CenterTarget& t, const BinEncoderConfig& cfg);

}  // namespace ws3d
