#include "ws3d/weak_supervision.hpp"

#include <algorithm>
#include <cmath>

namespace ws3d {

double click_distance(const Point& p, double cx, double cz, const PseudoLabelConfig& cfg) {
    const double dx = p.x - cx;
    const double dy = p.y - cfg.click_height;
    const double dz = p.z - cz;
    return std::sqrt(dx * dx + cfg.y_weight * dy * dy + dz * dz);
}

double foreground_falloff(double d, const PseudoLabelConfig& cfg) {
    if (d <= cfg.near_radius) return 1.0;
    // N(d) / N(mean): the normalization constants cancel
    const double t = d - cfg.gaussian_mean;
    return std::exp(-(t * t) / (2.0 * cfg.gaussian_variance));
}

double pseudo_foreground(const Point& p, std::span<const kitti::ClickAnnotation> centers,
                         const PseudoLabelConfig& cfg) {
    double f = 0.0;
    for (const auto& o : centers) {
        double v = 0.0;
        if (cfg.shape == PseudoShape::Pillar) {
            v = std::hypot(p.x - o.x, p.z - o.z) <= cfg.pillar_radius ? 1.0 : 0.0;
        } else {
            v = foreground_falloff(click_distance(p, o.x, o.z, cfg), cfg);
        }
        f = std::max(f, v);
    }
    return f;
}

std::vector<double> pseudo_foreground(const PointCloud& cloud, std::span<const kitti::ClickAnnotation> centers,
                                      const PseudoLabelConfig& cfg) {
    std::vector<double> out(cloud.size());
    for (std::size_t i = 0; i < cloud.size(); ++i) out[i] = pseudo_foreground(cloud[i], centers, cfg);
    return out;
}

std::vector<std::size_t> select_support_points(const PointCloud& cloud, const kitti::ClickAnnotation& center,
                                               std::span<const double> fg, const PseudoLabelConfig& cfg) {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        if (fg[i] < kSupportMinForeground) continue;
        if (click_distance(cloud[i], center.x, center.z, cfg) <= kSupportRadius) out.push_back(i);
    }
    return out;
}

std::pair<int, double> encode_offset(double offset, const BinEncoderConfig& cfg) {
    const double span = 2.0 * cfg.half_range;
    const double shifted = std::clamp(offset + cfg.half_range, 0.0, span);
    int bin = static_cast<int>(std::floor(shifted / cfg.bin_size));
    bin = std::clamp(bin, 0, cfg.num_bins - 1);
    const double residual = (shifted - (bin * cfg.bin_size + 0.5 * cfg.bin_size)) / cfg.residual_scale();
    return {bin, residual};
}

double decode_offset(int bin, double residual, const BinEncoderConfig& cfg) {
    return bin * cfg.bin_size + 0.5 * cfg.bin_size + residual * cfg.residual_scale() - cfg.half_range;
}

CenterTarget encode_center(const Point& p, double center_x, double center_z, const BinEncoderConfig& cfg) {
    // offsets are point minus center
    const auto [bx, rx] = encode_offset(p.x - center_x, cfg);
    const auto [bz, rz] = encode_offset(p.z - center_z, cfg);
    return CenterTarget{bx, bz, rx, rz};
}

std::pair<double, double> decode_center(const Point& p, const CenterTarget& t, const BinEncoderConfig& cfg) {
    return {p.x - decode_offset(t.bin_x, t.res_x, cfg), p.z - decode_offset(t.bin_z, t.res_z, cfg)};
}

}  // namespace ws3d
