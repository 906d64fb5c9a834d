#pragma once

// Bird's-eye-view raster of a scene. Pixel (u, v) covers
//   x in [x_min + u * res, x_min + (u + 1) * res)
//   z in (z_max - (v + 1) * res, z_max - v * res]
// so u grows with x and v grows toward the sensor (image rows top-down).

#include <cstdint>
#include <optional>
#include <vector>

#include "ws3d/geometry.hpp"

namespace ws3d::annotate {

struct BevWindow {
    double x_min = -40.0;
    double x_max = 40.0;
    double z_min = 0.0;
    double z_max = 70.4;
    double resolution = 0.1;  // meters per pixel

    int width() const;
    int height() const;
};

struct Pixel {
    int u = 0;
    int v = 0;
};

/// nullopt outside the window.
std::optional<Pixel> world_to_pixel(const BevWindow& w, double x, double z);
/// World coordinates of a (possibly fractional) pixel position; integer
/// inputs give the pixel's corner, +0.5 its center.
Vec2 pixel_to_world(const BevWindow& w, double u, double v);
Vec2 pixel_center(const BevWindow& w, Pixel p);

/// Channels are row-major (v * width + u) and normalized to [0, 1]; empty
/// cells are 0.
///   height:  (height above the sensor + 3 m) / 4 m, clamped to [1/255, 1]
///   density: log(1 + count) / log(64), clamped to [0, 1]
struct BevRaster {
    BevWindow window;
    std::vector<float> height;
    std::vector<float> density;

    float height_at(Pixel p) const { return height[static_cast<std::size_t>(p.v * window.width() + p.u)]; }
    float density_at(Pixel p) const { return density[static_cast<std::size_t>(p.v * window.width() + p.u)]; }
};

BevRaster rasterize_bev(const PointCloud& scene, const BevWindow& window = {});

/// Quantizes a channel to bytes (round(v * 255)).
std::vector<std::uint8_t> to_bytes(const std::vector<float>& channel);

}  // namespace ws3d::annotate
