#include "ws3d/annotate/bev_raster.hpp"

#include <algorithm>
#include <cmath>

namespace ws3d::annotate {

namespace {
// keeps exact multiples of the resolution from rounding into the cell below
constexpr double kEdge = 1e-9;
}  // namespace

int BevWindow::width() const { return static_cast<int>(std::lround((x_max - x_min) / resolution)); }
int BevWindow::height() const { return static_cast<int>(std::lround((z_max - z_min) / resolution)); }

std::optional<Pixel> world_to_pixel(const BevWindow& w, double x, double z) {
    if (!(x >= w.x_min && x < w.x_max && z > w.z_min && z <= w.z_max)) return std::nullopt;
    const int u = static_cast<int>(std::floor((x - w.x_min) / w.resolution + kEdge));
    const int v = static_cast<int>(std::floor((w.z_max - z) / w.resolution + kEdge));
    if (u < 0 || v < 0 || u >= w.width() || v >= w.height()) return std::nullopt;
    return Pixel{u, v};
}

Vec2 pixel_to_world(const BevWindow& w, double u, double v) {
    return {w.x_min + u * w.resolution, w.z_max - v * w.resolution};
}

Vec2 pixel_center(const BevWindow& w, Pixel p) { return pixel_to_world(w, p.u + 0.5, p.v + 0.5); }

BevRaster rasterize_bev(const PointCloud& scene, const BevWindow& window) {
    BevRaster r;
    r.window = window;
    const auto n = static_cast<std::size_t>(window.width()) * static_cast<std::size_t>(window.height());
    r.height.assign(n, 0.0f);
    r.density.assign(n, 0.0f);
    std::vector<int> count(n, 0);
    for (const auto& p : scene.points) {
        const auto px = world_to_pixel(window, p.x, p.z);
        if (!px) continue;
        const auto k = static_cast<std::size_t>(px->v * window.width() + px->u);
        const double h = std::clamp((-p.y + 3.0) / 4.0, 1.0 / 255.0, 1.0);
        r.height[k] = std::max(r.height[k], static_cast<float>(h));
        ++count[k];
    }
    const double norm = std::log(64.0);
    for (std::size_t k = 0; k < n; ++k) {
        if (count[k] > 0) r.density[k] = static_cast<float>(std::min(1.0, std::log1p(count[k]) / norm));
    }
    return r;
}

std::vector<std::uint8_t> to_bytes(const std::vector<float>& channel) {
    std::vector<std::uint8_t> out(channel.size());
    for (std::size_t i = 0; i < channel.size(); ++i) {
        out[i] = static_cast<std::uint8_t>(std::lround(std::clamp(channel[i], 0.0f, 1.0f) * 255.0f));
    }
    return out;
}

}  // namespace ws3d::annotate
