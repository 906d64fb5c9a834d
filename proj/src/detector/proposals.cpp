#include "ws3d/detector/proposals.hpp"

#include <algorithm>
#include <numeric>

#include "ws3d/error.hpp"
#include "ws3d/weak_supervision.hpp"
#include "ws3d/detector/losses.hpp"

namespace ws3d::detector {

using nn::Matrix;

namespace {

std::vector<std::size_t> by_confidence(std::span<const double> conf) {
    std::vector<std::size_t> order(conf.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return conf[a] > conf[b]; });
    return order;
}

}  // namespace

std::vector<CylinderProposal> generate_proposals(const PointCloud& points, std::span<const double> fg,
                                                 const Matrix& center_pred, const Stage1Config& cfg,
                                                 const ProfileParams& profile) {
    if (fg.size() != points.size() || static_cast<std::size_t>(center_pred.rows()) != points.size()) {
        throw ShapeError("generate_proposals: outputs are not aligned with the points");
    }
    std::vector<CylinderProposal> out;
    for (std::size_t i = 0; i < points.size(); ++i) {
        if (!(fg[i] > cfg.fg_threshold)) continue;
        const auto row = std::span<const double>(center_pred.data() + static_cast<Eigen::Index>(i) * center_pred.cols(),
                                                 static_cast<std::size_t>(center_pred.cols()));
        const auto [x, z] = decode_center(points[i], decode_center_row(row, cfg.bins.num_bins), cfg.bins);
        if (profile.search_range) {
            const auto& r = *profile.search_range;
            if (x < r[0] || x > r[1] || z < r[2] || z > r[3]) continue;
        }
        out.push_back({x, z, profile.proposal_radius, fg[i]});
    }
    return out;
}

std::vector<std::size_t> ca_nms_indices(std::span<const CylinderProposal> props, double min_distance) {
    std::vector<double> conf;
    conf.reserve(props.size());
    for (const auto& p : props) conf.push_back(p.confidence);
    const double d2 = min_distance * min_distance;
    std::vector<std::size_t> kept;
    for (std::size_t i : by_confidence(conf)) {
        bool ok = true;
        for (std::size_t k : kept) {
            const double dx = props[i].cx - props[k].cx;
            const double dz = props[i].cz - props[k].cz;
            if (dx * dx + dz * dz <= d2) {
                ok = false;
                break;
            }
        }
        if (ok) kept.push_back(i);
    }
    return kept;
}

std::vector<CylinderProposal> ca_nms(std::span<const CylinderProposal> props, double min_distance) {
    std::vector<CylinderProposal> out;
    for (std::size_t i : ca_nms_indices(props, min_distance)) out.push_back(props[i]);
    return out;
}

Matrix resample_rows(const Matrix& rows, int n, std::mt19937_64& rng) {
    const auto m = static_cast<int>(rows.rows());
    if (m == 0) throw EmptyProposal("cannot resample an empty crop");
    std::vector<int> pick;
    pick.reserve(static_cast<std::size_t>(n));
    if (m >= n) {
        std::vector<int> all(static_cast<std::size_t>(m));
        std::iota(all.begin(), all.end(), 0);
        // partial Fisher-Yates
        for (int i = 0; i < n; ++i) {
            std::uniform_int_distribution<int> d(i, m - 1);
            std::swap(all[static_cast<std::size_t>(i)], all[static_cast<std::size_t>(d(rng))]);
        }
        pick.assign(all.begin(), all.begin() + n);
        std::sort(pick.begin(), pick.end());
    } else {
        for (int i = 0; i < m; ++i) pick.push_back(i);
        std::uniform_int_distribution<int> d(0, m - 1);
        while (static_cast<int>(pick.size()) < n) pick.push_back(d(rng));
    }
    Matrix out(n, rows.cols());
    for (int i = 0; i < n; ++i) out.row(i) = rows.row(pick[static_cast<std::size_t>(i)]);
    return out;
}

Matrix cylinder_rows(const PointCloud& scene, std::span<const double> fg, const CylinderProposal& prop) {
    if (fg.size() != scene.size()) throw ShapeError("crop: foreground scores are not aligned with the scene");
    const auto idx = points_in_cylinder(scene, prop);
    Matrix out(static_cast<Eigen::Index>(idx.size()), 5);
    for (std::size_t k = 0; k < idx.size(); ++k) {
        const Point& p = scene[idx[k]];
        out.row(static_cast<Eigen::Index>(k)) << p.x - prop.cx, p.y, p.z - prop.cz, p.intensity, fg[idx[k]];
    }
    return out;
}

Matrix crop_proposal(const PointCloud& scene, std::span<const double> fg, const CylinderProposal& prop, int n,
                     std::mt19937_64& rng) {
    Matrix rows = cylinder_rows(scene, fg, prop);
    if (rows.rows() == 0) throw EmptyProposal("cylindrical proposal contains no points");
    return resample_rows(rows, n, rng);
}

Matrix cuboid_rows(const PointCloud& scene, std::span<const double> fg, const Cuboid& box, double margin) {
    if (fg.size() != scene.size()) throw ShapeError("crop: foreground scores are not aligned with the scene");
    const CanonicalFrame frame = frame_of(box);
    std::vector<Eigen::Index> keep;
    for (std::size_t i = 0; i < scene.size(); ++i) {
        if (contains(box, scene[i], margin)) keep.push_back(static_cast<Eigen::Index>(i));
    }
    Matrix out(static_cast<Eigen::Index>(keep.size()), 5);
    for (std::size_t k = 0; k < keep.size(); ++k) {
        const auto i = static_cast<std::size_t>(keep[k]);
        const Point q = frame.to_local(scene[i]);
        out.row(static_cast<Eigen::Index>(k)) << q.x, q.y, q.z, q.intensity, fg[i];
    }
    return out;
}

Matrix crop_cuboid(const PointCloud& scene, std::span<const double> fg, const Cuboid& box, double margin, int n,
                   std::mt19937_64& rng) {
    Matrix rows = cuboid_rows(scene, fg, box, margin);
    if (rows.rows() == 0) throw EmptyProposal("cuboid crop contains no points");
    return resample_rows(rows, n, rng);
}

std::vector<std::size_t> oriented_nms(std::span<const Cuboid> boxes, std::span<const double> confidence,
                                      double iou_threshold) {
    if (boxes.size() != confidence.size()) throw ShapeError("oriented_nms: boxes and confidences differ in count");
    std::vector<std::size_t> kept;
    for (std::size_t i : by_confidence(confidence)) {
        bool ok = true;
        for (std::size_t k : kept) {
            if (bev_iou(boxes[i], boxes[k]) > iou_threshold) {
                ok = false;
                break;
            }
        }
        if (ok) kept.push_back(i);
    }
    return kept;
}

}  // namespace ws3d::detector
