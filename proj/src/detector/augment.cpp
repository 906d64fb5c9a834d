#include "ws3d/detector/augment.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace ws3d::detector {

using nn::Matrix;

namespace {

double deg(double d) { return d * kPi / 180.0; }

double uniform(std::mt19937_64& rng, double a, double b) {
    if (!(b > a)) return a;
    return std::uniform_real_distribution<double>(a, b)(rng);
}

bool coin(std::mt19937_64& rng, double p) {
    if (p <= 0.0) return false;
    if (p >= 1.0) return true;
    return std::bernoulli_distribution(p)(rng);
}

Point rotate(const Point& p, double yaw) {
    const double c = std::cos(yaw);
    const double s = std::sin(yaw);
    return {c * p.x + s * p.z, p.y, -s * p.x + c * p.z, p.intensity};
}

Matrix take_rows(const Matrix& rows, const std::vector<Eigen::Index>& keep) {
    Matrix out(static_cast<Eigen::Index>(keep.size()), rows.cols());
    for (std::size_t k = 0; k < keep.size(); ++k) out.row(static_cast<Eigen::Index>(k)) = rows.row(keep[k]);
    return out;
}

}  // namespace

AugmentConfig no_augmentation() {
    AugmentConfig c;
    c.scene_flip = false;
    c.scene_scale_min = c.scene_scale_max = 1.0;
    c.scene_yaw_deg = 0.0;
    c.insert_max = 0;
    c.insert_prob = 0.0;
    c.drop_prob = 0.0;
    c.proposal_flip = false;
    c.proposal_scale_min = c.proposal_scale_max = 1.0;
    c.proposal_yaw_deg = 0.0;
    c.jitter_variance = 0.0;
    c.fg_flip_prob = 0.0;
    c.sector_prob = 0.0;
    c.removal_prob = 0.0;
    return c;
}

std::vector<InstanceSample> collect_instances(const PointCloud& cloud, std::span<const kitti::ClickAnnotation> clicks,
                                              double radius) {
    std::vector<InstanceSample> out;
    for (const auto& c : clicks) {
        InstanceSample s;
        s.click = c;
        for (std::size_t i : points_in_cylinder(cloud, {c.x, c.z, radius, 0.0})) s.points.points.push_back(cloud[i]);
        if (!s.points.empty()) out.push_back(std::move(s));
    }
    return out;
}

void flip_x(PointCloud& cloud) {
    for (auto& p : cloud.points) p.x = -p.x;
}

Cuboid flip_x(const Cuboid& box) {
    Cuboid b = box;
    b.cx = -b.cx;
    b.theta = normalize_angle(kPi - b.theta);
    return b;
}

Cuboid rotate_yaw(const Cuboid& box, double yaw) {
    const Point c = rotate({box.cx, box.cy, box.cz, 0.0}, yaw);
    Cuboid b = box;
    b.cx = c.x;
    b.cz = c.z;
    b.theta = normalize_angle(box.theta + yaw);
    return b;
}

Cuboid scale_box(const Cuboid& box, double s) {
    return {box.cx * s, box.cy * s, box.cz * s, box.h * s, box.w * s, box.l * s, box.theta};
}

AugmentedScene augment_scene(const PointCloud& cloud, std::span<const kitti::ClickAnnotation> clicks,
                             std::span<const Cuboid> boxes, const AugmentConfig& cfg,
                             std::span<const InstanceSample> bank, double radius, std::mt19937_64& rng) {
    AugmentedScene out{cloud, {clicks.begin(), clicks.end()}, {boxes.begin(), boxes.end()}};

    if (!bank.empty() && cfg.insert_max > 0 && coin(rng, cfg.insert_prob)) {
        std::uniform_int_distribution<std::size_t> pick(0, bank.size() - 1);
        for (int k = 0; k < cfg.insert_max; ++k) {
            const InstanceSample& inst = bank[pick(rng)];
            const double min_d2 = 4.0 * radius * radius;
            const bool clear = std::none_of(out.clicks.begin(), out.clicks.end(), [&](const auto& c) {
                const double dx = c.x - inst.click.x;
                const double dz = c.z - inst.click.z;
                return dx * dx + dz * dz < min_d2;
            });
            if (!clear) continue;
            const CylinderProposal cyl{inst.click.x, inst.click.z, radius, 0.0};
            const auto inside = points_in_cylinder(out.cloud, cyl);
            std::vector<bool> drop(out.cloud.size(), false);
            for (std::size_t i : inside) drop[i] = true;
            PointCloud kept;
            kept.points.reserve(out.cloud.size() + inst.points.size());
            for (std::size_t i = 0; i < out.cloud.size(); ++i)
                if (!drop[i]) kept.points.push_back(out.cloud[i]);
            kept.points.insert(kept.points.end(), inst.points.points.begin(), inst.points.points.end());
            out.cloud = std::move(kept);
            out.clicks.push_back(inst.click);
        }
    }

    if (cfg.drop_prob > 0.0) {
        std::vector<bool> drop(out.cloud.size(), false);
        for (const auto& c : out.clicks) {
            if (!coin(rng, cfg.drop_prob)) continue;
            const double frac = uniform(rng, 0.2, 0.8);
            for (std::size_t i : points_in_cylinder(out.cloud, {c.x, c.z, radius, 0.0})) {
                if (coin(rng, frac)) drop[i] = true;
            }
        }
        PointCloud kept;
        for (std::size_t i = 0; i < out.cloud.size(); ++i)
            if (!drop[i]) kept.points.push_back(out.cloud[i]);
        out.cloud = std::move(kept);
    }

    if (cfg.scene_flip && coin(rng, 0.5)) {
        flip_x(out.cloud);
        for (auto& c : out.clicks) c.x = -c.x;
        for (auto& b : out.boxes) b = flip_x(b);
    }

    const double s = uniform(rng, cfg.scene_scale_min, cfg.scene_scale_max);
    if (s != 1.0) {
        for (auto& p : out.cloud.points) {
            p.x *= s;
            p.y *= s;
            p.z *= s;
        }
        for (auto& c : out.clicks) {
            c.x *= s;
            c.z *= s;
        }
        for (auto& b : out.boxes) b = scale_box(b, s);
    }

    const double yaw = uniform(rng, -deg(cfg.scene_yaw_deg), deg(cfg.scene_yaw_deg));
    if (yaw != 0.0) {
        for (auto& p : out.cloud.points) p = rotate(p, yaw);
        for (auto& c : out.clicks) {
            const Point r = rotate({c.x, 0.0, c.z, 0.0}, yaw);
            c.x = r.x;
            c.z = r.z;
        }
        for (auto& b : out.boxes) b = rotate_yaw(b, yaw);
    }
    return out;
}

Vec2 draw_jitter(const AugmentConfig& cfg, std::mt19937_64& rng) {
    if (cfg.jitter_variance <= 0.0) return {};
    std::normal_distribution<double> n(0.0, std::sqrt(cfg.jitter_variance));
    const double x = n(rng);
    const double z = n(rng);
    return {x, z};
}

Matrix augment_proposal(const Matrix& input, std::optional<Cuboid>& gt, const AugmentConfig& cfg,
                        std::mt19937_64& rng) {
    Matrix rows = input;
    if (cfg.proposal_flip && coin(rng, 0.5)) {
        rows.col(0) *= -1.0;
        if (gt) gt = flip_x(*gt);
    }
    const double s = uniform(rng, cfg.proposal_scale_min, cfg.proposal_scale_max);
    if (s != 1.0) {
        rows.leftCols(3) *= s;
        if (gt) gt = scale_box(*gt, s);
    }
    const double yaw = uniform(rng, -deg(cfg.proposal_yaw_deg), deg(cfg.proposal_yaw_deg));
    if (yaw != 0.0) {
        const double c = std::cos(yaw);
        const double sn = std::sin(yaw);
        for (Eigen::Index i = 0; i < rows.rows(); ++i) {
            const double x = rows(i, 0);
            const double z = rows(i, 2);
            rows(i, 0) = c * x + sn * z;
            rows(i, 2) = -sn * x + c * z;
        }
        if (gt) gt = rotate_yaw(*gt, yaw);
    }
    if (cfg.fg_flip_prob > 0.0) {
        for (Eigen::Index i = 0; i < rows.rows(); ++i) {
            if (coin(rng, cfg.fg_flip_prob)) rows(i, 4) = 1.0 - rows(i, 4);
        }
    }
    const Eigen::Index floor_count = std::min<Eigen::Index>(cfg.min_points, input.rows());
    if (coin(rng, cfg.sector_prob)) {
        const double start = uniform(rng, -kPi, kPi);
        const double span = uniform(rng, 0.5 * kPi, 1.5 * kPi);
        std::vector<Eigen::Index> keep;
        for (Eigen::Index i = 0; i < rows.rows(); ++i) {
            double a = std::atan2(rows(i, 2), rows(i, 0)) - start;
            a = std::fmod(a + 4.0 * kPi, 2.0 * kPi);
            if (a >= span) keep.push_back(i);
        }
        if (static_cast<Eigen::Index>(keep.size()) >= floor_count) rows = take_rows(rows, keep);
    }
    if (coin(rng, cfg.removal_prob) && rows.rows() > floor_count) {
        const auto m = rows.rows();
        const auto k = std::uniform_int_distribution<Eigen::Index>(floor_count, m)(rng);
        std::vector<Eigen::Index> idx(static_cast<std::size_t>(m));
        std::iota(idx.begin(), idx.end(), Eigen::Index{0});
        std::shuffle(idx.begin(), idx.end(), rng);
        idx.resize(static_cast<std::size_t>(k));
        std::sort(idx.begin(), idx.end());
        rows = take_rows(rows, idx);
    }
    return rows;
}

}  // namespace ws3d::detector
