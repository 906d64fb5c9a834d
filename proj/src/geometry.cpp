#include "ws3d/geometry.hpp"

#include <algorithm>
#include <cmath>

#include "ws3d/error.hpp"

namespace ws3d {

double normalize_angle(double a) {
    const double two_pi = 2.0 * kPi;
    double r = a - two_pi * std::floor((a + kPi) / two_pi);
    // floor can land exactly on the open end for inputs just below -pi
    if (r >= kPi) r -= two_pi;
    if (r < -kPi) r += two_pi;
    return r;
}

void validate(const Cuboid& box) {
    const double f[] = {box.cx, box.cy, box.cz, box.h, box.w, box.l, box.theta};
    for (double v : f) {
        if (!std::isfinite(v)) throw Error("cuboid has a non-finite field");
    }
    if (box.h <= 0.0 || box.w <= 0.0 || box.l <= 0.0) {
        throw Error("cuboid dimensions must be positive");
    }
}

std::array<Vec2, 4> bev_corners(const Cuboid& box) {
    const double c = std::cos(box.theta);
    const double s = std::sin(box.theta);
    const double hl = 0.5 * box.l;
    const double hw = 0.5 * box.w;
    const std::array<Vec2, 4> local{{{hl, hw}, {-hl, hw}, {-hl, -hw}, {hl, -hw}}};
    std::array<Vec2, 4> out{};
    for (std::size_t i = 0; i < 4; ++i) {
        out[i].x = box.cx + c * local[i].x + s * local[i].z;
        out[i].z = box.cz - s * local[i].x + c * local[i].z;
    }
    return out;
}

std::array<Point, 8> box_corners(const Cuboid& box) {
    const auto fp = bev_corners(box);
    std::array<Point, 8> out{};
    for (std::size_t i = 0; i < 4; ++i) {
        out[i] = Point{fp[i].x, box.cy + 0.5 * box.h, fp[i].z, 0.0};
        out[i + 4] = Point{fp[i].x, box.cy - 0.5 * box.h, fp[i].z, 0.0};
    }
    return out;
}

bool bev_contains(const Cuboid& box, double x, double z, double margin) {
    const double c = std::cos(box.theta);
    const double s = std::sin(box.theta);
    const double dx = x - box.cx;
    const double dz = z - box.cz;
    // inverse rotation: local = R(-theta) * d
    const double lx = c * dx - s * dz;
    const double lz = s * dx + c * dz;
    return std::abs(lx) <= 0.5 * box.l + margin && std::abs(lz) <= 0.5 * box.w + margin;
}

bool contains(const Cuboid& box, const Point& p, double margin) {
    if (std::abs(p.y - box.cy) > 0.5 * box.h + margin) return false;
    return bev_contains(box, p.x, p.z, margin);
}

double polygon_area(std::span<const Vec2> polygon) {
    const std::size_t n = polygon.size();
    if (n < 3) return 0.0;
    double twice = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const Vec2& a = polygon[i];
        const Vec2& b = polygon[(i + 1) % n];
        twice += a.x * b.z - b.x * a.z;
    }
    return 0.5 * twice;
}

namespace {

double cross(const Vec2& a, const Vec2& b, const Vec2& p) {
    return (b.x - a.x) * (p.z - a.z) - (b.z - a.z) * (p.x - a.x);
}

Vec2 segment_line_intersection(const Vec2& p, const Vec2& q, const Vec2& a, const Vec2& b) {
    const double cp = cross(a, b, p);
    const double cq = cross(a, b, q);
    const double t = cp / (cp - cq);
    return Vec2{p.x + t * (q.x - p.x), p.z + t * (q.z - p.z)};
}

}  // namespace

std::vector<Vec2> clip_convex(std::span<const Vec2> subject, std::span<const Vec2> clip) {
    std::vector<Vec2> output(subject.begin(), subject.end());
    const std::size_t m = clip.size();
    for (std::size_t e = 0; e < m && !output.empty(); ++e) {
        const Vec2& a = clip[e];
        const Vec2& b = clip[(e + 1) % m];
        std::vector<Vec2> input;
        input.swap(output);
        const std::size_t n = input.size();
        for (std::size_t i = 0; i < n; ++i) {
            const Vec2& cur = input[i];
            const Vec2& prev = input[(i + n - 1) % n];
            const bool cur_in = cross(a, b, cur) >= 0.0;
            const bool prev_in = cross(a, b, prev) >= 0.0;
            if (cur_in) {
                if (!prev_in) output.push_back(segment_line_intersection(prev, cur, a, b));
                output.push_back(cur);
            } else if (prev_in) {
                output.push_back(segment_line_intersection(prev, cur, a, b));
            }
        }
    }
    return output;
}

double bev_intersection_area(const Cuboid& a, const Cuboid& b) {
    // cheap reject on circumscribed circles
    const double ra = 0.5 * std::hypot(a.l, a.w);
    const double rb = 0.5 * std::hypot(b.l, b.w);
    const double dx = a.cx - b.cx;
    const double dz = a.cz - b.cz;
    if (dx * dx + dz * dz > (ra + rb) * (ra + rb)) return 0.0;
    const auto pa = bev_corners(a);
    const auto pb = bev_corners(b);
    const auto poly = clip_convex(pa, pb);
    return std::max(0.0, polygon_area(poly));
}

double bev_iou(const Cuboid& a, const Cuboid& b) {
    const double inter = bev_intersection_area(a, b);
    if (inter <= 0.0) return 0.0;
    const double uni = a.l * a.w + b.l * b.w - inter;
    return std::clamp(inter / uni, 0.0, 1.0);
}

double iou_3d(const Cuboid& a, const Cuboid& b) {
    const double top = std::max(a.cy - 0.5 * a.h, b.cy - 0.5 * b.h);
    const double bottom = std::min(a.cy + 0.5 * a.h, b.cy + 0.5 * b.h);
    const double overlap_h = bottom - top;
    if (overlap_h <= 0.0) return 0.0;
    const double inter_area = bev_intersection_area(a, b);
    if (inter_area <= 0.0) return 0.0;
    const double inter = inter_area * overlap_h;
    const double uni = a.l * a.w * a.h + b.l * b.w * b.h - inter;
    return std::clamp(inter / uni, 0.0, 1.0);
}

std::vector<std::size_t> points_in_cylinder(const PointCloud& cloud, const CylinderProposal& prop) {
    std::vector<std::size_t> out;
    const double r2 = prop.radius * prop.radius;
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        const double dx = cloud[i].x - prop.cx;
        const double dz = cloud[i].z - prop.cz;
        if (dx * dx + dz * dz <= r2) out.push_back(i);
    }
    return out;
}

Point CanonicalFrame::to_local(const Point& p) const {
    const double dx = p.x - ox;
    const double dz = p.z - oz;
    const double c = std::cos(yaw);
    const double s = std::sin(yaw);
    // rotation by -yaw about the vertical axis
    return Point{c * dx - s * dz, p.y - oy, s * dx + c * dz, p.intensity};
}

Point CanonicalFrame::to_world(const Point& p) const {
    const double c = std::cos(yaw);
    const double s = std::sin(yaw);
    return Point{c * p.x + s * p.z + ox, p.y + oy, -s * p.x + c * p.z + oz, p.intensity};
}

Cuboid CanonicalFrame::to_local(const Cuboid& box) const {
    const Point c = to_local(Point{box.cx, box.cy, box.cz, 0.0});
    return Cuboid{c.x, c.y, c.z, box.h, box.w, box.l, normalize_angle(box.theta - yaw)};
}

Cuboid CanonicalFrame::to_world(const Cuboid& box) const {
    const Point c = to_world(Point{box.cx, box.cy, box.cz, 0.0});
    return Cuboid{c.x, c.y, c.z, box.h, box.w, box.l, normalize_angle(box.theta + yaw)};
}

CanonicalFrame frame_of(const Cuboid& box) {
    return CanonicalFrame{box.cx, box.cy, box.cz, box.theta};
}

CanonicalFrame frame_of(const CylinderProposal& prop) {
    return CanonicalFrame{prop.cx, 0.0, prop.cz, 0.0};
}

PointCloud transform(const PointCloud& cloud, const CanonicalFrame& frame, bool to_local) {
    PointCloud out;
    out.points.reserve(cloud.size());
    for (const Point& p : cloud.points) {
        out.points.push_back(to_local ? frame.to_local(p) : frame.to_world(p));
    }
    return out;
}

PointCloud canonicalize(const PointCloud& cloud, const Cuboid& frame) {
    return transform(cloud, frame_of(frame), true);
}

PointCloud canonicalize(const PointCloud& cloud, const CylinderProposal& frame) {
    return transform(cloud, frame_of(frame), true);
}

}  // namespace ws3d
