#pragma once

// Geometry in the internal frame: KITTI rectified camera convention with
// x right, y down (vertical), z forward. The bird's-eye view (BEV) is the
// (x,z)-plane. Box yaw follows KITTI rotation_y: a rotation about +y by
// theta maps local (x,z) to world (cos t * x + sin t * z, -sin t * x + cos t * z),
// and the box length l lies along the local x-axis.

#include <array>
#include <cstddef>
#include <numbers>
#include <span>
#include <vector>

namespace ws3d {

struct Point {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;
    double intensity = 0.0;
};

struct PointCloud {
    std::vector<Point> points;

    std::size_t size() const noexcept { return points.size(); }
    bool empty() const noexcept { return points.empty(); }
    const Point& operator[](std::size_t i) const { return points[i]; }
    Point& operator[](std::size_t i) { return points[i]; }
};

/// Oriented 3D box. (cx, cy, cz) is the center of volume; the vertical
/// extent is [cy - h/2, cy + h/2].
struct Cuboid {
    double cx = 0.0;
    double cy = 0.0;
    double cz = 0.0;
    double h = 1.0;
    double w = 1.0;
    double l = 1.0;
    double theta = 0.0;
};

/// Vertical cylinder on the (x,z)-plane, unbounded along y.
struct CylinderProposal {
    double cx = 0.0;
    double cz = 0.0;
    double radius = 4.0;
    double confidence = 0.0;
};

struct Vec2 {
    double x = 0.0;
    double z = 0.0;
};

/// Wraps an angle into [-pi, pi).
double normalize_angle(double a);

/// Throws ws3d::Error when a box violates h, w, l > 0 or has non-finite fields.
void validate(const Cuboid& box);

/// BEV footprint corners, counter-clockwise in the (x,z)-plane.
std::array<Vec2, 4> bev_corners(const Cuboid& box);

/// The eight box corners, bottom face (y = cy + h/2) first.
std::array<Point, 8> box_corners(const Cuboid& box);

bool contains(const Cuboid& box, const Point& p, double margin = 0.0);
bool bev_contains(const Cuboid& box, double x, double z, double margin = 0.0);

/// Signed area (positive when counter-clockwise).
double polygon_area(std::span<const Vec2> polygon);

/// Clips `subject` against the convex polygon `clip` (both counter-clockwise).
std::vector<Vec2> clip_convex(std::span<const Vec2> subject, std::span<const Vec2> clip);

double bev_intersection_area(const Cuboid& a, const Cuboid& b);
double bev_iou(const Cuboid& a, const Cuboid& b);
double iou_3d(const Cuboid& a, const Cuboid& b);

std::vector<std::size_t> points_in_cylinder(const PointCloud& cloud, const CylinderProposal& prop);

/// Rigid transform made of a translation followed by a yaw about the
/// vertical axis. to_local maps world coordinates into the frame; to_world
/// is its exact inverse.
struct CanonicalFrame {
    double ox = 0.0;
    double oy = 0.0;
    double oz = 0.0;
    double yaw = 0.0;

    Point to_local(const Point& p) const;
    Point to_world(const Point& p) const;
    Cuboid to_local(const Cuboid& box) const;
    Cuboid to_world(const Cuboid& box) const;
};

/// Translation to (cx, cy, cz) plus rotation by -theta.
CanonicalFrame frame_of(const Cuboid& box);
/// Translation over the (x,z)-plane only.
CanonicalFrame frame_of(const CylinderProposal& prop);

PointCloud canonicalize(const PointCloud& cloud, const Cuboid& frame);
PointCloud canonicalize(const PointCloud& cloud, const CylinderProposal& frame);
PointCloud transform(const PointCloud& cloud, const CanonicalFrame& frame, bool to_local);

inline constexpr double kPi = std::numbers::pi;

}  // namespace ws3d
