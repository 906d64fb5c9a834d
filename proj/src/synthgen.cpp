#include "ws3d/synthgen.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ws3d/error.hpp"

namespace ws3d::synth {

namespace {

struct V3 {
    double x, y, z;
};
V3 operator+(V3 a, V3 b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
V3 operator*(double s, V3 a) { return {s * a.x, s * a.y, s * a.z}; }
double dot(V3 a, V3 b) { return a.x * b.x + a.y * b.y + a.z * b.z; }

V3 rot(V3 v, double yaw) {
    const double c = std::cos(yaw);
    const double s = std::sin(yaw);
    return {c * v.x + s * v.z, v.y, -s * v.x + c * v.z};
}

// Oriented block; also the occluder primitive.
struct Block {
    Cuboid box;
    int owner = -1;
};

struct Sample {
    Point p;
    int owner;
};

double range_density(const SynthConfig& cfg, V3 c) {
    const double r = std::max(std::hypot(c.x, c.z), 2.5);
    return cfg.surface_density * std::min(4.0, (10.0 / r) * (10.0 / r));
}

int poisson(std::mt19937_64& rng, double mean) {
    if (mean <= 0.0) return 0;
    return std::poisson_distribution<int>(mean)(rng);
}

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

// Samples the sensor-facing faces of a block (bottom excluded). `skip`
// optionally rejects points (e.g. the part of a roof covered by a cabin).
template <class Skip>
void sample_block(const Block& b, const SynthConfig& cfg, double intensity, std::mt19937_64& rng,
                  std::vector<Sample>& out, Skip skip, bool force_one) {
    const Cuboid& c = b.box;
    const V3 center{c.cx, c.cy, c.cz};
    const V3 ex = rot({1, 0, 0}, c.theta);
    const V3 ez = rot({0, 0, 1}, c.theta);
    const V3 ey{0, 1, 0};
    struct Face {
        V3 n;
        double off;
        V3 u;
        double ul;
        V3 v;
        double vl;
    };
    const Face faces[] = {
        {ex, c.l / 2, ey, c.h, ez, c.w},       {-1.0 * ex, c.l / 2, ey, c.h, ez, c.w},
        {ez, c.w / 2, ey, c.h, ex, c.l},       {-1.0 * ez, c.w / 2, ey, c.h, ex, c.l},
        {-1.0 * ey, c.h / 2, ex, c.l, ez, c.w},  // top
    };
    std::uniform_real_distribution<double> u01(-0.5, 0.5);
    std::normal_distribution<double> noise(0.0, 0.01);
    std::normal_distribution<double> inoise(0.0, 0.05);
    int best_face = -1;
    double best_dot = 0.0;
    const std::size_t before = out.size();
    for (int f = 0; f < 5; ++f) {
        const Face& fc = faces[f];
        const V3 fcen = center + fc.off * fc.n;
        const double facing = -dot(fc.n, fcen);
        if (facing <= 0.0) continue;
        if (facing / std::sqrt(dot(fcen, fcen)) > best_dot) {
            best_dot = facing / std::sqrt(dot(fcen, fcen));
            best_face = f;
        }
        const int n = poisson(rng, fc.ul * fc.vl * range_density(cfg, fcen));
        for (int k = 0; k < n; ++k) {
            const V3 q = fcen + (u01(rng) * fc.ul) * fc.u + (u01(rng) * fc.vl) * fc.v + noise(rng) * fc.n;
            const Point p{q.x, q.y, q.z, clamp01(intensity + inoise(rng))};
            if (skip(p)) continue;
            out.push_back({p, b.owner});
        }
    }
    if (force_one && out.size() == before && best_face >= 0) {
        const Face& fc = faces[best_face];
        const V3 q = center + fc.off * fc.n;
        out.push_back({{q.x, q.y, q.z, clamp01(intensity)}, b.owner});
    }
}

// True when the open segment origin -> p crosses the block.
bool blocks_ray(const Block& b, const Point& p) {
    const CanonicalFrame f = frame_of(b.box);
    const Point o = f.to_local(Point{0, 0, 0, 0});
    const Point q = f.to_local(p);
    const double d[3] = {q.x - o.x, q.y - o.y, q.z - o.z};
    const double s[3] = {o.x, o.y, o.z};
    const double half[3] = {b.box.l / 2, b.box.h / 2, b.box.w / 2};
    double t0 = 0.0;
    double t1 = 0.995;  // stop short of the point itself
    for (int k = 0; k < 3; ++k) {
        if (std::abs(d[k]) < 1e-12) {
            if (s[k] < -half[k] || s[k] > half[k]) return false;
            continue;
        }
        double a = (-half[k] - s[k]) / d[k];
        double c = (half[k] - s[k]) / d[k];
        if (a > c) std::swap(a, c);
        t0 = std::max(t0, a);
        t1 = std::min(t1, c);
        if (t0 > t1) return false;
    }
    return true;
}

Cuboid inflate(const Cuboid& c, double m) {
    Cuboid o = c;
    o.w += 2 * m;
    o.l += 2 * m;
    return o;
}

}  // namespace

std::string scene_id(std::uint64_t index) { return fmt::format("{:06d}", index); }

std::mt19937_64 scene_rng(std::uint64_t seed, std::uint64_t index) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32), 0x5a17u};
    return std::mt19937_64(seq);
}

SynthScene generate_scene(const SynthConfig& cfg, std::uint64_t index) {
    if (cfg.surface_density <= 0.0 || cfg.x_max <= cfg.x_min || cfg.z_max <= cfg.z_min ||
        cfg.max_vehicles < cfg.min_vehicles || cfg.min_vehicles < 0) {
        throw Error("invalid synthetic scene configuration");
    }
    auto rng = scene_rng(cfg.seed, index);
    std::uniform_real_distribution<double> ux(cfg.x_min, cfg.x_max);
    std::uniform_real_distribution<double> uz(cfg.z_min, cfg.z_max);
    std::uniform_real_distribution<double> uyaw(cfg.yaw_min, cfg.yaw_max);
    std::normal_distribution<double> jit(0.0, cfg.size_jitter);
    const bool car = kitti::canonical_class(cfg.cls) == "Car";
    const double mh = car ? 1.53 : 1.76;
    const double mw = car ? 1.63 : 0.66;
    const double ml = car ? 3.88 : 0.84;

    SynthScene sc;
    sc.id = scene_id(index);
    const int nveh = std::uniform_int_distribution<int>(cfg.min_vehicles, cfg.max_vehicles)(rng);
    for (int attempt = 0; attempt < 200 * std::max(nveh, 1) && static_cast<int>(sc.boxes.size()) < nveh; ++attempt) {
        Cuboid b;
        b.h = mh * (1.0 + jit(rng));
        b.w = mw * (1.0 + jit(rng));
        b.l = ml * (1.0 + jit(rng));
        b.cx = ux(rng);
        b.cz = uz(rng);
        b.cy = cfg.ground_y - b.h / 2;
        b.theta = normalize_angle(uyaw(rng));
        const bool clear = std::all_of(sc.boxes.begin(), sc.boxes.end(), [&](const Cuboid& o) {
            return bev_intersection_area(inflate(b, 0.4), inflate(o, 0.4)) == 0.0;
        });
        if (clear) sc.boxes.push_back(b);
    }

    std::vector<Block> blocks;  // occluders
    std::vector<Sample> samples;
    const int nb = static_cast<int>(sc.boxes.size());
    std::uniform_real_distribution<double> uint_car(0.3, 0.7);
    for (int i = 0; i < nb; ++i) {
        const Cuboid& g = sc.boxes[static_cast<std::size_t>(i)];
        const double inten = uint_car(rng);
        if (car) {
            const double hb = 0.55 * g.h;
            const double hc = g.h - hb;
            const CanonicalFrame f = frame_of(g);
            const Point body_c = f.to_world(Point{0.0, g.h / 2 - hb / 2, 0.0, 0.0});
            const Point cab_c = f.to_world(Point{-0.1 * g.l, -g.h / 2 + hc / 2, 0.0, 0.0});
            const Block body{{body_c.x, body_c.y, body_c.z, hb, g.w, g.l, g.theta}, i};
            const Block cabin{{cab_c.x, cab_c.y, cab_c.z, hc, 0.9 * g.w, 0.55 * g.l, g.theta}, i};
            sample_block(body, cfg, inten, rng, samples,
                         [&](const Point& p) {
                             return p.y < body.box.cy - hb / 2 + 0.05 && bev_contains(cabin.box, p.x, p.z);
                         },
                         true);
            sample_block(cabin, cfg, inten, rng, samples, [](const Point&) { return false; }, false);
            blocks.push_back(body);
            blocks.push_back(cabin);
        } else {
            const Block person{g, i};
            sample_block(person, cfg, inten, rng, samples, [](const Point&) { return false; }, true);
            blocks.push_back(person);
        }
    }

    // clutter: poles, walls and bushes away from the objects
    const int nclutter = std::uniform_int_distribution<int>(cfg.clutter_min, std::max(cfg.clutter_min, cfg.clutter_max))(rng);
    std::uniform_int_distribution<int> kind_d(0, 2);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    int owner = nb;
    for (int k = 0, tries = 0; k < nclutter && tries < 500; ++tries) {
        Block b;
        b.owner = owner;
        const int kind = kind_d(rng);
        b.box.cx = ux(rng);
        b.box.cz = uz(rng);
        b.box.theta = normalize_angle(uyaw(rng));
        if (kind == 0) {  // pole
            b.box.h = 3.0 + u01(rng);
            b.box.w = b.box.l = 0.25;
        } else if (kind == 1) {  // wall
            b.box.h = 1.2 + 1.2 * u01(rng);
            b.box.w = 0.3;
            b.box.l = 5.0 + 7.0 * u01(rng);
        } else {  // bush
            b.box.h = 0.6 + 0.8 * u01(rng);
            b.box.w = b.box.l = 0.8 + 1.2 * u01(rng);
        }
        b.box.cy = cfg.ground_y - b.box.h / 2;
        const bool clear = std::all_of(sc.boxes.begin(), sc.boxes.end(), [&](const Cuboid& o) {
            return bev_intersection_area(inflate(b.box, 1.0), o) == 0.0;
        });
        if (!clear) continue;
        const double inten = 0.15 + 0.4 * u01(rng);
        if (kind == 2) {
            // rounded top: thin out points toward the corners
            std::vector<Sample> raw;
            sample_block(b, cfg, inten, rng, raw, [](const Point&) { return false; }, false);
            const CanonicalFrame f = frame_of(b.box);
            for (auto& s : raw) {
                const Point q = f.to_local(s.p);
                const double rr = std::hypot(q.x / (b.box.l / 2), q.z / (b.box.w / 2), q.y / (b.box.h / 2));
                if (rr <= 1.25) samples.push_back(s);
            }
        } else {
            sample_block(b, cfg, inten, rng, samples, [](const Point&) { return false; }, false);
        }
        blocks.push_back(b);
        ++owner;
        ++k;
    }

    // ground with range-dependent density
    std::uniform_real_distribution<double> gx(cfg.x_min - 2.0, cfg.x_max + 2.0);
    std::uniform_real_distribution<double> gz(std::max(2.0, cfg.z_min - 4.0), cfg.z_max + 2.0);
    std::normal_distribution<double> gy(0.0, 0.02);
    std::uniform_real_distribution<double> gi(0.05, 0.2);
    for (int n = 0, tries = 0; n < cfg.ground_points && tries < cfg.ground_points * 50; ++tries) {
        const double x = gx(rng);
        const double z = gz(rng);
        const double r = std::hypot(x, z);
        if (u01(rng) > std::min(1.0, (8.0 / r) * (8.0 / r))) continue;
        samples.push_back({{x, cfg.ground_y + gy(rng), z, gi(rng)}, -1});
        ++n;
    }

    std::vector<int> made(static_cast<std::size_t>(nb), 0);
    std::vector<int> kept(static_cast<std::size_t>(nb), 0);
    for (const auto& s : samples) {
        if (s.owner >= 0 && s.owner < nb) ++made[static_cast<std::size_t>(s.owner)];
        bool hidden = false;
        if (cfg.shadowing) {
            for (const auto& b : blocks) {
                if (b.owner == s.owner) continue;
                if (blocks_ray(b, s.p)) {
                    hidden = true;
                    break;
                }
            }
        }
        if (hidden) continue;
        if (s.owner >= 0 && s.owner < nb) ++kept[static_cast<std::size_t>(s.owner)];
        sc.cloud.points.push_back(s.p);
    }
    for (int i = 0; i < nb; ++i) {
        const double vis = made[static_cast<std::size_t>(i)] > 0
                               ? static_cast<double>(kept[static_cast<std::size_t>(i)]) / made[static_cast<std::size_t>(i)]
                               : 1.0;
        sc.occlusion.push_back(vis > 0.8 ? 0 : (vis > 0.5 ? 1 : 2));
    }
    return sc;
}

std::vector<kitti::ClickAnnotation> generate_clicks(std::span<const Cuboid> boxes, const SynthConfig& cfg,
                                                    std::mt19937_64& rng) {
    std::vector<kitti::ClickAnnotation> out;
    std::normal_distribution<double> nx(0.0, 1.0);
    const std::string cls = kitti::canonical_class(cfg.cls);
    for (const auto& b : boxes) {
        const double ex = nx(rng) * cfg.click_sigma_x;
        const double ez = nx(rng) * cfg.click_sigma_z;
        out.push_back({cls, b.cx + ex, b.cz + ez});
    }
    return out;
}

std::vector<SynthScene> generate_dataset(const SynthConfig& cfg) {
    std::vector<SynthScene> out;
    std::size_t total = 0;
    for (int i = 0; i < cfg.scenes; ++i) {
        out.push_back(generate_scene(cfg, static_cast<std::uint64_t>(i)));
        auto rng = scene_rng(cfg.seed ^ 0xc11cc11cULL, static_cast<std::uint64_t>(i));
        out.back().clicks = generate_clicks(out.back().boxes, cfg, rng);
        out.back().precise.assign(out.back().boxes.size(), false);
        total += out.back().boxes.size();
    }
    std::vector<std::pair<std::size_t, std::size_t>> all;
    for (std::size_t s = 0; s < out.size(); ++s)
        for (std::size_t b = 0; b < out[s].boxes.size(); ++b) all.emplace_back(s, b);
    std::mt19937_64 rng = scene_rng(cfg.seed, 0xfeedULL);
    std::shuffle(all.begin(), all.end(), rng);
    const auto take = static_cast<std::size_t>(std::llround(cfg.precise_fraction * static_cast<double>(total)));
    for (std::size_t k = 0; k < take && k < all.size(); ++k) out[all[k].first].precise[all[k].second] = true;
    return out;
}

std::size_t count_points_in_box(const PointCloud& cloud, const Cuboid& box) {
    std::size_t n = 0;
    for (const auto& p : cloud.points)
        if (contains(box, p)) ++n;
    return n;
}

void write_dataset(const std::filesystem::path& root, std::span<const SynthScene> scenes, const SynthConfig& cfg) {
    namespace fs = std::filesystem;
    for (const char* d : {"velodyne", "label_2", "calib", "clicks", "instances"}) fs::create_directories(root / d);
    const auto calib = kitti::synthetic_calib();
    const std::string cls = kitti::canonical_class(cfg.cls);
    std::string index;
    for (const auto& s : scenes) {
        kitti::write_velodyne(root / "velodyne" / (s.id + ".bin"), kitti::transform_to_velodyne(s.cloud, calib));
        std::vector<kitti::LabelRecord> labels;
        std::vector<kitti::LabelRecord> precise;
        for (std::size_t i = 0; i < s.boxes.size(); ++i) {
            auto rec = kitti::from_cuboid(s.boxes[i], cls, calib);
            rec.truncation = 0.0;
            rec.occlusion = i < s.occlusion.size() ? s.occlusion[i] : 0;
            labels.push_back(rec);
            if (i < s.precise.size() && s.precise[i]) precise.push_back(rec);
        }
        kitti::write_text_file_atomic(root / "label_2" / (s.id + ".txt"), kitti::format_labels(labels));
        kitti::write_text_file_atomic(root / "instances" / (s.id + ".txt"), kitti::format_labels(precise));
        kitti::write_text_file_atomic(root / "calib" / (s.id + ".txt"), kitti::format_calib(calib));
        kitti::write_text_file_atomic(root / "clicks" / (s.id + ".txt"), kitti::write_clicks(s.clicks));
        index += s.id + "\n";
    }
    kitti::write_text_file_atomic(root / "scenes.txt", index);
}

}  // namespace ws3d::synth
