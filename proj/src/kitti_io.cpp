#include "ws3d/kitti_io.hpp"

#include <Eigen/Dense>
#include <fmt/format.h>

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

#include "ws3d/error.hpp"

namespace ws3d::kitti {

namespace {

std::vector<std::string_view> split_ws(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
        std::size_t j = i;
        while (j < line.size() && !std::isspace(static_cast<unsigned char>(line[j]))) ++j;
        if (j > i) out.push_back(line.substr(i, j - i));
        i = j;
    }
    return out;
}

template <typename Fn>
void for_each_line(std::string_view text, Fn&& fn) {
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        std::size_t end = text.find('\n', pos);
        if (end == std::string_view::npos) end = text.size();
        std::string_view line = text.substr(pos, end - pos);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        ++line_no;
        fn(line, line_no);
        if (end == text.size()) break;
        pos = end + 1;
    }
}

std::optional<double> to_double(std::string_view tok) {
    double v = 0.0;
    if (!tok.empty() && tok.front() == '+') tok.remove_prefix(1);
    auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc{} || ptr != tok.data() + tok.size()) return std::nullopt;
    return v;
}

double number(std::string_view tok, std::size_t line_no, std::string_view what) {
    auto v = to_double(tok);
    if (!v) {
        throw MalformedInput(fmt::format("line {}: {} field '{}' is not a number", line_no, what, tok),
                             line_no);
    }
    return *v;
}

bool blank(std::string_view line) {
    return std::all_of(line.begin(), line.end(),
                       [](char c) { return std::isspace(static_cast<unsigned char>(c)); });
}

Eigen::Matrix4d homogeneous(const Mat3x4& m) {
    Eigen::Matrix4d out = Eigen::Matrix4d::Identity();
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 4; ++c) out(r, c) = m[static_cast<std::size_t>(r * 4 + c)];
    return out;
}

Eigen::Matrix4d homogeneous(const Mat3& m) {
    Eigen::Matrix4d out = Eigen::Matrix4d::Identity();
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) out(r, c) = m[static_cast<std::size_t>(r * 3 + c)];
    return out;
}

Eigen::Matrix4d velo_to_rect(const CalibRecord& calib) {
    return homogeneous(calib.rect) * homogeneous(calib.velo_to_cam);
}

PointCloud apply(const PointCloud& cloud, const Eigen::Matrix4d& m) {
    PointCloud out;
    out.points.reserve(cloud.size());
    for (const Point& p : cloud.points) {
        const Eigen::Vector4d v = m * Eigen::Vector4d(p.x, p.y, p.z, 1.0);
        out.points.push_back(Point{v.x(), v.y(), v.z(), p.intensity});
    }
    return out;
}

}  // namespace

CalibRecord synthetic_calib() {
    CalibRecord c;
    c.velo_to_cam = {0, -1, 0, 0, 0, 0, -1, 0, 1, 0, 0, 0};
    c.rect = {1, 0, 0, 0, 1, 0, 0, 0, 1};
    c.p2 = {721.5377, 0, 609.5593, 0, 0, 721.5377, 172.854, 0, 0, 0, 1, 0};
    return c;
}

// -- velodyne ---------------------------------------------------------------

PointCloud parse_velodyne(std::span<const std::byte> bytes) {
    if (bytes.size() % 16 != 0) {
        const std::size_t offset = bytes.size() - bytes.size() % 16;
        throw MalformedInput(
            fmt::format("velodyne blob of {} bytes is not a multiple of 16; trailing record starts at byte {}",
                        bytes.size(), offset),
            0, offset);
    }
    PointCloud cloud;
    cloud.points.reserve(bytes.size() / 16);
    auto read_f32 = [&](std::size_t off) {
        std::uint32_t u = 0;
        for (std::size_t k = 0; k < 4; ++k) {
            u |= static_cast<std::uint32_t>(std::to_integer<std::uint8_t>(bytes[off + k])) << (8 * k);
        }
        return static_cast<double>(std::bit_cast<float>(u));
    };
    for (std::size_t off = 0; off < bytes.size(); off += 16) {
        cloud.points.push_back(Point{read_f32(off), read_f32(off + 4), read_f32(off + 8), read_f32(off + 12)});
    }
    return cloud;
}

std::vector<std::byte> encode_velodyne(const PointCloud& cloud) {
    std::vector<std::byte> out;
    out.reserve(cloud.size() * 16);
    auto put = [&](double v) {
        const auto u = std::bit_cast<std::uint32_t>(static_cast<float>(v));
        for (std::size_t k = 0; k < 4; ++k) out.push_back(static_cast<std::byte>((u >> (8 * k)) & 0xffu));
    };
    for (const Point& p : cloud.points) {
        put(p.x);
        put(p.y);
        put(p.z);
        put(p.intensity);
    }
    return out;
}

PointCloud read_velodyne(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open velodyne file " + path.string());
    std::vector<char> buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return parse_velodyne(std::as_bytes(std::span<const char>(buf)));
}

void write_velodyne(const std::filesystem::path& path, const PointCloud& cloud) {
    const auto bytes = encode_velodyne(cloud);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write velodyne file " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

// -- calibration ------------------------------------------------------------

CalibRecord parse_calib(std::string_view text) {
    CalibRecord calib;
    bool have_p2 = false;
    bool have_rect = false;
    bool have_tr = false;
    for_each_line(text, [&](std::string_view line, std::size_t line_no) {
        if (blank(line)) return;
        const auto colon = line.find(':');
        if (colon == std::string_view::npos) {
            throw MalformedInput(fmt::format("line {}: calibration entry without ':'", line_no), line_no);
        }
        const std::string_view key = line.substr(0, colon);
        const auto toks = split_ws(line.substr(colon + 1));
        auto fill = [&](std::span<double> dst) {
            if (toks.size() != dst.size()) {
                throw MalformedInput(fmt::format("line {}: {} expects {} values, got {}", line_no, key,
                                                 dst.size(), toks.size()),
                                     line_no);
            }
            for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = number(toks[i], line_no, key);
        };
        if (key == "P2") {
            fill(calib.p2);
            have_p2 = true;
        } else if (key == "R0_rect" || key == "R_rect") {
            fill(calib.rect);
            have_rect = true;
        } else if (key == "Tr_velo_to_cam" || key == "Tr_velo_cam") {
            fill(calib.velo_to_cam);
            have_tr = true;
        }
    });
    if (!have_p2 || !have_rect || !have_tr) {
        throw MalformedInput("calibration is missing one of P2, R0_rect, Tr_velo_to_cam", 0);
    }
    auto check_rotation = [](const Eigen::Matrix3d& r, const char* name) {
        if (((r * r.transpose()) - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() > 1e-3) {
            throw MalformedInput(fmt::format("{} rotation block is not orthonormal", name), 0);
        }
    };
    Eigen::Matrix3d rect;
    Eigen::Matrix3d tr;
    for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 3; ++c) {
            rect(r, c) = calib.rect[static_cast<std::size_t>(r * 3 + c)];
            tr(r, c) = calib.velo_to_cam[static_cast<std::size_t>(r * 4 + c)];
        }
    }
    check_rotation(rect, "R0_rect");
    check_rotation(tr, "Tr_velo_to_cam");
    return calib;
}

std::string format_calib(const CalibRecord& calib) {
    auto row = [](std::span<const double> v) {
        std::string s;
        for (std::size_t i = 0; i < v.size(); ++i) s += fmt::format("{}{:.12e}", i ? " " : "", v[i]);
        return s;
    };
    const Mat3x4 zero{};
    std::string out;
    out += "P0: " + row(calib.p2) + "\n";
    out += "P1: " + row(calib.p2) + "\n";
    out += "P2: " + row(calib.p2) + "\n";
    out += "P3: " + row(calib.p2) + "\n";
    out += "R0_rect: " + row(calib.rect) + "\n";
    out += "Tr_velo_to_cam: " + row(calib.velo_to_cam) + "\n";
    out += "Tr_imu_to_velo: " + row(zero) + "\n";
    return out;
}

CalibRecord read_calib(const std::filesystem::path& path) { return parse_calib(read_text_file(path)); }

PointCloud transform_to_internal(const PointCloud& velodyne, const CalibRecord& calib) {
    return apply(velodyne, velo_to_rect(calib));
}

PointCloud transform_to_velodyne(const PointCloud& camera, const CalibRecord& calib) {
    return apply(camera, velo_to_rect(calib).inverse());
}

std::optional<std::array<double, 2>> project(const CalibRecord& calib, const Point& p) {
    const auto& m = calib.p2;
    const double u = m[0] * p.x + m[1] * p.y + m[2] * p.z + m[3];
    const double v = m[4] * p.x + m[5] * p.y + m[6] * p.z + m[7];
    const double w = m[8] * p.x + m[9] * p.y + m[10] * p.z + m[11];
    if (w < 0.1) return std::nullopt;
    return std::array<double, 2>{u / w, v / w};
}

// -- labels -----------------------------------------------------------------

std::vector<LabelRecord> parse_labels(std::string_view text) {
    std::vector<LabelRecord> out;
    for_each_line(text, [&](std::string_view line, std::size_t line_no) {
        if (blank(line)) return;
        const auto t = split_ws(line);
        if (t.size() != 15 && t.size() != 16) {
            throw MalformedInput(
                fmt::format("line {}: expected 15 or 16 label fields, got {}", line_no, t.size()), line_no);
        }
        LabelRecord r;
        r.cls = std::string(t[0]);
        r.truncation = number(t[1], line_no, "truncation");
        r.occlusion = static_cast<int>(number(t[2], line_no, "occlusion"));
        r.alpha = number(t[3], line_no, "alpha");
        for (std::size_t k = 0; k < 4; ++k) r.bbox[k] = number(t[4 + k], line_no, "bbox");
        r.h = number(t[8], line_no, "height");
        r.w = number(t[9], line_no, "width");
        r.l = number(t[10], line_no, "length");
        r.x = number(t[11], line_no, "x");
        r.y = number(t[12], line_no, "y");
        r.z = number(t[13], line_no, "z");
        r.rotation_y = number(t[14], line_no, "rotation_y");
        if (t.size() == 16) r.score = number(t[15], line_no, "score");
        out.push_back(std::move(r));
    });
    return out;
}

std::vector<LabelRecord> read_labels(const std::filesystem::path& path) {
    return parse_labels(read_text_file(path));
}

std::string format_label(const LabelRecord& r) {
    std::string s = fmt::format("{} {:.2f} {} {:.2f} {:.2f} {:.2f} {:.2f} {:.2f} {:.4f} {:.4f} {:.4f} {:.4f} {:.4f} {:.4f} {:.4f}",
                                r.cls, r.truncation, r.occlusion, r.alpha, r.bbox[0], r.bbox[1], r.bbox[2],
                                r.bbox[3], r.h, r.w, r.l, r.x, r.y, r.z, r.rotation_y);
    if (r.score) s += fmt::format(" {:.4g}", *r.score);
    return s;
}

std::string format_labels(std::span<const LabelRecord> recs) {
    std::string out;
    for (const auto& r : recs) {
        out += format_label(r);
        out += '\n';
    }
    return out;
}

Cuboid to_cuboid(const LabelRecord& rec) {
    return Cuboid{rec.x, rec.y - 0.5 * rec.h, rec.z, rec.h, rec.w, rec.l, rec.rotation_y};
}

LabelRecord from_cuboid(const Cuboid& box, const std::string& cls, const CalibRecord& calib,
                        std::optional<double> score) {
    LabelRecord r;
    r.cls = cls;
    r.truncation = score ? -1.0 : 0.0;
    r.occlusion = score ? -1 : 0;
    r.h = box.h;
    r.w = box.w;
    r.l = box.l;
    r.x = box.cx;
    r.y = box.cy + 0.5 * box.h;
    r.z = box.cz;
    r.rotation_y = normalize_angle(box.theta);
    r.alpha = normalize_angle(r.rotation_y - std::atan2(box.cx, box.cz));
    r.score = score;

    double u0 = std::numeric_limits<double>::infinity();
    double v0 = u0;
    double u1 = -u0;
    double v1 = -u0;
    bool behind = false;
    for (const Point& c : box_corners(box)) {
        const auto px = project(calib, c);
        if (!px) {
            behind = true;
            break;
        }
        u0 = std::min(u0, (*px)[0]);
        u1 = std::max(u1, (*px)[0]);
        v0 = std::min(v0, (*px)[1]);
        v1 = std::max(v1, (*px)[1]);
    }
    if (behind) {
        r.bbox = {-1.0, -1.0, -1.0, -1.0};
    } else {
        const double wmax = static_cast<double>(kImageWidth - 1);
        const double hmax = static_cast<double>(kImageHeight - 1);
        r.bbox = {std::clamp(u0, 0.0, wmax), std::clamp(v0, 0.0, hmax), std::clamp(u1, 0.0, wmax),
                  std::clamp(v1, 0.0, hmax)};
    }
    return r;
}

std::string write_predictions(std::span<const Prediction> preds, const CalibRecord& calib,
                              const std::string& cls) {
    std::string out;
    for (const auto& p : preds) {
        out += format_label(from_cuboid(p.box, cls, calib, p.confidence));
        out += '\n';
    }
    return out;
}

// -- clicks -----------------------------------------------------------------

std::vector<ClickAnnotation> read_clicks(std::string_view text) {
    std::vector<ClickAnnotation> out;
    for_each_line(text, [&](std::string_view line, std::size_t line_no) {
        if (blank(line)) return;
        const auto t = split_ws(line);
        if (t.front().front() == '#') return;
        if (t.size() != 3) {
            throw MalformedInput(fmt::format("line {}: expected 'class x z', got {} fields", line_no, t.size()),
                                 line_no);
        }
        out.push_back(ClickAnnotation{std::string(t[0]), number(t[1], line_no, "x"), number(t[2], line_no, "z")});
    });
    return out;
}

std::string write_clicks(std::span<const ClickAnnotation> clicks) {
    std::string out;
    for (const auto& c : clicks) out += fmt::format("{} {:.3f} {:.3f}\n", c.cls, c.x, c.z);
    return out;
}

std::vector<ClickAnnotation> read_clicks_file(const std::filesystem::path& path) {
    return read_clicks(read_text_file(path));
}

// -- files ------------------------------------------------------------------

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text_file_atomic(const std::filesystem::path& path, std::string_view text) {
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot write " + tmp.string());
        out.write(text.data(), static_cast<std::streamsize>(text.size()));
        out.flush();
        if (!out) throw Error("write failed for " + tmp.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::filesystem::remove(tmp, ec);
        throw Error("cannot rename into " + path.string());
    }
}

std::string canonical_class(std::string_view name) {
    std::string s(name);
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
    if (s == "car") return "Car";
    if (s == "pedestrian") return "Pedestrian";
    if (s == "cyclist") return "Cyclist";
    if (s == "dontcare") return "DontCare";
    if (!s.empty()) s[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(s[0])));
    return s;
}

}  // namespace ws3d::kitti
