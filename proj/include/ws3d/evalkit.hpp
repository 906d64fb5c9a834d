#pragma once

// KITTI-style detection evaluation: greedy matching per scene, interpolated
// average precision, and difficulty regimes.

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ws3d/geometry.hpp"
#include "ws3d/kitti_io.hpp"

namespace ws3d::eval {

enum class IouKind { Bev, Box3D };
enum class Regime { Easy = 0, Moderate = 1, Hard = 2 };
enum class ApProtocol { Eleven, Forty };

struct EvalConfig {
    double iou_threshold = 0.7;
    IouKind kind = IouKind::Box3D;
    Regime regime = Regime::Moderate;
    ApProtocol protocol = ApProtocol::Eleven;
};

struct Detection {
    Cuboid box;
    double confidence = 0.0;
};

/// regimes[r] says whether the GT counts in regime r. A GT that belongs to
/// no evaluated regime is ignored: a detection on it is neither TP nor FP.
struct GtBox {
    Cuboid box;
    std::array<bool, 3> regimes{true, true, true};
    bool dont_care = false;  // detections overlapping it are ignored
};

enum class DetFlag { FalsePositive = 0, TruePositive = 1, Ignored = -1 };

struct MatchResult {
    std::vector<DetFlag> det;       // aligned with the input detections
    std::vector<bool> gt_matched;   // aligned with the input GTs
    int num_gt = 0;                 // GTs counted in the regime
};

double overlap(const Cuboid& a, const Cuboid& b, IouKind kind);

MatchResult match_detections(std::span<const Detection> dets, std::span<const GtBox> gts, const EvalConfig& cfg);

struct ScoredFlag {
    double confidence = 0.0;
    bool tp = false;
};

/// Interpolated AP over the protocol's recall anchors; nullopt without GT.
std::optional<double> average_precision(std::vector<ScoredFlag> flags, int num_gt, ApProtocol protocol);

/// Recall anchors of a protocol.
std::vector<double> recall_anchors(ApProtocol protocol);

/// Devkit thresholds on 2D box height, occlusion and truncation.
std::array<bool, 3> assign_difficulty(const kitti::LabelRecord& gt);
/// Synthetic regimes from the number of points inside the box.
std::array<bool, 3> assign_difficulty_points(std::size_t in_box_points);

struct SceneEval {
    std::vector<Detection> dets;
    std::vector<GtBox> gts;
};

/// AP for one config over many scenes.
std::optional<double> evaluate(std::span<const SceneEval> scenes, const EvalConfig& cfg);

struct ReportCell {
    Regime regime;
    IouKind kind;
    std::optional<double> ap;
};

struct Report {
    std::string cls;
    double iou_threshold = 0.7;
    ApProtocol protocol = ApProtocol::Eleven;
    std::vector<ReportCell> cells;  // Easy/Moderate/Hard x BEV/3D

    std::optional<double> get(Regime r, IouKind k) const;
};

Report evaluate_all(std::span<const SceneEval> scenes, const std::string& cls, double iou_threshold,
                    ApProtocol protocol);

/// Plain-text table: rows BEV and 3D, columns Easy / Moderate / Hard (AP in %).
std::string format_table(const Report& r);
/// One line per cell: "class=Car kind=bev regime=easy iou=0.70 protocol=11 ap=0.912345".
std::string format_records(const Report& r);

std::string to_string(Regime r);
std::string to_string(IouKind k);

}  // namespace ws3d::eval
