#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <vector>

#include "ws3d/detector/config.hpp"
#include "ws3d/detector/networks.hpp"
#include "ws3d/geometry.hpp"

namespace ws3d::detector {

struct Detection {
    Cuboid box;
    double confidence = 0.0;
};

struct ActiveResult {
    Cuboid box;
    double confidence = 0.0;
    std::vector<Vec2> candidates;                    // all 25 grid centers, row-major in (x, z)
    std::vector<std::optional<double>> candidate_conf;  // empty cylinders have none
};

/// The 5 x 5 grid of centers spaced `step` meters around (x, z).
std::vector<Vec2> active_grid(double x, double z, int half = 2, double step = 0.1);

/// Trained detector. Checkpoint layout: the stage-1 file holds the stage-1
/// network; the stage-2 file holds both cuboid networks. Each file's
/// metadata stores the detector configuration as JSON.
class Detector {
public:
    explicit Detector(DetectorConfig cfg);

    void set_stage1(std::unique_ptr<Stage1Net> net) { stage1_ = std::move(net); }
    void set_stage2(std::unique_ptr<Stage2Net> initial, std::unique_ptr<Stage2Net> refine);

    static void save_stage1(const std::filesystem::path& path, Stage1Net& net, const DetectorConfig& cfg);
    static void save_stage2(const std::filesystem::path& path, Stage2Net& initial, Stage2Net& refine,
                            const DetectorConfig& cfg);
    static std::unique_ptr<Stage1Net> load_stage1(const std::filesystem::path& path, DetectorConfig* cfg = nullptr);
    static std::pair<std::unique_ptr<Stage2Net>, std::unique_ptr<Stage2Net>> load_stage2(
        const std::filesystem::path& path, DetectorConfig* cfg = nullptr);

    /// Loads both checkpoints; the stage-2 configuration wins.
    static Detector load(const std::filesystem::path& stage1, const std::filesystem::path& stage2);
    /// Stage-2 only (enough for active annotation).
    static Detector load_stage2_only(const std::filesystem::path& stage2);

    /// Automatic mode: stage-1 proposals, CA-NMS, two-step cuboid
    /// prediction, oriented NMS.
    std::vector<Detection> infer_scene(const PointCloud& scene) const;

    /// Cuboids for explicit cylinder proposals over a scored scene; entries
    /// with empty cylinders are nullopt.
    std::vector<std::optional<Detection>> predict_cylinders(const PointCloud& points, std::span<const double> fg,
                                                            std::span<const CylinderProposal> props) const;

    /// Active mode around one click (x, z). Throws EmptyProposal when all 25
    /// cylinders are empty.
    ActiveResult active_annotate(const PointCloud& scene, double x, double z) const;

    const DetectorConfig& config() const { return cfg_; }
    bool has_stage1() const { return stage1_ != nullptr; }
    bool has_stage2() const { return initial_ != nullptr && refine_ != nullptr; }

private:
    DetectorConfig cfg_;
    std::shared_ptr<Stage1Net> stage1_;
    std::shared_ptr<Stage2Net> initial_;
    std::shared_ptr<Stage2Net> refine_;
};

}  // namespace ws3d::detector
