#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "ws3d/detector/config.hpp"
#include "ws3d/detector/networks.hpp"
#include "ws3d/geometry.hpp"
#include "ws3d/kitti_io.hpp"

namespace ws3d::detector {

struct TrainingScene {
    std::string id;
    PointCloud cloud;                             // internal frame
    std::vector<kitti::ClickAnnotation> clicks;   // weak labels for every object
    std::vector<Cuboid> precise;                  // the fully annotated subset
};

struct LossRecord {
    std::string phase;  // stage1 | initial | refine
    int iteration = 0;
    double total = 0.0;
    std::vector<std::pair<std::string, double>> components;
};

/// "iter phase total=value name=value ..." on one line.
std::string format_loss_record(const LossRecord& r);

using LossSink = std::function<void(const LossRecord&)>;

struct TrainOptions {
    LossSink sink;            // receives one averaged record per log interval
    bool augment = true;
};

/// Deterministic resample of a scene to exactly n points (repeats when short).
PointCloud resample_scene(const PointCloud& cloud, int n, std::mt19937_64& rng);

struct Stage1Result {
    std::unique_ptr<Stage1Net> net;
    std::vector<LossRecord> per_step;  // one record per iteration
};

Stage1Result train_stage1(std::span<const TrainingScene> scenes, const DetectorConfig& cfg,
                          const TrainOptions& opts = {});

/// Runs stage-1 on a scene: the resampled points, their foreground scores and
/// center predictions.
struct Stage1Scene {
    PointCloud points;
    std::vector<double> fg;
    nn::Matrix center;
};
Stage1Scene run_stage1(Stage1Net& net, const PointCloud& cloud, std::uint64_t seed = 0);

/// A stage-2 training sample: a proposal center and the matched GT (absent
/// for background proposals).
struct ProposalSample {
    std::size_t scene = 0;
    CylinderProposal proposal;
    std::optional<Cuboid> gt;
};

/// Proposals closer than the profile's GT-match distance to a precise GT
/// become samples for that GT (at most `per_gt`, chosen at random).
std::vector<ProposalSample> select_training_proposals(std::span<const CylinderProposal> proposals,
                                                      std::span<const Cuboid> precise, std::size_t scene,
                                                      double match_distance, int per_gt, std::mt19937_64& rng);

struct Stage2Result {
    std::unique_ptr<Stage2Net> initial;
    std::unique_ptr<Stage2Net> refine;
    std::vector<LossRecord> per_step;
};

Stage2Result train_stage2(std::span<const TrainingScene> scenes, Stage1Net& stage1, const DetectorConfig& cfg,
                          const TrainOptions& opts = {});

/// Stage-2 training on explicit samples over already scored scenes (used by
/// train_stage2 and by overfit runs).
Stage2Result train_stage2_samples(std::span<const Stage1Scene> scored, std::span<const ProposalSample> samples,
                                  const DetectorConfig& cfg, const TrainOptions& opts = {});

}  // namespace ws3d::detector
