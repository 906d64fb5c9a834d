#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "support/oracles.hpp"
#include "ws3d/evalkit.hpp"

using namespace ws3d;
using namespace ws3d::eval;

namespace {

Cuboid car(double x, double z, double theta = 0) { return {x, 0.9, z, 1.5, 1.6, 3.9, theta}; }

GtBox gt(const Cuboid& b) { return GtBox{b, {true, true, true}, false}; }

// Interpolated AP straight from the definition: for each anchor r, the best
// precision over all cut-offs whose recall reaches r.
double ap_oracle(std::vector<std::pair<double, bool>> scored, int num_gt, int anchors, bool include_zero) {
    std::sort(scored.begin(), scored.end(), [](auto& a, auto& b) { return a.first > b.first; });
    double sum = 0;
    const int first = include_zero ? 0 : 1;
    for (int k = first; k <= anchors; ++k) {
        const double r = static_cast<double>(k) / anchors;
        double best = 0;
        for (std::size_t cut = 1; cut <= scored.size(); ++cut) {
            int tp = 0;
            for (std::size_t i = 0; i < cut; ++i) tp += scored[i].second;
            if (tp * anchors >= k * num_gt) best = std::max(best, static_cast<double>(tp) / static_cast<double>(cut));
        }
        sum += best;
    }
    return sum / (anchors - first + 1);
}

SceneEval random_scene(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> pos(-20, 20);
    std::uniform_real_distribution<double> noise(-0.6, 0.6);
    std::uniform_real_distribution<double> c(0, 1);
    SceneEval s;
    const int n = std::uniform_int_distribution<int>(0, 5)(rng);
    for (int i = 0; i < n; ++i) {
        const Cuboid b = car(pos(rng), 20 + pos(rng), c(rng) * 3);
        s.gts.push_back(gt(b));
        if (c(rng) < 0.8) {
            Cuboid d = b;
            d.cx += noise(rng);
            d.cz += noise(rng);
            d.theta += 0.3 * noise(rng);
            s.dets.push_back({d, c(rng)});
        }
    }
    for (int i = 0; i < 2; ++i)
        if (c(rng) < 0.5) s.dets.push_back({car(pos(rng), 20 + pos(rng)), c(rng)});
    return s;
}

}  // namespace

TEST(AveragePrecision, WorkedExampleElevenPoint) {
    const std::vector<ScoredFlag> f{{0.9, true}, {0.8, false}, {0.7, true}};
    EXPECT_NEAR(*average_precision(f, 2, ApProtocol::Eleven), (6.0 + 10.0 / 3.0) / 11.0, 1e-12);
    EXPECT_NEAR(*average_precision(f, 2, ApProtocol::Eleven), 0.848485, 1e-6);
}

TEST(AveragePrecision, WorkedExampleFortyPoint) {
    const std::vector<ScoredFlag> f{{0.9, true}, {0.8, false}, {0.7, true}};
    EXPECT_NEAR(*average_precision(f, 2, ApProtocol::Forty), (20.0 + 40.0 / 3.0) / 40.0, 1e-12);
}

TEST(AveragePrecision, EdgeCases) {
    EXPECT_NEAR(*average_precision({{0.5, true}}, 1, ApProtocol::Eleven), 1.0, 1e-12);
    EXPECT_EQ(*average_precision({}, 3, ApProtocol::Eleven), 0.0);
    EXPECT_FALSE(average_precision({{0.5, false}}, 0, ApProtocol::Eleven).has_value());
    // only false positives
    EXPECT_EQ(*average_precision({{0.5, false}, {0.4, false}}, 2, ApProtocol::Forty), 0.0);
}

TEST(AveragePrecision, MatchesDefinitionOnRandomLists) {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> c(0, 1);
    for (int t = 0; t < 300; ++t) {
        const int n = std::uniform_int_distribution<int>(1, 30)(rng);
        std::vector<ScoredFlag> f;
        std::vector<std::pair<double, bool>> o;
        int tp = 0;
        for (int i = 0; i < n; ++i) {
            const bool hit = c(rng) < 0.6;
            tp += hit;
            f.push_back({c(rng), hit});
            o.push_back({f.back().confidence, hit});
        }
        const int num_gt = tp + std::uniform_int_distribution<int>(0, 5)(rng);
        if (num_gt == 0) continue;
        EXPECT_NEAR(*average_precision(f, num_gt, ApProtocol::Eleven), ap_oracle(o, num_gt, 10, true), 1e-12);
        EXPECT_NEAR(*average_precision(f, num_gt, ApProtocol::Forty), ap_oracle(o, num_gt, 40, false), 1e-12);
    }
}

TEST(AveragePrecision, InvariantUnderMonotoneScoreMaps) {
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> c(0, 1);
    std::vector<ScoredFlag> f, g;
    for (int i = 0; i < 40; ++i) {
        f.push_back({c(rng), c(rng) < 0.5});
        g.push_back({std::exp(5 * f.back().confidence) - 3, f.back().tp});
    }
    EXPECT_DOUBLE_EQ(*average_precision(f, 30, ApProtocol::Eleven), *average_precision(g, 30, ApProtocol::Eleven));
}

TEST(Matching, GreedyByConfidenceOneToOne) {
    const std::vector<GtBox> gts{gt(car(0, 20))};
    const std::vector<Detection> dets{{car(0.1, 20), 0.5}, {car(0, 20), 0.9}};
    const auto m = match_detections(dets, gts, {0.7, IouKind::Box3D, Regime::Moderate, ApProtocol::Eleven});
    EXPECT_EQ(m.det[1], DetFlag::TruePositive);
    EXPECT_EQ(m.det[0], DetFlag::FalsePositive);
    EXPECT_EQ(m.num_gt, 1);
    EXPECT_TRUE(m.gt_matched[0]);
}

TEST(Matching, ThresholdIsStrict) {
    // unit cubes offset by 0.5: IoU exactly 1/3
    const Cuboid a{0, 0, 10, 1, 1, 1, 0};
    Cuboid b = a;
    b.cx += 0.5;
    const std::vector<GtBox> gts{gt(a)};
    const std::vector<Detection> dets{{b, 0.9}};
    EXPECT_EQ(match_detections(dets, gts, {1.0 / 3.0, IouKind::Bev, Regime::Easy, ApProtocol::Eleven}).det[0],
              DetFlag::FalsePositive);
    EXPECT_EQ(match_detections(dets, gts, {0.33, IouKind::Bev, Regime::Easy, ApProtocol::Eleven}).det[0],
              DetFlag::TruePositive);
}

TEST(Matching, BevIgnoresHeightWhile3dDoesNot) {
    Cuboid lifted = car(0, 20);
    lifted.cy -= 1.0;
    const std::vector<GtBox> gts{gt(car(0, 20))};
    const std::vector<Detection> dets{{lifted, 0.9}};
    EXPECT_EQ(match_detections(dets, gts, {0.7, IouKind::Bev, Regime::Easy, ApProtocol::Eleven}).det[0],
              DetFlag::TruePositive);
    EXPECT_EQ(match_detections(dets, gts, {0.7, IouKind::Box3D, Regime::Easy, ApProtocol::Eleven}).det[0],
              DetFlag::FalsePositive);
}

TEST(Matching, OutOfRegimeAndDontCareDetectionsAreIgnored) {
    GtBox hard_only = gt(car(0, 20));
    hard_only.regimes = {false, false, true};
    GtBox dc = gt(Cuboid{10, 0.9, 30, 2, 6, 6, 0});
    dc.dont_care = true;
    const std::vector<GtBox> gts{hard_only, dc};
    const std::vector<Detection> dets{{car(0, 20), 0.9}, {car(10, 30), 0.8}, {car(-10, 10), 0.7}};
    const auto m = match_detections(dets, gts, {0.7, IouKind::Box3D, Regime::Easy, ApProtocol::Eleven});
    EXPECT_EQ(m.num_gt, 0);
    EXPECT_EQ(m.det[0], DetFlag::Ignored);
    EXPECT_EQ(m.det[1], DetFlag::Ignored);
    EXPECT_EQ(m.det[2], DetFlag::FalsePositive);
    const auto hard = match_detections(dets, gts, {0.7, IouKind::Box3D, Regime::Hard, ApProtocol::Eleven});
    EXPECT_EQ(hard.num_gt, 1);
    EXPECT_EQ(hard.det[0], DetFlag::TruePositive);
}

TEST(Difficulty, DevkitThresholds) {
    kitti::LabelRecord r;
    r.bbox = {0, 0, 50, 40};
    r.occlusion = 0;
    r.truncation = 0.15;
    EXPECT_EQ(assign_difficulty(r), (std::array<bool, 3>{true, true, true}));
    r.bbox[3] = 39.9;
    EXPECT_EQ(assign_difficulty(r), (std::array<bool, 3>{false, true, true}));
    r.occlusion = 2;
    EXPECT_EQ(assign_difficulty(r), (std::array<bool, 3>{false, false, true}));
    r.truncation = 0.51;
    EXPECT_EQ(assign_difficulty(r), (std::array<bool, 3>{false, false, false}));
    r = {};
    r.bbox = {0, 0, 10, 24.9};
    EXPECT_EQ(assign_difficulty(r), (std::array<bool, 3>{false, false, false}));
}

TEST(Difficulty, PointCountRegimes) {
    EXPECT_EQ(assign_difficulty_points(120), (std::array<bool, 3>{true, true, true}));
    EXPECT_EQ(assign_difficulty_points(119), (std::array<bool, 3>{false, true, true}));
    EXPECT_EQ(assign_difficulty_points(40), (std::array<bool, 3>{false, true, true}));
    EXPECT_EQ(assign_difficulty_points(10), (std::array<bool, 3>{false, false, true}));
    EXPECT_EQ(assign_difficulty_points(9), (std::array<bool, 3>{false, false, false}));
}

TEST(Evaluate, PerfectDetectionsScoreOne) {
    std::mt19937_64 rng(3);
    std::vector<SceneEval> scenes;
    for (int s = 0; s < 10; ++s) {
        SceneEval e = random_scene(rng);
        e.dets.clear();
        for (const auto& g : e.gts) e.dets.push_back({g.box, 0.5});
        scenes.push_back(e);
    }
    for (auto k : {IouKind::Bev, IouKind::Box3D})
        EXPECT_NEAR(*evaluate(scenes, {0.7, k, Regime::Moderate, ApProtocol::Forty}), 1.0, 1e-12);
}

TEST(Evaluate, NoDetectionsScoreZeroAndNoGtIsAbsent) {
    std::vector<SceneEval> scenes{SceneEval{{}, {gt(car(0, 20))}}};
    EXPECT_EQ(*evaluate(scenes, {}), 0.0);
    std::vector<SceneEval> empty{SceneEval{{{car(0, 20), 0.9}}, {}}};
    EXPECT_FALSE(evaluate(empty, {}).has_value());
}

TEST(Evaluate, LooserThresholdNeverScoresLower) {
    std::mt19937_64 rng(4);
    for (int t = 0; t < 100; ++t) {
        std::vector<SceneEval> scenes;
        for (int s = 0; s < 5; ++s) scenes.push_back(random_scene(rng));
        const auto loose = evaluate(scenes, {0.5, IouKind::Bev, Regime::Moderate, ApProtocol::Eleven});
        const auto tight = evaluate(scenes, {0.7, IouKind::Bev, Regime::Moderate, ApProtocol::Eleven});
        if (!loose) continue;
        EXPECT_GE(*loose + 1e-12, *tight);
    }
}

TEST(Evaluate, AllCellsAndFormats) {
    std::vector<SceneEval> scenes{SceneEval{{{car(0, 20), 0.9}}, {gt(car(0, 20))}}};
    const auto rep = evaluate_all(scenes, "Car", 0.7, ApProtocol::Eleven);
    EXPECT_EQ(rep.cells.size(), 6u);
    EXPECT_NEAR(*rep.get(Regime::Hard, IouKind::Box3D), 1.0, 1e-12);
    const auto rec = format_records(rep);
    EXPECT_NE(rec.find("class=Car kind=bev regime=easy iou=0.70 protocol=11 ap=1.000000"), std::string::npos);
    EXPECT_NE(format_table(rep).find("Moderate"), std::string::npos);
}
