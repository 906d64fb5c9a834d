#pragma once

// A detector small enough to train for a handful of steps inside a unit
// test, plus helpers that turn synthetic scenes into training input.

#include <vector>

#include "ws3d/detector/config.hpp"
#include "ws3d/detector/training.hpp"
#include "ws3d/synthgen.hpp"

namespace ws3d::oracle {

inline detector::DetectorConfig tiny_config() {
    using nn::LayerKind;
    using nn::LayerSpec;
    detector::DetectorConfig c = detector::DetectorConfig::desk();
    c.stage1.num_points = 256;
    c.stage1.sa.clear();
    const double radii[4][2] = {{0.5, 1.0}, {1.0, 2.0}, {2.0, 4.0}, {4.0, 8.0}};
    const int groups[] = {64, 16, 8, 4};
    for (int i = 0; i < 4; ++i) {
        LayerSpec s;
        s.kind = LayerKind::SAMultiScale;
        s.group_size = groups[i];
        s.scales = {{radii[i][0], 4, {4, 8}}, {radii[i][1], 8, {4, 8}}};
        c.stage1.sa.push_back(s);
    }
    c.stage1.fp.clear();
    for (int i = 0; i < 4; ++i) {
        LayerSpec s;
        s.kind = LayerKind::FP;
        s.widths = {8};
        c.stage1.fp.push_back(s);
    }
    c.stage1.head_hidden = 8;

    c.stage2.num_points = 32;
    c.stage2.sa.clear();
    const int g2[] = {16, 8, 4};
    const double r2[] = {0.5, 1.0, 2.0};
    for (int i = 0; i < 3; ++i) {
        LayerSpec s;
        s.kind = LayerKind::SASingleScale;
        s.group_size = g2[i];
        s.scales = {{r2[i], 8, {8}}};
        c.stage2.sa.push_back(s);
    }
    LayerSpec all;
    all.kind = LayerKind::SASingleScale;
    all.group_size = 1;
    all.group_all = true;
    all.scales = {{0.0, 0, {16}}};
    c.stage2.sa.push_back(all);
    c.stage2.head_hidden = {16};

    c.train.stage1_iterations = 3;
    c.train.stage1_batch = 2;
    c.train.stage2_iterations = 3;
    c.train.stage2_batch = 4;
    c.train.proposals_per_gt = 4;
    c.train.log_every = 1;
    return c;
}

inline std::vector<detector::TrainingScene> to_training(const std::vector<synth::SynthScene>& scenes) {
    std::vector<detector::TrainingScene> out;
    for (const auto& s : scenes) {
        detector::TrainingScene t{s.id, s.cloud, s.clicks, {}};
        for (std::size_t i = 0; i < s.boxes.size(); ++i)
            if (s.precise[i]) t.precise.push_back(s.boxes[i]);
        out.push_back(std::move(t));
    }
    return out;
}

inline std::vector<synth::SynthScene> small_dataset(int scenes, std::uint64_t seed, double precise = 1.0) {
    synth::SynthConfig cfg;
    cfg.seed = seed;
    cfg.scenes = scenes;
    cfg.precise_fraction = precise;
    return synth::generate_dataset(cfg);
}

}  // namespace ws3d::oracle
