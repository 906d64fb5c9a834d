#include "ws3d/detector/networks.hpp"

#include <fmt/format.h>

#include "ws3d/error.hpp"

namespace ws3d::detector {

using nn::Matrix;
using nn::PointLevel;
using nn::Var;

Stage1Net::Stage1Net(const Stage1Config& cfg, std::uint64_t seed) : cfg_(cfg) {
    if (cfg_.sa.size() != 4 || cfg_.fp.size() != 4) throw ShapeError("stage-1 needs 4 SA and 4 FP layers");
    std::mt19937_64 rng(seed);
    std::vector<int> level_feat{1};  // intensity
    for (std::size_t i = 0; i < cfg_.sa.size(); ++i) {
        sa_.emplace_back(fmt::format("s1.sa{}", i + 1), cfg_.sa[i], level_feat.back(), rng);
        level_feat.push_back(sa_.back().out_features());
    }
    int coarse = level_feat.back();
    for (std::size_t i = 0; i < cfg_.fp.size(); ++i) {
        const int skip = level_feat[level_feat.size() - 2 - i];
        fp_.emplace_back(fmt::format("s1.fp{}", i + 1), cfg_.fp[i], coarse, skip, rng);
        coarse = fp_.back().out_features();
    }
    seg_head_ = nn::Mlp("s1.seg", coarse, {cfg_.head_hidden, Stage1Config::kSegOut}, false, rng);
    center_head_ = nn::Mlp("s1.center", coarse, {cfg_.head_hidden, cfg_.center_out()}, false, rng);
}

Stage1Output Stage1Net::forward(nn::Graph& g, const Matrix& xyz, const Matrix& intensity, int batch) {
    if (xyz.rows() == 0) throw Error("stage-1 forward on an empty scene");
    if (xyz.cols() != 3 || intensity.rows() != xyz.rows() || intensity.cols() != 1) {
        throw ShapeError("stage-1 expects N x 3 coordinates and N x 1 intensity");
    }
    std::vector<PointLevel> levels(1);
    levels[0].xyz = xyz;
    levels[0].features = g.constant(intensity);
    levels[0].batch = batch;
    for (auto& sa : sa_) levels.push_back(sa.forward(g, levels.back()));
    for (std::size_t i = 0; i < fp_.size(); ++i) {
        PointLevel& coarse = levels[levels.size() - 1 - i];
        PointLevel& fine = levels[levels.size() - 2 - i];
        fine.features = fp_[i].forward(g, coarse, fine);
    }
    Var feat = *levels[0].features;
    return {nn::sigmoid(seg_head_.forward(g, feat)), center_head_.forward(g, feat)};
}

nn::ParamList Stage1Net::params() {
    nn::ParamList out;
    for (auto& s : sa_) s.collect(out);
    for (auto& f : fp_) f.collect(out);
    seg_head_.collect(out);
    center_head_.collect(out);
    return out;
}

Stage2Net::Stage2Net(const Stage2Config& cfg, bool with_confidence, std::string name, std::uint64_t seed)
    : cfg_(cfg), with_conf_(with_confidence) {
    if (cfg_.sa.size() != 4 || !cfg_.sa.back().group_all) {
        throw ShapeError("stage-2 needs 4 SA layers, the last one grouping all points");
    }
    if (cfg_.in_channels != 5) throw ShapeError("stage-2 blocks carry exactly 5 channels");
    std::mt19937_64 rng(seed);
    int feat = cfg_.in_channels;
    for (std::size_t i = 0; i < cfg_.sa.size(); ++i) {
        sa_.emplace_back(fmt::format("{}.sa{}", name, i + 1), cfg_.sa[i], feat, rng);
        feat = sa_.back().out_features();
    }
    trunk_head_ = nn::Mlp(name + ".head", feat, cfg_.head_hidden, true, rng);
    const int hidden = cfg_.head_hidden.empty() ? feat : cfg_.head_hidden.back();
    box_out_ = nn::Linear(name + ".box", hidden, cfg_.box_out(), rng);
    if (with_conf_) conf_out_ = nn::Linear(name + ".conf", hidden, 1, rng);
}

Stage2Output Stage2Net::forward(nn::Graph& g, const Matrix& block, int batch) {
    if (block.cols() != cfg_.in_channels) {
        throw ShapeError(fmt::format("stage-2 block has {} channels, expected {}", block.cols(), cfg_.in_channels));
    }
    if (block.rows() == 0 || block.rows() % batch != 0) throw ShapeError("stage-2 block is empty or ragged");
    PointLevel level;
    level.xyz = block.leftCols(3);
    level.features = g.constant(block);
    level.batch = batch;
    for (auto& sa : sa_) level = sa.forward(g, level);
    Var h = trunk_head_.forward(g, *level.features);
    Stage2Output out{box_out_.forward(g, h), std::nullopt};
    if (with_conf_) out.conf = nn::sigmoid(conf_out_.forward(g, h));
    return out;
}

nn::ParamList Stage2Net::params() {
    nn::ParamList out;
    for (auto& s : sa_) s.collect(out);
    trunk_head_.collect(out);
    box_out_.collect(out);
    if (with_conf_) conf_out_.collect(out);
    return out;
}

}  // namespace ws3d::detector
