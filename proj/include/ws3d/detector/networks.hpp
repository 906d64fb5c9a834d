#pragma once

#include <cstdint>
#include <optional>
#include <random>

#include "ws3d/detector/config.hpp"
#include "ws3d/nn/graph.hpp"
#include "ws3d/nn/layers.hpp"

namespace ws3d::detector {

struct Stage1Output {
    nn::Var fg_prob;  // (B*N) x 1, sigmoid
    nn::Var center;   // (B*N) x 4 * num_bins
};

/// Point backbone (4 SA + 4 FP) with a foreground head and a center head.
class Stage1Net {
public:
    Stage1Net(const Stage1Config& cfg, std::uint64_t seed);

    /// xyz: (B*N) x 3, features: (B*N) x 1 intensity.
    Stage1Output forward(nn::Graph& g, const nn::Matrix& xyz, const nn::Matrix& intensity, int batch = 1);
    nn::ParamList params();
    const Stage1Config& config() const { return cfg_; }

private:
    Stage1Config cfg_;
    std::vector<nn::SetAbstraction> sa_;
    std::vector<nn::FeaturePropagation> fp_;
    nn::Mlp seg_head_;
    nn::Mlp center_head_;
};

struct Stage2Output {
    nn::Var box;                    // B x (2 * theta_bins + 6)
    std::optional<nn::Var> conf;    // B x 1, sigmoid
};

/// Cuboid network over canonical proposal crops; one instance generates the
/// initial cuboid, a second one (with the confidence head) refines it.
class Stage2Net {
public:
    Stage2Net(const Stage2Config& cfg, bool with_confidence, std::string name, std::uint64_t seed);

    /// block: (B*N) x 5 rows of (x, y, z, intensity, foreground).
    Stage2Output forward(nn::Graph& g, const nn::Matrix& block, int batch = 1);
    nn::ParamList params();
    const Stage2Config& config() const { return cfg_; }
    bool has_confidence() const { return with_conf_; }

private:
    Stage2Config cfg_;
    bool with_conf_;
    std::vector<nn::SetAbstraction> sa_;
    nn::Mlp trunk_head_;
    nn::Linear box_out_;
    nn::Linear conf_out_;
};

}  // namespace ws3d::detector
