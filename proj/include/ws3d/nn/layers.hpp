#pragma once

// Point-network building blocks: fully connected layers, shared pointwise
// MLPs, set abstraction (sample -> group -> MLP -> max pool) and feature
// propagation (3-NN interpolation -> skip concat -> MLP).

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "ws3d/nn/graph.hpp"

namespace ws3d::nn {

enum class LayerKind { SAMultiScale, SASingleScale, FP, FC };

struct ScaleSpec {
    double radius = 1.0;
    int cap = 16;
    std::vector<int> widths;  // MLP output widths for this scale
};

struct LayerSpec {
    LayerKind kind = LayerKind::FC;
    int group_size = 0;             // SA: centroids out; 1 with group_all groups everything
    bool group_all = false;         // SA: single group of all points around the origin
    std::vector<ScaleSpec> scales;  // SA
    std::vector<int> widths;        // FP / FC

    /// Throws ShapeError naming `name` when the spec is inconsistent.
    void validate(const std::string& name) const;
};

/// Collects parameters for optimizers and checkpoints.
using ParamList = std::vector<ParamTensor*>;

class Linear {
public:
    Linear() = default;
    Linear(std::string name, int in, int out, std::mt19937_64& rng);

    Var forward(Graph& g, Var x);
    void collect(ParamList& out);
    int in_features() const { return static_cast<int>(weight_.value.rows()); }
    int out_features() const { return static_cast<int>(weight_.value.cols()); }

private:
    ParamTensor weight_;
    ParamTensor bias_;
};

/// Stack of Linear layers with ReLU after each one (optionally not the last).
class Mlp {
public:
    Mlp() = default;
    Mlp(std::string name, int in, const std::vector<int>& widths, bool relu_last, std::mt19937_64& rng);

    Var forward(Graph& g, Var x);
    void collect(ParamList& out);
    int out_features() const;

private:
    std::vector<Linear> layers_;
    bool relu_last_ = true;
};

/// A batch of `batch` equally sized point sets stacked row-wise: item b
/// owns rows [b * n, (b + 1) * n) of both xyz and features.
struct PointLevel {
    Matrix xyz;  // (batch * n) x 3
    std::optional<Var> features;
    int batch = 1;

    Eigen::Index per_item() const { return xyz.rows() / batch; }
};

class SetAbstraction {
public:
    SetAbstraction() = default;
    SetAbstraction(std::string name, LayerSpec spec, int in_features, std::mt19937_64& rng);

    /// Down-samples `input` to spec.group_size centroids.
    PointLevel forward(Graph& g, const PointLevel& input);
    void collect(ParamList& out);
    int out_features() const;
    const LayerSpec& spec() const { return spec_; }

private:
    std::string name_;
    LayerSpec spec_;
    int in_features_ = 0;
    std::vector<Mlp> mlps_;
};

class FeaturePropagation {
public:
    FeaturePropagation() = default;
    FeaturePropagation(std::string name, LayerSpec spec, int coarse_features, int skip_features,
                       std::mt19937_64& rng);

    Var forward(Graph& g, const PointLevel& coarse, const PointLevel& fine);
    void collect(ParamList& out);
    int out_features() const { return mlp_.out_features(); }

private:
    std::string name_;
    Mlp mlp_;
    int skip_features_ = 0;
};

}  // namespace ws3d::nn
