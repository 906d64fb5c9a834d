#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "ws3d/nn/graph.hpp"

namespace ws3d::nn {

struct AdamConfig {
    double lr = 0.002;
    double weight_decay = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// Moments are kept in the same order as the parameter list passed to
/// adam_step, which must not change between steps.
struct AdamState {
    AdamConfig cfg;
    std::vector<Matrix> m;
    std::vector<Matrix> v;
    std::int64_t step = 0;
};

/// Bias-corrected Adam with decoupled weight decay; zeroes the gradients
/// afterwards.
void adam_step(std::span<ParamTensor* const> params, AdamState& state);

void zero_grad(std::span<ParamTensor* const> params);

}  // namespace ws3d::nn
