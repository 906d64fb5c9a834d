#include "ws3d/nn/adam.hpp"

#include <cmath>

#include "ws3d/error.hpp"

namespace ws3d::nn {

void adam_step(std::span<ParamTensor* const> params, AdamState& state) {
    if (state.m.empty()) {
        for (const ParamTensor* p : params) {
            state.m.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
            state.v.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
        }
    }
    if (state.m.size() != params.size()) throw ShapeError("adam_step: parameter list changed between steps");
    ++state.step;
    const auto& c = state.cfg;
    const double t = static_cast<double>(state.step);
    const double bc1 = 1.0 - std::pow(c.beta1, t);
    const double bc2 = 1.0 - std::pow(c.beta2, t);
    for (std::size_t i = 0; i < params.size(); ++i) {
        ParamTensor& p = *params[i];
        if (!p.requires_grad) continue;
        if (p.grad.size() != p.value.size()) p.zero_grad();
        Matrix& m = state.m[i];
        Matrix& v = state.v[i];
        if (m.rows() != p.value.rows() || m.cols() != p.value.cols()) {
            throw ShapeError("adam_step: moment shape does not match '" + p.name + "'");
        }
        m = c.beta1 * m + (1.0 - c.beta1) * p.grad;
        v = c.beta2 * v + (1.0 - c.beta2) * p.grad.cwiseProduct(p.grad);
        const auto update = (m.array() / bc1) / ((v.array() / bc2).sqrt() + c.eps);
        p.value.array() -= c.lr * (update + c.weight_decay * p.value.array());
        p.grad.setZero();
    }
}

void zero_grad(std::span<ParamTensor* const> params) {
    for (ParamTensor* p : params) p->zero_grad();
}

}  // namespace ws3d::nn
