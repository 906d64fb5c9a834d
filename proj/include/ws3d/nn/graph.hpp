#pragma once

// Minimal reverse-mode automatic differentiation over row-major double
// matrices. A Graph records one forward pass (a tape); backward() walks the
// tape once in reverse and accumulates gradients into the ParamTensors that
// fed it. A graph can be differentiated only once.

#include <Eigen/Core>

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace ws3d::nn {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Named trainable array. Values are stored as a (shape[0] x rest) matrix.
struct ParamTensor {
    std::string name;
    std::vector<std::size_t> shape;
    Matrix value;
    Matrix grad;
    bool requires_grad = true;

    ParamTensor() = default;
    ParamTensor(std::string name, std::vector<std::size_t> shape);

    std::size_t numel() const { return static_cast<std::size_t>(value.size()); }
    void zero_grad() { grad.setZero(value.rows(), value.cols()); }
};

class Graph;

struct Var {
    Graph* graph = nullptr;
    int id = -1;

    const Matrix& value() const;
    const Matrix& grad() const;
    Eigen::Index rows() const { return value().rows(); }
    Eigen::Index cols() const { return value().cols(); }
    double scalar() const { return value()(0, 0); }
};

/// Gradient of a graph output with respect to each parent of an op.
/// parent_grads[i] is null when parent i does not need a gradient.
using BackwardFn = std::function<void(const Matrix& out_grad, std::span<const Matrix* const> parent_values,
                                      std::span<Matrix* const> parent_grads)>;

/// Parameter gradients produced by one backward pass, in tape order.
struct ParamGrad {
    ParamTensor* param;
    Matrix grad;
};

class Graph {
public:
    Graph() = default;
    Graph(const Graph&) = delete;
    Graph& operator=(const Graph&) = delete;

    Var constant(Matrix value);
    Var param(ParamTensor& p);

    /// Generic op: `value` is the already-computed forward result.
    Var op(std::vector<Var> parents, Matrix value, BackwardFn backward);

    /// Accumulates d(loss)/d(param) into ParamTensor::grad.
    void backward(Var loss);
    /// Same traversal, but returns the parameter gradients instead of
    /// touching ParamTensor::grad (used for deterministic batch reduction).
    std::vector<ParamGrad> backward_collect(Var loss);

    const Matrix& value(int id) const { return nodes_[static_cast<std::size_t>(id)].value; }
    const Matrix& grad(int id) const { return nodes_[static_cast<std::size_t>(id)].grad; }
    bool needs_grad(int id) const { return nodes_[static_cast<std::size_t>(id)].needs_grad; }
    std::size_t size() const { return nodes_.size(); }

private:
    struct Node {
        Matrix value;
        Matrix grad;
        std::vector<int> parents;
        BackwardFn backward;
        ParamTensor* param = nullptr;
        bool needs_grad = false;
    };

    void run_backward(Var loss);

    std::vector<Node> nodes_;
    bool backward_done_ = false;
};

// -- ops --------------------------------------------------------------------

/// y = x W + b, with W (in x out) and b (1 x out) broadcast over rows.
Var linear(Var x, Var w, Var b);
Var matmul(Var a, Var b);
Var relu(Var x);
Var sigmoid(Var x);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var scale(Var x, double s);
Var sum(Var x);
Var mean(Var x);
/// Gradient-free copy.
Var detach(Var x);

Var gather_rows(Var x, std::vector<int> index);
/// Rows come in consecutive blocks of `group`; returns the channel-wise max
/// of each block. The gradient is routed to the arg-max row.
Var group_max(Var x, int group);
Var concat_cols(std::span<const Var> parts);
Var slice_cols(Var x, int begin, int count);
/// out[i] = sum_k weight(i,k) * x[index(i,k)], with index/weight N x K.
Var weighted_gather(Var x, std::vector<int> index, Matrix weight);

}  // namespace ws3d::nn
