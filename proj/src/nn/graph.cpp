#include "ws3d/nn/graph.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ws3d/error.hpp"

namespace ws3d::nn {

ParamTensor::ParamTensor(std::string n, std::vector<std::size_t> s) : name(std::move(n)), shape(std::move(s)) {
    if (shape.empty()) throw ShapeError("parameter '" + name + "' has an empty shape");
    const std::size_t rows = shape.front();
    std::size_t cols = 1;
    for (std::size_t i = 1; i < shape.size(); ++i) cols *= shape[i];
    value.setZero(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    grad.setZero(value.rows(), value.cols());
}

const Matrix& Var::value() const { return graph->value(id); }
const Matrix& Var::grad() const { return graph->grad(id); }

Var Graph::constant(Matrix value) {
    Node n;
    n.value = std::move(value);
    nodes_.push_back(std::move(n));
    return Var{this, static_cast<int>(nodes_.size()) - 1};
}

Var Graph::param(ParamTensor& p) {
    Node n;
    n.value = p.value;
    n.param = &p;
    n.needs_grad = p.requires_grad;
    nodes_.push_back(std::move(n));
    return Var{this, static_cast<int>(nodes_.size()) - 1};
}

Var Graph::op(std::vector<Var> parents, Matrix value, BackwardFn backward) {
    Node n;
    n.value = std::move(value);
    n.parents.reserve(parents.size());
    for (const Var& v : parents) {
        if (v.graph != this) throw Error("op mixes variables from different graphs");
        n.parents.push_back(v.id);
        n.needs_grad = n.needs_grad || nodes_[static_cast<std::size_t>(v.id)].needs_grad;
    }
    if (n.needs_grad) n.backward = std::move(backward);
    nodes_.push_back(std::move(n));
    return Var{this, static_cast<int>(nodes_.size()) - 1};
}

void Graph::run_backward(Var loss) {
    if (backward_done_) throw Error("backward called twice on the same graph");
    if (loss.graph != this) throw Error("loss belongs to another graph");
    Node& root = nodes_[static_cast<std::size_t>(loss.id)];
    if (root.value.size() != 1) throw ShapeError("backward expects a scalar loss");
    backward_done_ = true;
    if (!root.needs_grad) return;
    root.grad = Matrix::Ones(1, 1);

    std::vector<const Matrix*> pvals;
    std::vector<Matrix*> pgrads;
    for (int id = loss.id; id >= 0; --id) {
        Node& n = nodes_[static_cast<std::size_t>(id)];
        if (!n.needs_grad || !n.backward || n.grad.size() == 0) continue;
        pvals.clear();
        pgrads.clear();
        for (int pid : n.parents) {
            Node& p = nodes_[static_cast<std::size_t>(pid)];
            pvals.push_back(&p.value);
            if (p.needs_grad) {
                if (p.grad.size() == 0) p.grad.setZero(p.value.rows(), p.value.cols());
                pgrads.push_back(&p.grad);
            } else {
                pgrads.push_back(nullptr);
            }
        }
        n.backward(n.grad, pvals, pgrads);
    }
}

void Graph::backward(Var loss) {
    run_backward(loss);
    for (Node& n : nodes_) {
        if (n.param == nullptr || n.grad.size() == 0) continue;
        if (n.param->grad.rows() != n.grad.rows() || n.param->grad.cols() != n.grad.cols()) {
            n.param->zero_grad();
        }
        n.param->grad += n.grad;
    }
}

std::vector<ParamGrad> Graph::backward_collect(Var loss) {
    run_backward(loss);
    std::vector<ParamGrad> out;
    for (Node& n : nodes_) {
        if (n.param == nullptr || n.grad.size() == 0) continue;
        out.push_back(ParamGrad{n.param, std::move(n.grad)});
    }
    return out;
}

// -- ops --------------------------------------------------------------------

namespace {

Graph& graph_of(Var v) {
    if (v.graph == nullptr) throw Error("variable is not bound to a graph");
    return *v.graph;
}

void require(bool ok, const std::string& what) {
    if (!ok) throw ShapeError(what);
}

}  // namespace

Var linear(Var x, Var w, Var b) {
    const Matrix& X = x.value();
    const Matrix& W = w.value();
    const Matrix& B = b.value();
    require(X.cols() == W.rows(), fmt::format("linear: input has {} columns, weight expects {}", X.cols(), W.rows()));
    require(B.rows() == 1 && B.cols() == W.cols(), "linear: bias shape mismatch");
    Matrix y = X * W;
    y.rowwise() += B.row(0);
    return graph_of(x).op({x, w, b}, std::move(y), [](const Matrix& g, auto pv, auto pg) {
        if (pg[0]) pg[0]->noalias() += g * pv[1]->transpose();
        if (pg[1]) pg[1]->noalias() += pv[0]->transpose() * g;
        if (pg[2]) *pg[2] += g.colwise().sum();
    });
}

Var matmul(Var a, Var b) {
    require(a.cols() == b.rows(), "matmul: inner dimensions differ");
    Matrix y = a.value() * b.value();
    return graph_of(a).op({a, b}, std::move(y), [](const Matrix& g, auto pv, auto pg) {
        if (pg[0]) pg[0]->noalias() += g * pv[1]->transpose();
        if (pg[1]) pg[1]->noalias() += pv[0]->transpose() * g;
    });
}

Var relu(Var x) {
    Matrix y = x.value().cwiseMax(0.0);
    return graph_of(x).op({x}, std::move(y), [](const Matrix& g, auto pv, auto pg) {
        if (pg[0]) *pg[0] += (pv[0]->array() > 0.0).select(g, 0.0);
    });
}

Var sigmoid(Var x) {
    Matrix y = (1.0 / (1.0 + (-x.value().array()).exp())).matrix();
    Matrix saved = y;
    return graph_of(x).op({x}, std::move(y), [s = std::move(saved)](const Matrix& g, auto, auto pg) {
        if (pg[0]) *pg[0] += (g.array() * s.array() * (1.0 - s.array())).matrix();
    });
}

Var add(Var a, Var b) {
    require(a.rows() == b.rows() && a.cols() == b.cols(), "add: shape mismatch");
    Matrix y = a.value() + b.value();
    return graph_of(a).op({a, b}, std::move(y), [](const Matrix& g, auto, auto pg) {
        if (pg[0]) *pg[0] += g;
        if (pg[1]) *pg[1] += g;
    });
}

Var sub(Var a, Var b) {
    require(a.rows() == b.rows() && a.cols() == b.cols(), "sub: shape mismatch");
    Matrix y = a.value() - b.value();
    return graph_of(a).op({a, b}, std::move(y), [](const Matrix& g, auto, auto pg) {
        if (pg[0]) *pg[0] += g;
        if (pg[1]) *pg[1] -= g;
    });
}

Var scale(Var x, double s) {
    Matrix y = x.value() * s;
    return graph_of(x).op({x}, std::move(y), [s](const Matrix& g, auto, auto pg) {
        if (pg[0]) *pg[0] += g * s;
    });
}

Var sum(Var x) {
    Matrix y(1, 1);
    y(0, 0) = x.value().sum();
    return graph_of(x).op({x}, std::move(y), [](const Matrix& g, auto, auto pg) {
        if (pg[0]) pg[0]->array() += g(0, 0);
    });
}

Var mean(Var x) {
    const double n = static_cast<double>(x.value().size());
    require(n > 0, "mean of an empty tensor");
    return scale(sum(x), 1.0 / n);
}

Var detach(Var x) { return graph_of(x).constant(x.value()); }

Var gather_rows(Var x, std::vector<int> index) {
    const Matrix& X = x.value();
    Matrix y(static_cast<Eigen::Index>(index.size()), X.cols());
    for (std::size_t i = 0; i < index.size(); ++i) {
        require(index[i] >= 0 && index[i] < X.rows(), "gather_rows: index out of range");
        y.row(static_cast<Eigen::Index>(i)) = X.row(index[i]);
    }
    return graph_of(x).op({x}, std::move(y), [idx = std::move(index)](const Matrix& g, auto, auto pg) {
        if (!pg[0]) return;
        Matrix& G = *pg[0];
        for (std::size_t i = 0; i < idx.size(); ++i) G.row(idx[i]) += g.row(static_cast<Eigen::Index>(i));
    });
}

Var group_max(Var x, int group) {
    const Matrix& X = x.value();
    require(group > 0 && X.rows() % group == 0, "group_max: rows are not a multiple of the group size");
    const Eigen::Index groups = X.rows() / group;
    const Eigen::Index cols = X.cols();
    Matrix y(groups, cols);
    std::vector<int> arg(static_cast<std::size_t>(groups * cols));
    for (Eigen::Index gi = 0; gi < groups; ++gi) {
        const Eigen::Index base = gi * group;
        for (Eigen::Index c = 0; c < cols; ++c) {
            y(gi, c) = X(base, c);
            arg[static_cast<std::size_t>(gi * cols + c)] = static_cast<int>(base);
        }
        for (Eigen::Index r = base + 1; r < base + group; ++r) {
            for (Eigen::Index c = 0; c < cols; ++c) {
                if (X(r, c) > y(gi, c)) {
                    y(gi, c) = X(r, c);
                    arg[static_cast<std::size_t>(gi * cols + c)] = static_cast<int>(r);
                }
            }
        }
    }
    return graph_of(x).op({x}, std::move(y), [arg = std::move(arg), cols](const Matrix& g, auto, auto pg) {
        if (!pg[0]) return;
        Matrix& G = *pg[0];
        for (Eigen::Index gi = 0; gi < g.rows(); ++gi) {
            for (Eigen::Index c = 0; c < cols; ++c) G(arg[static_cast<std::size_t>(gi * cols + c)], c) += g(gi, c);
        }
    });
}

Var concat_cols(std::span<const Var> parts) {
    require(!parts.empty(), "concat_cols: no inputs");
    const Eigen::Index rows = parts.front().rows();
    Eigen::Index cols = 0;
    std::vector<Eigen::Index> widths;
    for (const Var& p : parts) {
        require(p.rows() == rows, "concat_cols: row counts differ");
        widths.push_back(p.cols());
        cols += p.cols();
    }
    Matrix y(rows, cols);
    Eigen::Index off = 0;
    for (const Var& p : parts) {
        y.middleCols(off, p.cols()) = p.value();
        off += p.cols();
    }
    std::vector<Var> parents(parts.begin(), parts.end());
    return graph_of(parts.front())
        .op(std::move(parents), std::move(y), [widths = std::move(widths)](const Matrix& g, auto, auto pg) {
            Eigen::Index o = 0;
            for (std::size_t i = 0; i < widths.size(); ++i) {
                if (pg[i]) *pg[i] += g.middleCols(o, widths[i]);
                o += widths[i];
            }
        });
}

Var slice_cols(Var x, int begin, int count) {
    require(begin >= 0 && count >= 0 && begin + count <= x.cols(), "slice_cols: range out of bounds");
    Matrix y = x.value().middleCols(begin, count);
    return graph_of(x).op({x}, std::move(y), [begin, count](const Matrix& g, auto, auto pg) {
        if (pg[0]) pg[0]->middleCols(begin, count) += g;
    });
}

Var weighted_gather(Var x, std::vector<int> index, Matrix weight) {
    const Matrix& X = x.value();
    const Eigen::Index n = weight.rows();
    const Eigen::Index k = weight.cols();
    require(static_cast<Eigen::Index>(index.size()) == n * k, "weighted_gather: index/weight size mismatch");
    Matrix y = Matrix::Zero(n, X.cols());
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < k; ++j) {
            const int src = index[static_cast<std::size_t>(i * k + j)];
            require(src >= 0 && src < X.rows(), "weighted_gather: index out of range");
            y.row(i) += weight(i, j) * X.row(src);
        }
    }
    return graph_of(x).op({x}, std::move(y),
                          [idx = std::move(index), w = std::move(weight)](const Matrix& g, auto, auto pg) {
                              if (!pg[0]) return;
                              Matrix& G = *pg[0];
                              for (Eigen::Index i = 0; i < w.rows(); ++i) {
                                  for (Eigen::Index j = 0; j < w.cols(); ++j) {
                                      G.row(idx[static_cast<std::size_t>(i * w.cols() + j)]) += w(i, j) * g.row(i);
                                  }
                              }
                          });
}

}  // namespace ws3d::nn
