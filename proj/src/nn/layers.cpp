#include "ws3d/nn/layers.hpp"

#include <fmt/format.h>

#include <cmath>

#include "ws3d/error.hpp"
#include "ws3d/nn/sampling.hpp"

namespace ws3d::nn {

void LayerSpec::validate(const std::string& name) const {
    auto fail = [&](const std::string& why) { throw ShapeError(fmt::format("layer '{}': {}", name, why)); };
    auto check_widths = [&](const std::vector<int>& w) {
        if (w.empty()) fail("empty MLP");
        for (int v : w)
            if (v <= 0) fail("non-positive width");
    };
    switch (kind) {
        case LayerKind::SAMultiScale:
        case LayerKind::SASingleScale: {
            if (scales.empty()) fail("set abstraction without scales");
            if (kind == LayerKind::SASingleScale && scales.size() != 1) fail("single-scale layer with several radii");
            if (!group_all && group_size < 1) fail("group size must be positive");
            for (std::size_t i = 0; i < scales.size(); ++i) {
                check_widths(scales[i].widths);
                if (!group_all && (scales[i].radius <= 0.0 || scales[i].cap < 1)) fail("bad radius or cap");
                if (i > 0 && scales[i].radius < scales[i - 1].radius) fail("radii must be ascending");
            }
            break;
        }
        case LayerKind::FP:
        case LayerKind::FC:
            check_widths(widths);
            break;
    }
}

Linear::Linear(std::string name, int in, int out, std::mt19937_64& rng)
    : weight_(name + ".weight", {static_cast<std::size_t>(in), static_cast<std::size_t>(out)}),
      bias_(name + ".bias", {1, static_cast<std::size_t>(out)}) {
    const double bound = std::sqrt(6.0 / static_cast<double>(in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (Eigen::Index i = 0; i < weight_.value.size(); ++i) weight_.value.data()[i] = dist(rng);
}

Var Linear::forward(Graph& g, Var x) {
    if (x.cols() != weight_.value.rows()) {
        throw ShapeError(fmt::format("layer '{}': input has {} channels, expected {}", weight_.name, x.cols(),
                                     weight_.value.rows()));
    }
    return linear(x, g.param(weight_), g.param(bias_));
}

void Linear::collect(ParamList& out) {
    out.push_back(&weight_);
    out.push_back(&bias_);
}

Mlp::Mlp(std::string name, int in, const std::vector<int>& widths, bool relu_last, std::mt19937_64& rng)
    : relu_last_(relu_last) {
    int prev = in;
    for (std::size_t i = 0; i < widths.size(); ++i) {
        layers_.emplace_back(fmt::format("{}.{}", name, i), prev, widths[i], rng);
        prev = widths[i];
    }
}

Var Mlp::forward(Graph& g, Var x) {
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        x = layers_[i].forward(g, x);
        if (i + 1 < layers_.size() || relu_last_) x = relu(x);
    }
    return x;
}

void Mlp::collect(ParamList& out) {
    for (auto& l : layers_) l.collect(out);
}

int Mlp::out_features() const { return layers_.empty() ? 0 : layers_.back().out_features(); }

SetAbstraction::SetAbstraction(std::string name, LayerSpec spec, int in_features, std::mt19937_64& rng)
    : name_(std::move(name)), spec_(std::move(spec)), in_features_(in_features) {
    spec_.validate(name_);
    for (std::size_t s = 0; s < spec_.scales.size(); ++s) {
        mlps_.emplace_back(fmt::format("{}.scale{}", name_, s), 3 + in_features, spec_.scales[s].widths, true, rng);
    }
}

PointLevel SetAbstraction::forward(Graph& g, const PointLevel& input) {
    const int in_feat = input.features ? static_cast<int>(input.features->cols()) : 0;
    if (in_feat != in_features_) {
        throw ShapeError(fmt::format("layer '{}': got {} input channels, expected {}", name_, in_feat, in_features_));
    }
    if (input.xyz.rows() == 0 || input.batch < 1 || input.xyz.rows() % input.batch != 0) {
        throw ShapeError(fmt::format("layer '{}': empty or ragged input", name_));
    }
    const Eigen::Index n = input.per_item();
    const int batch = input.batch;

    PointLevel out;
    out.batch = batch;
    std::vector<Var> pooled;
    if (spec_.group_all) {
        out.xyz = Matrix::Zero(batch, 3);
        std::vector<Var> parts{g.constant(input.xyz)};
        if (input.features) parts.push_back(*input.features);
        Var x = parts.size() == 1 ? parts.front() : concat_cols(parts);
        pooled.push_back(group_max(mlps_.front().forward(g, x), static_cast<int>(n)));
    } else {
        const int s_out = spec_.group_size;
        out.xyz.resize(static_cast<Eigen::Index>(batch) * s_out, 3);
        std::vector<std::vector<std::vector<int>>> groups(spec_.scales.size());
        for (int b = 0; b < batch; ++b) {
            const Matrix item = input.xyz.middleRows(b * n, n);
            const auto centers = farthest_point_sample(item, s_out, 0);
            const Matrix cxyz = gather_xyz(item, centers);
            out.xyz.middleRows(static_cast<Eigen::Index>(b) * s_out, s_out) = cxyz;
            for (std::size_t s = 0; s < spec_.scales.size(); ++s) {
                auto q = ball_query(item, cxyz, spec_.scales[s].radius, spec_.scales[s].cap);
                for (auto& grp : q) {
                    for (int& idx : grp) idx += static_cast<int>(b * n);
                    groups[s].push_back(std::move(grp));
                }
            }
        }
        for (std::size_t s = 0; s < spec_.scales.size(); ++s) {
            const ScaleSpec& sc = spec_.scales[s];
            std::vector<int> flat;
            flat.reserve(groups[s].size() * static_cast<std::size_t>(sc.cap));
            for (const auto& grp : groups[s]) {
                for (int k = 0; k < sc.cap; ++k) {
                    // pad short groups with their first member; max pooling is unaffected
                    flat.push_back(k < static_cast<int>(grp.size()) ? grp[static_cast<std::size_t>(k)] : grp.front());
                }
            }
            Matrix rel(static_cast<Eigen::Index>(flat.size()), 3);
            const double inv_r = 1.0 / sc.radius;
            for (std::size_t i = 0; i < flat.size(); ++i) {
                const Eigen::Index c = static_cast<Eigen::Index>(i / static_cast<std::size_t>(sc.cap));
                rel.row(static_cast<Eigen::Index>(i)) = (input.xyz.row(flat[i]) - out.xyz.row(c)) * inv_r;
            }
            std::vector<Var> parts{g.constant(std::move(rel))};
            if (input.features) parts.push_back(gather_rows(*input.features, flat));
            Var x = parts.size() == 1 ? parts.front() : concat_cols(parts);
            pooled.push_back(group_max(mlps_[s].forward(g, x), sc.cap));
        }
    }
    out.features = pooled.size() == 1 ? pooled.front() : concat_cols(pooled);
    return out;
}

void SetAbstraction::collect(ParamList& out) {
    for (auto& m : mlps_) m.collect(out);
}

int SetAbstraction::out_features() const {
    int total = 0;
    for (const auto& m : mlps_) total += m.out_features();
    return total;
}

FeaturePropagation::FeaturePropagation(std::string name, LayerSpec spec, int coarse_features, int skip_features,
                                       std::mt19937_64& rng)
    : name_(std::move(name)), skip_features_(skip_features) {
    spec.validate(name_);
    mlp_ = Mlp(name_, coarse_features + skip_features, spec.widths, true, rng);
}

Var FeaturePropagation::forward(Graph& g, const PointLevel& coarse, const PointLevel& fine) {
    if (!coarse.features || coarse.xyz.rows() == 0) {
        throw ShapeError(fmt::format("layer '{}': coarse level has no features", name_));
    }
    const int skip = fine.features ? static_cast<int>(fine.features->cols()) : 0;
    if (skip != skip_features_) {
        throw ShapeError(fmt::format("layer '{}': got {} skip channels, expected {}", name_, skip, skip_features_));
    }
    if (coarse.batch != fine.batch) throw ShapeError(fmt::format("layer '{}': batch size mismatch", name_));
    const Eigen::Index nf = fine.per_item();
    const Eigen::Index nc = coarse.per_item();
    std::vector<int> index;
    Matrix weight(fine.xyz.rows(), 3);
    index.reserve(static_cast<std::size_t>(fine.xyz.rows()) * 3);
    for (int b = 0; b < fine.batch; ++b) {
        auto interp = three_nn_weights(fine.xyz.middleRows(b * nf, nf), coarse.xyz.middleRows(b * nc, nc));
        for (int idx : interp.index) index.push_back(idx + static_cast<int>(b * nc));
        weight.middleRows(b * nf, nf) = interp.weight;
    }
    Var x = weighted_gather(*coarse.features, std::move(index), std::move(weight));
    if (fine.features) {
        const Var parts[] = {x, *fine.features};
        x = concat_cols(parts);
    }
    return mlp_.forward(g, x);
}

void FeaturePropagation::collect(ParamList& out) { mlp_.collect(out); }

}  // namespace ws3d::nn
