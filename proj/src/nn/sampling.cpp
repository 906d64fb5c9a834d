#include "ws3d/nn/sampling.hpp"

#include <algorithm>
#include <limits>

#include "ws3d/error.hpp"

namespace ws3d::nn {

namespace {

double dist2(const Matrix& a, Eigen::Index i, const Matrix& b, Eigen::Index j) {
    const double dx = a(i, 0) - b(j, 0);
    const double dy = a(i, 1) - b(j, 1);
    const double dz = a(i, 2) - b(j, 2);
    return dx * dx + dy * dy + dz * dz;
}

}  // namespace

std::vector<int> farthest_point_sample(const Matrix& xyz, int k, int seed_index) {
    const Eigen::Index n = xyz.rows();
    if (n == 0) throw Error("farthest_point_sample: empty point set");
    if (k < 1) throw Error("farthest_point_sample: k must be positive");
    if (seed_index < 0 || seed_index >= n) throw Error("farthest_point_sample: seed index out of range");

    const int distinct = static_cast<int>(std::min<Eigen::Index>(k, n));
    std::vector<int> picked;
    picked.reserve(static_cast<std::size_t>(k));
    std::vector<double> best(static_cast<std::size_t>(n), std::numeric_limits<double>::infinity());
    int cur = seed_index;
    for (int s = 0; s < distinct; ++s) {
        picked.push_back(cur);
        best[static_cast<std::size_t>(cur)] = -1.0;
        int next = -1;
        double next_d = -1.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            double& b = best[static_cast<std::size_t>(i)];
            if (b < 0.0) continue;
            b = std::min(b, dist2(xyz, i, xyz, cur));
            if (b > next_d) {
                next_d = b;
                next = static_cast<int>(i);
            }
        }
        if (next < 0) break;
        cur = next;
    }
    for (int s = distinct; s < k; ++s) picked.push_back(picked[static_cast<std::size_t>(s % distinct)]);
    return picked;
}

std::vector<std::vector<int>> ball_query(const Matrix& xyz, const Matrix& centroids, double radius, int cap) {
    if (radius <= 0.0 || cap < 1) throw Error("ball_query: radius and cap must be positive");
    const double r2 = radius * radius;
    std::vector<std::vector<int>> groups(static_cast<std::size_t>(centroids.rows()));
    for (Eigen::Index c = 0; c < centroids.rows(); ++c) {
        auto& g = groups[static_cast<std::size_t>(c)];
        int nearest = -1;
        double nearest_d = std::numeric_limits<double>::infinity();
        for (Eigen::Index i = 0; i < xyz.rows(); ++i) {
            const double d = dist2(xyz, i, centroids, c);
            if (d <= r2) {
                g.push_back(static_cast<int>(i));
                if (static_cast<int>(g.size()) == cap) break;
            } else if (d < nearest_d) {
                nearest_d = d;
                nearest = static_cast<int>(i);
            }
        }
        if (g.empty() && nearest >= 0) g.push_back(nearest);
    }
    return groups;
}

Interpolation three_nn_weights(const Matrix& fine, const Matrix& coarse) {
    if (coarse.rows() == 0) throw Error("three_nn_weights: coarse level is empty");
    const Eigen::Index n = fine.rows();
    Interpolation out;
    out.index.assign(static_cast<std::size_t>(n * 3), 0);
    out.weight = Matrix::Zero(n, 3);
    for (Eigen::Index i = 0; i < n; ++i) {
        double d[3] = {std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity(),
                       std::numeric_limits<double>::infinity()};
        int id[3] = {-1, -1, -1};
        for (Eigen::Index j = 0; j < coarse.rows(); ++j) {
            const double dj = dist2(fine, i, coarse, j);
            if (dj < d[2]) {
                int pos = 2;
                while (pos > 0 && dj < d[pos - 1]) {
                    d[pos] = d[pos - 1];
                    id[pos] = id[pos - 1];
                    --pos;
                }
                d[pos] = dj;
                id[pos] = static_cast<int>(j);
            }
        }
        double total = 0.0;
        double w[3] = {0.0, 0.0, 0.0};
        for (int k = 0; k < 3; ++k) {
            if (id[k] < 0) continue;
            w[k] = 1.0 / (d[k] + 1e-8);
            total += w[k];
        }
        for (int k = 0; k < 3; ++k) {
            out.index[static_cast<std::size_t>(i * 3 + k)] = id[k] < 0 ? id[0] : id[k];
            out.weight(i, k) = w[k] / total;
        }
    }
    return out;
}

Matrix gather_xyz(const Matrix& xyz, const std::vector<int>& index) {
    Matrix out(static_cast<Eigen::Index>(index.size()), xyz.cols());
    for (std::size_t i = 0; i < index.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = xyz.row(index[i]);
    return out;
}

}  // namespace ws3d::nn
