#pragma once

// Point sampling and neighborhood kernels used by the set-abstraction and
// feature-propagation layers. Coordinates are N x 3 row-major matrices.

#include <cstddef>
#include <vector>

#include "ws3d/nn/graph.hpp"

namespace ws3d::nn {

/// Greedy max-min selection starting at seed_index. When k exceeds the
/// number of points the selection repeats cyclically.
std::vector<int> farthest_point_sample(const Matrix& xyz, int k, int seed_index = 0);

/// For every centroid, up to `cap` indices of points within `radius`, in
/// index order. A centroid with no neighbor gets its nearest point.
std::vector<std::vector<int>> ball_query(const Matrix& xyz, const Matrix& centroids, double radius, int cap);

struct Interpolation {
    std::vector<int> index;  // N x 3, row-major
    Matrix weight;           // N x 3, rows sum to 1
};

/// Inverse squared-distance weights over the (up to) three nearest coarse
/// points: w ~ 1 / (d^2 + 1e-8). Missing neighbors get weight 0.
Interpolation three_nn_weights(const Matrix& fine, const Matrix& coarse);

Matrix gather_xyz(const Matrix& xyz, const std::vector<int>& index);

}  // namespace ws3d::nn
