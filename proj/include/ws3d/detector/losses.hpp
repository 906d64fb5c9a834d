#pragma once

// Training losses. Each loss exists twice: as a plain function over values
// (reference semantics, used by tests and tools) and as a fused graph op
// with an analytic backward pass.

#include <array>
#include <span>
#include <vector>

#include "ws3d/detector/config.hpp"
#include "ws3d/geometry.hpp"
#include "ws3d/nn/graph.hpp"
#include "ws3d/weak_supervision.hpp"

namespace ws3d::detector {

/// 0.5 x^2 / beta for |x| < beta, |x| - 0.5 beta otherwise.
double smooth_l1(double x, double beta = 1.0);
double smooth_l1_grad(double x, double beta = 1.0);

struct BinTarget {
    int bin = 0;
    double residual = 0.0;
};

/// theta bins cover [-pi, pi) uniformly; the residual is normalized by half
/// a bin width.
BinTarget encode_theta(double theta, int num_bins);
double decode_theta(int bin, double residual, int num_bins);

/// Layout of one predicted cuboid row:
///   [0, B)      theta bin logits
///   [B, 2B)     theta residuals
///   [2B, 2B+6)  x, y, z, dh, dw, dl  (sizes as offsets from the anchor)
struct BoxTarget {
    BinTarget theta;
    std::array<double, 6> reg{};
};

BoxTarget encode_box(const Cuboid& canonical_gt, const Cuboid& anchor, int theta_bins);
/// Argmax bin + residual for theta; sizes are clamped to at least 1 cm.
Cuboid decode_box(std::span<const double> row, const Cuboid& anchor, int theta_bins);

/// Layout of one stage-1 center row: for each axis (x then z) B bin logits
/// followed by B residuals.
CenterTarget decode_center_row(std::span<const double> row, int num_bins);

// -- reference values -------------------------------------------------------

double seg_loss(std::span<const double> pred, std::span<const double> target, const LossConfig& cfg = {});
/// Cross-entropy over `logits` plus smooth-l1 on residuals[target.bin].
double bin_loss(std::span<const double> logits, std::span<const double> residuals, const BinTarget& target,
                double beta = 1.0);
double center_loss(std::span<const double> row, const CenterTarget& target, int num_bins, double beta = 1.0);
double box_loss(std::span<const double> row, const BoxTarget& target, int theta_bins, double beta = 1.0);
/// smooth-l1(pred, max_gt iou_3d(cuboid, gt)); the target is 0 without gts.
double confidence_loss(double pred, const Cuboid& cuboid, std::span<const Cuboid> gts, double beta = 1.0);
double confidence_target(const Cuboid& cuboid, std::span<const Cuboid> gts);

// -- graph ops (all return the mean over rows) -------------------------------

/// prob: N x 1 probabilities.
nn::Var seg_loss(nn::Var prob, std::vector<double> target, const LossConfig& cfg = {});
/// pred: N x 4B; only `rows` are supervised. Returns a zero constant when
/// `rows` is empty.
nn::Var center_loss(nn::Var pred, std::vector<int> rows, std::vector<CenterTarget> targets, int num_bins,
                    double beta = 1.0);
/// pred: M x (2B + 6); only `rows` are supervised.
nn::Var box_loss(nn::Var pred, std::vector<int> rows, std::vector<BoxTarget> targets, int theta_bins,
                 double beta = 1.0);
/// conf: M x 1.
nn::Var confidence_loss(nn::Var conf, std::vector<double> targets, double beta = 1.0);

}  // namespace ws3d::detector
