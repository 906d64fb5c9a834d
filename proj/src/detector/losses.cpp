#include "ws3d/detector/losses.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>

#include "ws3d/error.hpp"

namespace ws3d::detector {

using nn::Matrix;
using nn::Var;

namespace {

constexpr double kLogFloor = 1e-12;

double focal_term(double p, double f, const LossConfig& cfg) {
    const double fh = p * f + (1.0 - p) * (1.0 - f);
    return -cfg.focal_alpha * std::pow(1.0 - fh, cfg.focal_gamma) * std::log(std::max(fh, kLogFloor));
}

// d focal_term / d p
double focal_grad(double p, double f, const LossConfig& cfg) {
    const double fh = p * f + (1.0 - p) * (1.0 - f);
    const double q = 1.0 - fh;
    const double logf = std::log(std::max(fh, kLogFloor));
    double d = 0.0;  // d/d fh of (1-fh)^g log fh
    if (q > 0.0 && cfg.focal_gamma > 0.0) d -= cfg.focal_gamma * std::pow(q, cfg.focal_gamma - 1.0) * logf;
    if (fh > kLogFloor) d += std::pow(q, cfg.focal_gamma) / fh;
    return -cfg.focal_alpha * d * (2.0 * f - 1.0);
}

// Cross-entropy + residual smooth-l1 of one axis block; optionally writes
// the gradient (scaled by g) into `grad`.
double bin_axis(const double* logits, const double* res, int nb, const BinTarget& t, double beta, double g,
                double* glogits, double* gres) {
    if (t.bin < 0 || t.bin >= nb) throw Error(fmt::format("bin target {} outside [0, {})", t.bin, nb));
    const double mx = *std::max_element(logits, logits + nb);
    double z = 0.0;
    for (int k = 0; k < nb; ++k) z += std::exp(logits[k] - mx);
    const double lse = mx + std::log(z);
    const double diff = res[t.bin] - t.residual;
    if (glogits) {
        for (int k = 0; k < nb; ++k) glogits[k] += g * (std::exp(logits[k] - lse) - (k == t.bin ? 1.0 : 0.0));
        gres[t.bin] += g * smooth_l1_grad(diff, beta);
    }
    return (lse - logits[t.bin]) + smooth_l1(diff, beta);
}

void check_rows(const Matrix& v, const std::vector<int>& rows, std::size_t targets, int cols, const char* what) {
    if (v.cols() != cols) throw ShapeError(fmt::format("{}: expected {} columns, got {}", what, cols, v.cols()));
    if (rows.size() != targets) throw ShapeError(fmt::format("{}: {} rows but {} targets", what, rows.size(), targets));
    for (int r : rows) {
        if (r < 0 || r >= v.rows()) throw ShapeError(fmt::format("{}: row {} out of range", what, r));
    }
}

Var zero_like(Var x) { return x.graph->constant(Matrix::Zero(1, 1)); }

}  // namespace

double smooth_l1(double x, double beta) {
    const double a = std::abs(x);
    return a < beta ? 0.5 * x * x / beta : a - 0.5 * beta;
}

double smooth_l1_grad(double x, double beta) {
    if (std::abs(x) < beta) return x / beta;
    return x > 0.0 ? 1.0 : -1.0;
}

BinTarget encode_theta(double theta, int num_bins) {
    const double width = 2.0 * kPi / num_bins;
    const double t = normalize_angle(theta) + kPi;  // [0, 2pi)
    int b = static_cast<int>(std::floor(t / width));
    b = std::clamp(b, 0, num_bins - 1);
    return {b, (t - (b * width + 0.5 * width)) / (0.5 * width)};
}

double decode_theta(int bin, double residual, int num_bins) {
    const double width = 2.0 * kPi / num_bins;
    return normalize_angle(-kPi + bin * width + 0.5 * width + residual * 0.5 * width);
}

BoxTarget encode_box(const Cuboid& gt, const Cuboid& anchor, int theta_bins) {
    BoxTarget t;
    t.theta = encode_theta(gt.theta, theta_bins);
    t.reg = {gt.cx, gt.cy, gt.cz, gt.h - anchor.h, gt.w - anchor.w, gt.l - anchor.l};
    return t;
}

Cuboid decode_box(std::span<const double> row, const Cuboid& anchor, int theta_bins) {
    const auto nb = static_cast<std::size_t>(theta_bins);
    if (row.size() != 2 * nb + 6) throw ShapeError("decode_box: row width does not match the theta bins");
    const auto best = static_cast<int>(std::max_element(row.begin(), row.begin() + theta_bins) - row.begin());
    const double* r = row.data() + 2 * nb;
    Cuboid c;
    c.cx = r[0];
    c.cy = r[1];
    c.cz = r[2];
    c.h = std::max(anchor.h + r[3], 0.01);
    c.w = std::max(anchor.w + r[4], 0.01);
    c.l = std::max(anchor.l + r[5], 0.01);
    c.theta = decode_theta(best, row[nb + static_cast<std::size_t>(best)], theta_bins);
    return c;
}

CenterTarget decode_center_row(std::span<const double> row, int num_bins) {
    const auto nb = static_cast<std::size_t>(num_bins);
    if (row.size() != 4 * nb) throw ShapeError("decode_center_row: row width does not match the bins");
    auto axis = [&](std::size_t off, int& bin, double& res) {
        bin = static_cast<int>(std::max_element(row.begin() + static_cast<long>(off),
                                                row.begin() + static_cast<long>(off + nb)) -
                               (row.begin() + static_cast<long>(off)));
        res = row[off + nb + static_cast<std::size_t>(bin)];
    };
    CenterTarget t;
    axis(0, t.bin_x, t.res_x);
    axis(2 * nb, t.bin_z, t.res_z);
    return t;
}

// -- reference values --------------------------------------------------------

double seg_loss(std::span<const double> pred, std::span<const double> target, const LossConfig& cfg) {
    if (pred.size() != target.size()) throw ShapeError("seg_loss: prediction and target sizes differ");
    if (pred.empty()) return 0.0;
    double s = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) s += focal_term(pred[i], target[i], cfg);
    return s / static_cast<double>(pred.size());
}

double bin_loss(std::span<const double> logits, std::span<const double> residuals, const BinTarget& target,
                double beta) {
    if (logits.size() != residuals.size()) throw ShapeError("bin_loss: logits and residuals differ in size");
    return bin_axis(logits.data(), residuals.data(), static_cast<int>(logits.size()), target, beta, 0.0, nullptr,
                    nullptr);
}

double center_loss(std::span<const double> row, const CenterTarget& t, int nb, double beta) {
    if (row.size() != 4 * static_cast<std::size_t>(nb)) throw ShapeError("center_loss: row width mismatch");
    const double* p = row.data();
    return bin_axis(p, p + nb, nb, {t.bin_x, t.res_x}, beta, 0.0, nullptr, nullptr) +
           bin_axis(p + 2 * nb, p + 3 * nb, nb, {t.bin_z, t.res_z}, beta, 0.0, nullptr, nullptr);
}

double box_loss(std::span<const double> row, const BoxTarget& t, int nb, double beta) {
    if (row.size() != 2 * static_cast<std::size_t>(nb) + 6) throw ShapeError("box_loss: row width mismatch");
    double s = bin_axis(row.data(), row.data() + nb, nb, t.theta, beta, 0.0, nullptr, nullptr);
    for (int k = 0; k < 6; ++k) s += smooth_l1(row[static_cast<std::size_t>(2 * nb + k)] - t.reg[static_cast<std::size_t>(k)], beta);
    return s;
}

double confidence_target(const Cuboid& cuboid, std::span<const Cuboid> gts) {
    double best = 0.0;
    for (const auto& g : gts) best = std::max(best, iou_3d(cuboid, g));
    return best;
}

double confidence_loss(double pred, const Cuboid& cuboid, std::span<const Cuboid> gts, double beta) {
    return smooth_l1(pred - confidence_target(cuboid, gts), beta);
}

// -- graph ops ---------------------------------------------------------------

Var seg_loss(Var prob, std::vector<double> target, const LossConfig& cfg) {
    const Matrix& p = prob.value();
    if (p.cols() != 1 || static_cast<std::size_t>(p.rows()) != target.size()) {
        throw ShapeError(fmt::format("seg_loss: {}x{} prediction for {} targets", p.rows(), p.cols(), target.size()));
    }
    if (target.empty()) return zero_like(prob);
    const double inv = 1.0 / static_cast<double>(target.size());
    double s = 0.0;
    for (Eigen::Index i = 0; i < p.rows(); ++i) s += focal_term(p(i, 0), target[static_cast<std::size_t>(i)], cfg);
    Matrix out(1, 1);
    out(0, 0) = s * inv;
    return prob.graph->op({prob}, std::move(out),
                          [target = std::move(target), cfg, inv](const Matrix& og, auto pv, auto pg) {
                              if (!pg[0]) return;
                              const Matrix& pp = *pv[0];
                              const double g = og(0, 0) * inv;
                              for (Eigen::Index i = 0; i < pp.rows(); ++i) {
                                  (*pg[0])(i, 0) += g * focal_grad(pp(i, 0), target[static_cast<std::size_t>(i)], cfg);
                              }
                          });
}

Var center_loss(Var pred, std::vector<int> rows, std::vector<CenterTarget> targets, int nb, double beta) {
    check_rows(pred.value(), rows, targets.size(), 4 * nb, "center_loss");
    if (rows.empty()) return zero_like(pred);
    const double inv = 1.0 / static_cast<double>(rows.size());
    auto eval = [=](const Matrix& p, const std::vector<int>& rs, const std::vector<CenterTarget>& ts, double g,
                    Matrix* grad) {
        double s = 0.0;
        for (std::size_t i = 0; i < rs.size(); ++i) {
            const double* r = p.data() + static_cast<Eigen::Index>(rs[i]) * p.cols();
            double* gr = grad ? grad->data() + static_cast<Eigen::Index>(rs[i]) * grad->cols() : nullptr;
            const CenterTarget& t = ts[i];
            s += bin_axis(r, r + nb, nb, {t.bin_x, t.res_x}, beta, g, gr, gr ? gr + nb : nullptr);
            s += bin_axis(r + 2 * nb, r + 3 * nb, nb, {t.bin_z, t.res_z}, beta, g, gr ? gr + 2 * nb : nullptr,
                          gr ? gr + 3 * nb : nullptr);
        }
        return s;
    };
    Matrix out(1, 1);
    out(0, 0) = eval(pred.value(), rows, targets, 0.0, nullptr) * inv;
    return pred.graph->op({pred}, std::move(out),
                          [rows = std::move(rows), targets = std::move(targets), eval, inv](const Matrix& og,
                                                                                            auto pv, auto pg) {
                              if (pg[0]) eval(*pv[0], rows, targets, og(0, 0) * inv, pg[0]);
                          });
}

Var box_loss(Var pred, std::vector<int> rows, std::vector<BoxTarget> targets, int nb, double beta) {
    check_rows(pred.value(), rows, targets.size(), 2 * nb + 6, "box_loss");
    if (rows.empty()) return zero_like(pred);
    const double inv = 1.0 / static_cast<double>(rows.size());
    auto eval = [=](const Matrix& p, const std::vector<int>& rs, const std::vector<BoxTarget>& ts, double g,
                    Matrix* grad) {
        double s = 0.0;
        for (std::size_t i = 0; i < rs.size(); ++i) {
            const double* r = p.data() + static_cast<Eigen::Index>(rs[i]) * p.cols();
            double* gr = grad ? grad->data() + static_cast<Eigen::Index>(rs[i]) * grad->cols() : nullptr;
            s += bin_axis(r, r + nb, nb, ts[i].theta, beta, g, gr, gr ? gr + nb : nullptr);
            for (int k = 0; k < 6; ++k) {
                const double d = r[2 * nb + k] - ts[i].reg[static_cast<std::size_t>(k)];
                s += smooth_l1(d, beta);
                if (gr) gr[2 * nb + k] += g * smooth_l1_grad(d, beta);
            }
        }
        return s;
    };
    Matrix out(1, 1);
    out(0, 0) = eval(pred.value(), rows, targets, 0.0, nullptr) * inv;
    return pred.graph->op({pred}, std::move(out),
                          [rows = std::move(rows), targets = std::move(targets), eval, inv](const Matrix& og,
                                                                                            auto pv, auto pg) {
                              if (pg[0]) eval(*pv[0], rows, targets, og(0, 0) * inv, pg[0]);
                          });
}

Var confidence_loss(Var conf, std::vector<double> targets, double beta) {
    const Matrix& c = conf.value();
    if (c.cols() != 1 || static_cast<std::size_t>(c.rows()) != targets.size()) {
        throw ShapeError("confidence_loss: prediction and target sizes differ");
    }
    if (targets.empty()) return zero_like(conf);
    const double inv = 1.0 / static_cast<double>(targets.size());
    double s = 0.0;
    for (Eigen::Index i = 0; i < c.rows(); ++i) s += smooth_l1(c(i, 0) - targets[static_cast<std::size_t>(i)], beta);
    Matrix out(1, 1);
    out(0, 0) = s * inv;
    return conf.graph->op({conf}, std::move(out),
                          [targets = std::move(targets), beta, inv](const Matrix& og, auto pv, auto pg) {
                              if (!pg[0]) return;
                              const Matrix& cc = *pv[0];
                              for (Eigen::Index i = 0; i < cc.rows(); ++i) {
                                  (*pg[0])(i, 0) += og(0, 0) * inv *
                                                    smooth_l1_grad(cc(i, 0) - targets[static_cast<std::size_t>(i)], beta);
                              }
                          });
}

}  // namespace ws3d::detector
