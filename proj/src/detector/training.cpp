#include "ws3d/detector/training.hpp"

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "ws3d/detector/augment.hpp"
#include "ws3d/detector/losses.hpp"
#include "ws3d/detector/proposals.hpp"
#include "ws3d/error.hpp"
#include "ws3d/nn/adam.hpp"
#include "ws3d/weak_supervision.hpp"

namespace ws3d::detector {

using nn::Matrix;

std::string format_loss_record(const LossRecord& r) {
    std::string s = fmt::format("{} {} total={:.6f}", r.iteration, r.phase, r.total);
    for (const auto& [name, v] : r.components) s += fmt::format(" {}={:.6f}", name, v);
    return s;
}

PointCloud resample_scene(const PointCloud& cloud, int n, std::mt19937_64& rng) {
    if (cloud.empty()) throw Error("cannot resample an empty scene");
    const auto m = static_cast<int>(cloud.size());
    std::vector<int> pick;
    pick.reserve(static_cast<std::size_t>(n));
    if (m >= n) {
        std::vector<int> all(static_cast<std::size_t>(m));
        std::iota(all.begin(), all.end(), 0);
        for (int i = 0; i < n; ++i) {
            std::uniform_int_distribution<int> d(i, m - 1);
            std::swap(all[static_cast<std::size_t>(i)], all[static_cast<std::size_t>(d(rng))]);
        }
        pick.assign(all.begin(), all.begin() + n);
        std::sort(pick.begin(), pick.end());
    } else {
        for (int i = 0; i < m; ++i) pick.push_back(i);
        std::uniform_int_distribution<int> d(0, m - 1);
        while (static_cast<int>(pick.size()) < n) pick.push_back(d(rng));
    }
    PointCloud out;
    out.points.reserve(static_cast<std::size_t>(n));
    for (int i : pick) out.points.push_back(cloud[static_cast<std::size_t>(i)]);
    return out;
}

namespace {

// Averages per-step records over each log interval and forwards them.
class IntervalLogger {
public:
    IntervalLogger(const LossSink& sink, int every) : sink_(sink), every_(std::max(every, 1)) {}

    void add(const LossRecord& r) {
        if (!sink_) return;
        acc_.push_back(r);
        if (static_cast<int>(acc_.size()) == every_) flush();
    }
    void flush() {
        if (!sink_ || acc_.empty()) return;
        LossRecord avg = acc_.back();
        const double inv = 1.0 / static_cast<double>(acc_.size());
        avg.total = 0.0;
        for (auto& c : avg.components) c.second = 0.0;
        for (const auto& r : acc_) {
            avg.total += r.total * inv;
            for (std::size_t k = 0; k < avg.components.size() && k < r.components.size(); ++k) {
                avg.components[k].second += r.components[k].second * inv;
            }
        }
        sink_(avg);
        acc_.clear();
    }

private:
    const LossSink& sink_;
    int every_;
    std::vector<LossRecord> acc_;
};

// Cycles through a reshuffled index order so every item is seen once per epoch.
class EpochSampler {
public:
    EpochSampler(std::size_t n, std::mt19937_64& rng) : n_(n), rng_(rng) {}
    std::size_t next() {
        if (pos_ == order_.size()) {
            order_.resize(n_);
            std::iota(order_.begin(), order_.end(), std::size_t{0});
            std::shuffle(order_.begin(), order_.end(), rng_);
            pos_ = 0;
        }
        return order_[pos_++];
    }

private:
    std::size_t n_;
    std::mt19937_64& rng_;
    std::vector<std::size_t> order_;
    std::size_t pos_ = 0;
};

struct Stage1Batch {
    Matrix xyz;
    Matrix intensity;
    std::vector<double> fg;
    std::vector<int> rows;
    std::vector<CenterTarget> targets;
};

void append_stage1(Stage1Batch& b, const PointCloud& pts, std::span<const kitti::ClickAnnotation> clicks,
                   const DetectorConfig& cfg, int slot) {
    const int n = cfg.stage1.num_points;
    const auto fg = pseudo_foreground(pts, clicks, cfg.profile.pseudo);
    std::vector<double> best(pts.size(), std::numeric_limits<double>::infinity());
    std::vector<int> owner(pts.size(), -1);
    for (std::size_t c = 0; c < clicks.size(); ++c) {
        for (std::size_t i : select_support_points(pts, clicks[c], fg, cfg.profile.pseudo)) {
            const double d = click_distance(pts[i], clicks[c].x, clicks[c].z, cfg.profile.pseudo);
            if (d < best[i]) {
                best[i] = d;
                owner[i] = static_cast<int>(c);
            }
        }
    }
    for (int i = 0; i < n; ++i) {
        const Point& p = pts[static_cast<std::size_t>(i)];
        const Eigen::Index r = static_cast<Eigen::Index>(slot) * n + i;
        b.xyz.row(r) << p.x, p.y, p.z;
        b.intensity(r, 0) = p.intensity;
        b.fg.push_back(fg[static_cast<std::size_t>(i)]);
        const int o = owner[static_cast<std::size_t>(i)];
        if (o >= 0) {
            b.rows.push_back(static_cast<int>(r));
            b.targets.push_back(encode_center(p, clicks[static_cast<std::size_t>(o)].x,
                                              clicks[static_cast<std::size_t>(o)].z, cfg.stage1.bins));
        }
    }
}

}  // namespace

Stage1Result train_stage1(std::span<const TrainingScene> scenes, const DetectorConfig& cfg, const TrainOptions& opts) {
    if (scenes.empty()) throw Error("train_stage1: empty dataset");
    std::mt19937_64 rng(cfg.train.seed);
    Stage1Result res;
    res.net = std::make_unique<Stage1Net>(cfg.stage1, cfg.train.seed * 7919 + 1);
    auto params = res.net->params();
    nn::AdamState adam{cfg.train.adam, {}, {}, 0};
    const AugmentConfig aug = opts.augment ? cfg.augment : no_augmentation();

    std::vector<InstanceSample> bank;
    if (opts.augment && aug.insert_max > 0) {
        for (const auto& s : scenes) {
            auto inst = collect_instances(s.cloud, s.clicks, cfg.profile.proposal_radius);
            bank.insert(bank.end(), std::make_move_iterator(inst.begin()), std::make_move_iterator(inst.end()));
        }
    }

    const int n = cfg.stage1.num_points;
    const int batch = std::max(1, std::min<int>(cfg.train.stage1_batch, static_cast<int>(scenes.size())));
    EpochSampler sampler(scenes.size(), rng);
    IntervalLogger logger(opts.sink, cfg.train.log_every);
    for (int it = 0; it < cfg.train.stage1_iterations; ++it) {
        Stage1Batch b;
        b.xyz.resize(static_cast<Eigen::Index>(batch) * n, 3);
        b.intensity.resize(static_cast<Eigen::Index>(batch) * n, 1);
        for (int k = 0; k < batch; ++k) {
            const TrainingScene& s = scenes[sampler.next()];
            const auto a = augment_scene(s.cloud, s.clicks, {}, aug, bank, cfg.profile.proposal_radius, rng);
            const PointCloud pts = resample_scene(a.cloud, n, rng);
            append_stage1(b, pts, a.clicks, cfg, k);
        }
        nn::Graph g;
        const auto out = res.net->forward(g, b.xyz, b.intensity, batch);
        const auto seg = seg_loss(out.fg_prob, std::move(b.fg), cfg.loss);
        const auto cen = center_loss(out.center, std::move(b.rows), std::move(b.targets), cfg.stage1.bins.num_bins,
                                     cfg.loss.smooth_l1_beta);
        const auto total = nn::add(seg, nn::scale(cen, cfg.loss.center_weight));
        g.backward(total);
        nn::adam_step(params, adam);
        LossRecord r{"stage1", it + 1, total.scalar(), {{"seg", seg.scalar()}, {"center", cen.scalar()}}};
        res.per_step.push_back(r);
        logger.add(r);
    }
    logger.flush();
    return res;
}

Stage1Scene run_stage1(Stage1Net& net, const PointCloud& cloud, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    Stage1Scene out;
    out.points = resample_scene(cloud, net.config().num_points, rng);
    const auto n = static_cast<Eigen::Index>(out.points.size());
    Matrix xyz(n, 3);
    Matrix inten(n, 1);
    for (Eigen::Index i = 0; i < n; ++i) {
        const Point& p = out.points[static_cast<std::size_t>(i)];
        xyz.row(i) << p.x, p.y, p.z;
        inten(i, 0) = p.intensity;
    }
    nn::Graph g;
    const auto o = net.forward(g, xyz, inten, 1);
    const Matrix& f = o.fg_prob.value();
    out.fg.assign(f.data(), f.data() + f.size());
    out.center = o.center.value();
    return out;
}

std::vector<ProposalSample> select_training_proposals(std::span<const CylinderProposal> proposals,
                                                      std::span<const Cuboid> precise, std::size_t scene,
                                                      double match_distance, int per_gt, std::mt19937_64& rng) {
    std::vector<ProposalSample> out;
    const double d2 = match_distance * match_distance;
    for (const Cuboid& gt : precise) {
        std::vector<std::size_t> near;
        for (std::size_t i = 0; i < proposals.size(); ++i) {
            const double dx = proposals[i].cx - gt.cx;
            const double dz = proposals[i].cz - gt.cz;
            if (dx * dx + dz * dz < d2) near.push_back(i);
        }
        if (per_gt > 0 && static_cast<int>(near.size()) > per_gt) {
            for (int k = 0; k < per_gt; ++k) {
                std::uniform_int_distribution<std::size_t> d(static_cast<std::size_t>(k), near.size() - 1);
                std::swap(near[static_cast<std::size_t>(k)], near[d(rng)]);
            }
            near.resize(static_cast<std::size_t>(per_gt));
            std::sort(near.begin(), near.end());
        }
        for (std::size_t i : near) out.push_back({scene, proposals[i], gt});
    }
    return out;
}

Stage2Result train_stage2(std::span<const TrainingScene> scenes, Stage1Net& stage1, const DetectorConfig& cfg,
                          const TrainOptions& opts) {
    if (scenes.empty()) throw Error("train_stage2: empty dataset");
    std::mt19937_64 rng(cfg.train.seed ^ 0x5eedULL);
    std::vector<Stage1Scene> scored;
    std::vector<ProposalSample> samples;
    std::size_t negatives = 0;
    for (std::size_t si = 0; si < scenes.size(); ++si) {
        const TrainingScene& s = scenes[si];
        scored.push_back(run_stage1(stage1, s.cloud, si));
        const auto props = generate_proposals(scored.back().points, scored.back().fg, scored.back().center,
                                              cfg.stage1, cfg.profile);
        auto pos = select_training_proposals(props, s.precise, si, cfg.profile.gt_match_distance,
                                             cfg.train.proposals_per_gt, rng);
        // a precise GT that stage-1 missed falls back to its click, when close enough
        for (const Cuboid& gt : s.precise) {
            const bool covered = std::any_of(pos.begin(), pos.end(), [&](const ProposalSample& p) {
                return p.gt->cx == gt.cx && p.gt->cz == gt.cz;
            });
            if (covered) continue;
            for (const auto& c : s.clicks) {
                if (std::hypot(c.x - gt.cx, c.z - gt.cz) < cfg.profile.gt_match_distance) {
                    pos.push_back({si, {c.x, c.z, cfg.profile.proposal_radius, 1.0}, gt});
                    break;
                }
            }
        }
        samples.insert(samples.end(), pos.begin(), pos.end());
        int neg = 0;
        for (const auto& p : ca_nms(props, cfg.profile.proposal_radius)) {
            if (neg >= cfg.train.negatives_per_scene) break;
            const bool far = std::all_of(s.clicks.begin(), s.clicks.end(), [&](const auto& c) {
                return std::hypot(c.x - p.cx, c.z - p.cz) > cfg.profile.proposal_radius;
            });
            if (far) {
                samples.push_back({si, p, std::nullopt});
                ++neg;
            }
        }
        negatives += static_cast<std::size_t>(neg);
    }
    spdlog::info("stage-2 samples: {} positive, {} background", samples.size() - negatives, negatives);
    return train_stage2_samples(scored, samples, cfg, opts);
}

namespace {

constexpr int kPredictChunk = 64;

// Fixed-seed crops keep inference-time predictions reproducible.
std::vector<Cuboid> predict_initial(Stage2Net& net, std::span<const Stage1Scene> scored,
                                    std::span<const ProposalSample> samples, const DetectorConfig& cfg) {
    std::vector<Cuboid> out(samples.size());
    const int n = cfg.stage2.num_points;
    for (std::size_t start = 0; start < samples.size(); start += kPredictChunk) {
        const std::size_t end = std::min(samples.size(), start + kPredictChunk);
        std::vector<std::size_t> ids;
        Matrix block(static_cast<Eigen::Index>(end - start) * n, 5);
        for (std::size_t i = start; i < end; ++i) {
            const auto& s = samples[i];
            Matrix rows = cylinder_rows(scored[s.scene].points, scored[s.scene].fg, s.proposal);
            if (rows.rows() == 0) {
                out[i] = Cuboid{s.proposal.cx, 0.0, s.proposal.cz, cfg.profile.anchor.h, cfg.profile.anchor.w,
                                cfg.profile.anchor.l, 0.0};
                continue;
            }
            std::mt19937_64 rng(i);
            block.middleRows(static_cast<Eigen::Index>(ids.size()) * n, n) = resample_rows(rows, n, rng);
            ids.push_back(i);
        }
        if (ids.empty()) continue;
        nn::Graph g;
        const auto o = net.forward(g, block.topRows(static_cast<Eigen::Index>(ids.size()) * n),
                                   static_cast<int>(ids.size()));
        const Matrix& v = o.box.value();
        for (std::size_t k = 0; k < ids.size(); ++k) {
            const auto row = std::span<const double>(v.data() + static_cast<Eigen::Index>(k) * v.cols(),
                                                     static_cast<std::size_t>(v.cols()));
            const Cuboid local = decode_box(row, cfg.profile.anchor, cfg.stage2.theta_bins);
            out[ids[k]] = frame_of(samples[ids[k]].proposal).to_world(local);
        }
    }
    return out;
}

}  // namespace

Stage2Result train_stage2_samples(std::span<const Stage1Scene> scored, std::span<const ProposalSample> samples,
                                  const DetectorConfig& cfg, const TrainOptions& opts) {
    std::vector<std::size_t> positives;
    for (std::size_t i = 0; i < samples.size(); ++i)
        if (samples[i].gt) positives.push_back(i);
    if (positives.empty()) throw Error("train_stage2: no proposal matches a precise instance");

    const std::uint64_t seed = cfg.train.seed;
    std::mt19937_64 rng(seed * 31 + 17);
    const int n = cfg.stage2.num_points;
    const int tb = cfg.stage2.theta_bins;
    const double beta = cfg.loss.smooth_l1_beta;
    const Cuboid& anchor = cfg.profile.anchor;
    AugmentConfig aug = opts.augment ? cfg.augment : no_augmentation();
    IntervalLogger logger(opts.sink, cfg.train.log_every);

    Stage2Result res;
    res.initial = std::make_unique<Stage2Net>(cfg.stage2, false, "initial", seed * 7919 + 2);
    {
        auto params = res.initial->params();
        nn::AdamState adam{cfg.train.adam, {}, {}, 0};
        EpochSampler sampler(positives.size(), rng);
        const int batch = std::max(1, cfg.train.stage2_batch);
        for (int it = 0; it < cfg.train.stage2_iterations; ++it) {
            Matrix block(static_cast<Eigen::Index>(batch) * n, 5);
            std::vector<int> rows;
            std::vector<BoxTarget> targets;
            for (int k = 0; k < batch; ++k) {
                const ProposalSample& s = samples[positives[sampler.next()]];
                const Stage1Scene& sc = scored[s.scene];
                CylinderProposal prop = s.proposal;
                const Vec2 j = draw_jitter(aug, rng);
                prop.cx += j.x;
                prop.cz += j.z;
                Matrix crop = cylinder_rows(sc.points, sc.fg, prop);
                if (crop.rows() == 0) {
                    prop = s.proposal;
                    crop = cylinder_rows(sc.points, sc.fg, prop);
                }
                if (crop.rows() == 0) continue;
                std::optional<Cuboid> gt = frame_of(prop).to_local(*s.gt);
                crop = augment_proposal(crop, gt, aug, rng);
                const int slot = static_cast<int>(rows.size());
                block.middleRows(static_cast<Eigen::Index>(slot) * n, n) = resample_rows(crop, n, rng);
                rows.push_back(slot);
                targets.push_back(encode_box(*gt, anchor, tb));
            }
            if (rows.empty()) continue;
            const int used = static_cast<int>(rows.size());
            nn::Graph g;
            const auto o = res.initial->forward(g, block.topRows(static_cast<Eigen::Index>(used) * n), used);
            const auto loss = box_loss(o.box, std::move(rows), std::move(targets), tb, beta);
            g.backward(loss);
            nn::adam_step(params, adam);
            LossRecord r{"initial", it + 1, loss.scalar(), {{"box", loss.scalar()}}};
            res.per_step.push_back(r);
            logger.add(r);
        }
        logger.flush();
    }

    const std::vector<Cuboid> initial = predict_initial(*res.initial, scored, samples, cfg);

    // Refinement sees boxes that are already roughly aligned, so the yaw
    // augmentation is narrowed.
    AugmentConfig raug = aug;
    raug.proposal_yaw_deg = std::min(raug.proposal_yaw_deg, 10.0);
    res.refine = std::make_unique<Stage2Net>(cfg.stage2, true, "refine", seed * 7919 + 3);
    {
        auto params = res.refine->params();
        nn::AdamState adam{cfg.train.adam, {}, {}, 0};
        EpochSampler sampler(samples.size(), rng);
        const int batch = std::max(1, cfg.train.stage2_batch);
        for (int it = 0; it < cfg.train.stage2_iterations; ++it) {
            Matrix block(static_cast<Eigen::Index>(batch) * n, 5);
            std::vector<int> rows;
            std::vector<BoxTarget> targets;
            std::vector<std::optional<Cuboid>> gts;
            for (int k = 0; k < batch; ++k) {
                const std::size_t idx = sampler.next();
                const ProposalSample& s = samples[idx];
                const Stage1Scene& sc = scored[s.scene];
                Cuboid box = initial[idx];
                const Vec2 j = draw_jitter(aug, rng);
                box.cx += j.x;
                box.cz += j.z;
                Matrix crop = cuboid_rows(sc.points, sc.fg, box, cfg.stage2.cuboid_margin);
                if (crop.rows() == 0) {
                    box = initial[idx];
                    crop = cuboid_rows(sc.points, sc.fg, box, cfg.stage2.cuboid_margin);
                }
                if (crop.rows() == 0) continue;
                std::optional<Cuboid> gt;
                if (s.gt) gt = frame_of(box).to_local(*s.gt);
                crop = augment_proposal(crop, gt, raug, rng);
                const int slot = static_cast<int>(gts.size());
                block.middleRows(static_cast<Eigen::Index>(slot) * n, n) = resample_rows(crop, n, rng);
                if (gt) {
                    rows.push_back(slot);
                    targets.push_back(encode_box(*gt, anchor, tb));
                }
                gts.push_back(gt);
            }
            if (gts.empty()) continue;
            const int used = static_cast<int>(gts.size());
            nn::Graph g;
            const auto o = res.refine->forward(g, block.topRows(static_cast<Eigen::Index>(used) * n), used);
            const Matrix& pv = o.box.value();
            std::vector<double> conf_t(gts.size(), 0.0);
            for (std::size_t k = 0; k < gts.size(); ++k) {
                if (!gts[k]) continue;
                const auto row = std::span<const double>(pv.data() + static_cast<Eigen::Index>(k) * pv.cols(),
                                                         static_cast<std::size_t>(pv.cols()));
                conf_t[k] = iou_3d(decode_box(row, anchor, tb), *gts[k]);
            }
            const auto lb = box_loss(o.box, std::move(rows), std::move(targets), tb, beta);
            const auto lc = confidence_loss(*o.conf, std::move(conf_t), beta);
            const auto total = nn::add(lb, lc);
            g.backward(total);
            nn::adam_step(params, adam);
            LossRecord r{"refine", it + 1, total.scalar(), {{"box", lb.scalar()}, {"conf", lc.scalar()}}};
            res.per_step.push_back(r);
            logger.add(r);
        }
        logger.flush();
    }
    return res;
}

}  // namespace ws3d::detector
