#include "ws3d/detector/inference.hpp"

#include <json.hpp>

#include "ws3d/detector/losses.hpp"
#include "ws3d/detector/proposals.hpp"
#include "ws3d/detector/training.hpp"
#include "ws3d/error.hpp"
#include "ws3d/nn/checkpoint.hpp"
#include "ws3d/weak_supervision.hpp"

namespace ws3d::detector {

using nn::Matrix;

namespace {

constexpr int kChunk = 64;

std::string meta_for(const DetectorConfig& cfg, const char* kind) {
    nlohmann::json j;
    j["kind"] = kind;
    j["config"] = nlohmann::json::parse(cfg.to_json());
    return j.dump();
}

DetectorConfig config_from(const nn::Checkpoint& c, const char* kind) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(c.meta);
    } catch (const nlohmann::json::exception&) {
        throw Error("checkpoint metadata is not JSON");
    }
    if (j.value("kind", std::string{}) != kind) {
        throw Error(std::string("checkpoint is not a ") + kind + " checkpoint");
    }
    return DetectorConfig::from_json(j.at("config").dump());
}

}  // namespace

std::vector<Vec2> active_grid(double x, double z, int half, double step) {
    std::vector<Vec2> out;
    for (int i = -half; i <= half; ++i) {
        for (int k = -half; k <= half; ++k) out.push_back({x + i * step, z + k * step});
    }
    return out;
}

Detector::Detector(DetectorConfig cfg) : cfg_(std::move(cfg)) {}

void Detector::set_stage2(std::unique_ptr<Stage2Net> initial, std::unique_ptr<Stage2Net> refine) {
    initial_ = std::move(initial);
    refine_ = std::move(refine);
}

void Detector::save_stage1(const std::filesystem::path& path, Stage1Net& net, const DetectorConfig& cfg) {
    const auto params = net.params();
    nn::save_checkpoint(path, nn::to_checkpoint(params, meta_for(cfg, "stage1")));
}

void Detector::save_stage2(const std::filesystem::path& path, Stage2Net& initial, Stage2Net& refine,
                           const DetectorConfig& cfg) {
    auto params = initial.params();
    const auto more = refine.params();
    params.insert(params.end(), more.begin(), more.end());
    nn::save_checkpoint(path, nn::to_checkpoint(params, meta_for(cfg, "stage2")));
}

std::unique_ptr<Stage1Net> Detector::load_stage1(const std::filesystem::path& path, DetectorConfig* cfg_out) {
    const auto ckpt = nn::load_checkpoint(path);
    const auto cfg = config_from(ckpt, "stage1");
    auto net = std::make_unique<Stage1Net>(cfg.stage1, 0);
    nn::restore(net->params(), ckpt);
    if (cfg_out) *cfg_out = cfg;
    return net;
}

std::pair<std::unique_ptr<Stage2Net>, std::unique_ptr<Stage2Net>> Detector::load_stage2(
    const std::filesystem::path& path, DetectorConfig* cfg_out) {
    const auto ckpt = nn::load_checkpoint(path);
    const auto cfg = config_from(ckpt, "stage2");
    auto initial = std::make_unique<Stage2Net>(cfg.stage2, false, "initial", 0);
    auto refine = std::make_unique<Stage2Net>(cfg.stage2, true, "refine", 0);
    nn::restore(initial->params(), ckpt);
    nn::restore(refine->params(), ckpt);
    if (cfg_out) *cfg_out = cfg;
    return {std::move(initial), std::move(refine)};
}

Detector Detector::load(const std::filesystem::path& stage1, const std::filesystem::path& stage2) {
    DetectorConfig c1;
    DetectorConfig c2;
    auto s1 = load_stage1(stage1, &c1);
    auto [a, b] = load_stage2(stage2, &c2);
    c2.stage1 = c1.stage1;
    Detector d(c2);
    d.set_stage1(std::move(s1));
    d.set_stage2(std::move(a), std::move(b));
    return d;
}

Detector Detector::load_stage2_only(const std::filesystem::path& stage2) {
    DetectorConfig c;
    auto [a, b] = load_stage2(stage2, &c);
    Detector d(c);
    d.set_stage2(std::move(a), std::move(b));
    return d;
}

std::vector<std::optional<Detection>> Detector::predict_cylinders(const PointCloud& points, std::span<const double> fg,
                                                                  std::span<const CylinderProposal> props) const {
    if (!has_stage2()) throw Error("detector has no stage-2 networks loaded");
    const int n = cfg_.stage2.num_points;
    const int tb = cfg_.stage2.theta_bins;
    const Cuboid& anchor = cfg_.profile.anchor;
    std::vector<std::optional<Detection>> out(props.size());

    for (std::size_t start = 0; start < props.size(); start += kChunk) {
        const std::size_t end = std::min(props.size(), start + kChunk);
        // initial cuboids
        std::vector<std::size_t> ids;
        Matrix block(static_cast<Eigen::Index>(end - start) * n, 5);
        for (std::size_t i = start; i < end; ++i) {
            Matrix rows = cylinder_rows(points, fg, props[i]);
            if (rows.rows() == 0) continue;
            std::mt19937_64 rng(i);
            block.middleRows(static_cast<Eigen::Index>(ids.size()) * n, n) = resample_rows(rows, n, rng);
            ids.push_back(i);
        }
        if (ids.empty()) continue;
        std::vector<Cuboid> initial(ids.size());
        {
            nn::Graph g;
            const auto o = initial_->forward(g, block.topRows(static_cast<Eigen::Index>(ids.size()) * n),
                                             static_cast<int>(ids.size()));
            const Matrix& v = o.box.value();
            for (std::size_t k = 0; k < ids.size(); ++k) {
                const auto row = std::span<const double>(v.data() + static_cast<Eigen::Index>(k) * v.cols(),
                                                         static_cast<std::size_t>(v.cols()));
                initial[k] = frame_of(props[ids[k]]).to_world(decode_box(row, anchor, tb));
            }
        }
        // refinement over the re-canonicalized cuboid crops
        std::vector<std::size_t> rk;
        for (std::size_t k = 0; k < ids.size(); ++k) {
            Matrix rows = cuboid_rows(points, fg, initial[k], cfg_.stage2.cuboid_margin);
            if (rows.rows() == 0) {
                out[ids[k]] = Detection{initial[k], 0.0};
                continue;
            }
            std::mt19937_64 rng(ids[k] + 1000003);
            block.middleRows(static_cast<Eigen::Index>(rk.size()) * n, n) = resample_rows(rows, n, rng);
            rk.push_back(k);
        }
        if (rk.empty()) continue;
        nn::Graph g;
        const auto o = refine_->forward(g, block.topRows(static_cast<Eigen::Index>(rk.size()) * n),
                                        static_cast<int>(rk.size()));
        const Matrix& v = o.box.value();
        const Matrix& c = o.conf->value();
        for (std::size_t j = 0; j < rk.size(); ++j) {
            const auto row = std::span<const double>(v.data() + static_cast<Eigen::Index>(j) * v.cols(),
                                                     static_cast<std::size_t>(v.cols()));
            const Cuboid& base = initial[rk[j]];
            out[ids[rk[j]]] = Detection{frame_of(base).to_world(decode_box(row, anchor, tb)), c(static_cast<Eigen::Index>(j), 0)};
        }
    }
    return out;
}

std::vector<Detection> Detector::infer_scene(const PointCloud& scene) const {
    if (!has_stage1()) throw Error("detector has no stage-1 network loaded");
    if (scene.empty()) return {};
    const Stage1Scene s = run_stage1(*stage1_, scene, 0);
    const auto props = generate_proposals(s.points, s.fg, s.center, cfg_.stage1, cfg_.profile);
    const auto kept = ca_nms(props, cfg_.profile.proposal_radius);
    if (kept.empty()) return {};
    const auto preds = predict_cylinders(s.points, s.fg, kept);
    std::vector<Cuboid> boxes;
    std::vector<double> conf;
    for (const auto& p : preds) {
        if (!p) continue;
        boxes.push_back(p->box);
        conf.push_back(p->confidence);
    }
    std::vector<Detection> out;
    for (std::size_t i : oriented_nms(boxes, conf, 0.3)) out.push_back({boxes[i], conf[i]});
    return out;
}

ActiveResult Detector::active_annotate(const PointCloud& scene, double x, double z) const {
    ActiveResult res;
    res.candidates = active_grid(x, z);
    std::vector<CylinderProposal> props;
    for (const auto& c : res.candidates) props.push_back({c.x, c.z, cfg_.profile.proposal_radius, 1.0});

    // stage-2 was trained on scenes thinned to the stage-1 sample size
    PointCloud pts = scene;
    if (!scene.empty() && static_cast<int>(scene.size()) > cfg_.stage1.num_points) {
        std::mt19937_64 rng(0);
        pts = resample_scene(scene, cfg_.stage1.num_points, rng);
    }
    // one pseudo mask per candidate center
    std::vector<std::optional<Detection>> preds;
    for (const auto& p : props) {
        const kitti::ClickAnnotation c{cfg_.profile.cls, p.cx, p.cz};
        const auto fg = pseudo_foreground(pts, std::span<const kitti::ClickAnnotation>(&c, 1), cfg_.profile.pseudo);
        auto one = predict_cylinders(pts, fg, std::span<const CylinderProposal>(&p, 1));
        preds.push_back(one.front());
    }
    std::optional<std::size_t> best;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        if (preds[i]) {
            res.candidate_conf.push_back(preds[i]->confidence);
            if (!best || preds[i]->confidence > preds[*best]->confidence) best = i;
        } else {
            res.candidate_conf.push_back(std::nullopt);
        }
    }
    if (!best) throw EmptyProposal("no points within any of the 25 candidate cylinders");
    res.box = preds[*best]->box;
    res.confidence = preds[*best]->confidence;
    return res;
}

}  // namespace ws3d::detector
