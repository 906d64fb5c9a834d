#include "ws3d/evalkit.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <numeric>

#include "ws3d/error.hpp"

namespace ws3d::eval {

double overlap(const Cuboid& a, const Cuboid& b, IouKind kind) {
    return kind == IouKind::Bev ? bev_iou(a, b) : iou_3d(a, b);
}

MatchResult match_detections(std::span<const Detection> dets, std::span<const GtBox> gts, const EvalConfig& cfg) {
    const auto r = static_cast<std::size_t>(cfg.regime);
    MatchResult res;
    res.det.assign(dets.size(), DetFlag::FalsePositive);
    res.gt_matched.assign(gts.size(), false);
    for (const auto& g : gts)
        if (!g.dont_care && g.regimes[r]) ++res.num_gt;

    std::vector<std::size_t> order(dets.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return dets[a].confidence > dets[b].confidence; });

    for (std::size_t di : order) {
        const Cuboid& d = dets[di].box;
        // best unmatched GT of the regime
        double best = -1.0;
        std::optional<std::size_t> hit;
        for (std::size_t gi = 0; gi < gts.size(); ++gi) {
            if (gts[gi].dont_care || !gts[gi].regimes[r] || res.gt_matched[gi]) continue;
            const double o = overlap(d, gts[gi].box, cfg.kind);
            if (o > cfg.iou_threshold && o > best) {
                best = o;
                hit = gi;
            }
        }
        if (hit) {
            res.gt_matched[*hit] = true;
            res.det[di] = DetFlag::TruePositive;
            continue;
        }
        // out-of-regime GTs absorb detections without counting them
        for (std::size_t gi = 0; gi < gts.size() && !hit; ++gi) {
            if (gts[gi].dont_care || gts[gi].regimes[r] || res.gt_matched[gi]) continue;
            if (overlap(d, gts[gi].box, cfg.kind) > cfg.iou_threshold) hit = gi;
        }
        if (hit) {
            res.gt_matched[*hit] = true;
            res.det[di] = DetFlag::Ignored;
            continue;
        }
        // DontCare regions: more than half of the detection footprint inside
        const double area = d.w * d.l;
        for (const auto& g : gts) {
            if (g.dont_care && area > 0.0 && bev_intersection_area(d, g.box) / area > 0.5) {
                res.det[di] = DetFlag::Ignored;
                break;
            }
        }
    }
    return res;
}

std::vector<double> recall_anchors(ApProtocol protocol) {
    std::vector<double> a;
    if (protocol == ApProtocol::Eleven) {
        for (int i = 0; i <= 10; ++i) a.push_back(i / 10.0);
    } else {
        for (int i = 1; i <= 40; ++i) a.push_back(i / 40.0);
    }
    return a;
}

std::optional<double> average_precision(std::vector<ScoredFlag> flags, int num_gt, ApProtocol protocol) {
    if (num_gt <= 0) return std::nullopt;
    std::stable_sort(flags.begin(), flags.end(),
                     [](const ScoredFlag& a, const ScoredFlag& b) { return a.confidence > b.confidence; });
    std::vector<double> prec;
    std::vector<double> rec;
    int tp = 0;
    for (std::size_t i = 0; i < flags.size(); ++i) {
        if (flags[i].tp) ++tp;
        prec.push_back(static_cast<double>(tp) / static_cast<double>(i + 1));
        rec.push_back(static_cast<double>(tp) / static_cast<double>(num_gt));
    }
    const auto anchors = recall_anchors(protocol);
    double sum = 0.0;
    for (double r : anchors) {
        double best = 0.0;
        // 1e-12 absorbs the rounding of k / num_gt against k / 10
        for (std::size_t i = 0; i < prec.size(); ++i)
            if (rec[i] + 1e-12 >= r) best = std::max(best, prec[i]);
        sum += best;
    }
    return sum / static_cast<double>(anchors.size());
}

std::array<bool, 3> assign_difficulty(const kitti::LabelRecord& gt) {
    const double h = gt.bbox[3] - gt.bbox[1];
    const int occ = gt.occlusion;
    const double tr = gt.truncation;
    return {h >= 40.0 && occ <= 0 && tr <= 0.15, h >= 25.0 && occ <= 1 && tr <= 0.30,
            h >= 25.0 && occ <= 2 && tr <= 0.50};
}

std::array<bool, 3> assign_difficulty_points(std::size_t n) { return {n >= 120, n >= 40, n >= 10}; }

std::optional<double> evaluate(std::span<const SceneEval> scenes, const EvalConfig& cfg) {
    std::vector<ScoredFlag> flags;
    int num_gt = 0;
    for (const auto& s : scenes) {
        const auto m = match_detections(s.dets, s.gts, cfg);
        num_gt += m.num_gt;
        for (std::size_t i = 0; i < s.dets.size(); ++i) {
            if (m.det[i] == DetFlag::Ignored) continue;
            flags.push_back({s.dets[i].confidence, m.det[i] == DetFlag::TruePositive});
        }
    }
    return average_precision(std::move(flags), num_gt, cfg.protocol);
}

std::optional<double> Report::get(Regime r, IouKind k) const {
    for (const auto& c : cells)
        if (c.regime == r && c.kind == k) return c.ap;
    return std::nullopt;
}

Report evaluate_all(std::span<const SceneEval> scenes, const std::string& cls, double iou_threshold,
                    ApProtocol protocol) {
    Report rep{cls, iou_threshold, protocol, {}};
    for (IouKind k : {IouKind::Bev, IouKind::Box3D}) {
        for (Regime r : {Regime::Easy, Regime::Moderate, Regime::Hard}) {
            rep.cells.push_back({r, k, evaluate(scenes, {iou_threshold, k, r, protocol})});
        }
    }
    return rep;
}

std::string to_string(Regime r) {
    switch (r) {
        case Regime::Easy: return "easy";
        case Regime::Moderate: return "moderate";
        case Regime::Hard: return "hard";
    }
    return "?";
}

std::string to_string(IouKind k) { return k == IouKind::Bev ? "bev" : "3d"; }

namespace {
std::string cell(const std::optional<double>& ap) { return ap ? fmt::format("{:8.2f}", *ap * 100.0) : "       -"; }
}  // namespace

std::string format_table(const Report& r) {
    std::string s = fmt::format("{} AP@{:.2f} ({}-point)\n", r.cls, r.iou_threshold,
                                r.protocol == ApProtocol::Eleven ? 11 : 40);
    s += fmt::format("{:<8}{:>8}{:>10}{:>8}\n", "", "Easy", "Moderate", "Hard");
    for (IouKind k : {IouKind::Bev, IouKind::Box3D}) {
        s += fmt::format("{:<8}{}  {}{}\n", k == IouKind::Bev ? "BEV" : "3D", cell(r.get(Regime::Easy, k)),
                         cell(r.get(Regime::Moderate, k)), cell(r.get(Regime::Hard, k)));
    }
    return s;
}

std::string format_records(const Report& r) {
    std::string s;
    for (const auto& c : r.cells) {
        s += fmt::format("class={} kind={} regime={} iou={:.2f} protocol={} ap={}\n", r.cls, to_string(c.kind),
                         to_string(c.regime), r.iou_threshold, r.protocol == ApProtocol::Eleven ? 11 : 40,
                         c.ap ? fmt::format("{:.6f}", *c.ap) : std::string("absent"));
    }
    return s;
}

}  // namespace ws3d::eval
