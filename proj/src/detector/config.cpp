#include "ws3d/detector/config.hpp"

#include <json.hpp>

#include <algorithm>
#include <cctype>

#include "ws3d/error.hpp"

namespace ws3d::detector {

using nlohmann::json;

ProfileParams ProfileParams::car() { return {}; }

ProfileParams ProfileParams::pedestrian() {
    ProfileParams p;
    p.profile = ClassProfile::Pedestrian;
    p.cls = "Pedestrian";
    p.proposal_radius = 1.0;
    p.gt_match_distance = 0.5;
    p.anchor = Cuboid{0, 0, 0, 1.76, 0.66, 0.84, 0};
    p.pseudo = PseudoLabelConfig::pedestrian();
    p.search_range = std::array<double, 4>{-20.0, 20.0, 0.0, 48.0};
    return p;
}

int Stage2Config::trunk_features() const {
    if (sa.empty() || sa.back().scales.empty()) return 0;
    return sa.back().scales.front().widths.back();
}

namespace {

nn::LayerSpec sa_multi(int groups, std::array<double, 2> radii, std::array<int, 2> caps, int width) {
    nn::LayerSpec s;
    s.kind = nn::LayerKind::SAMultiScale;
    s.group_size = groups;
    for (int k = 0; k < 2; ++k) s.scales.push_back({radii[k], caps[k], {width / 2, width / 2, width}});
    return s;
}

nn::LayerSpec sa_single(int groups, double radius, int cap, int width) {
    nn::LayerSpec s;
    s.kind = nn::LayerKind::SASingleScale;
    s.group_size = groups;
    s.group_all = groups == 1;
    s.scales.push_back({radius, cap, {width / 2, width / 2, width}});
    return s;
}

nn::LayerSpec fp(int width) {
    nn::LayerSpec s;
    s.kind = nn::LayerKind::FP;
    s.widths = {width, width};
    return s;
}

ProfileParams profile_of(ClassProfile p) {
    return p == ClassProfile::Car ? ProfileParams::car() : ProfileParams::pedestrian();
}

}  // namespace

DetectorConfig DetectorConfig::full(ClassProfile p) {
    DetectorConfig c;
    c.preset = Preset::Full;
    c.profile = profile_of(p);
    c.stage1.num_points = 16384;
    const std::array<double, 2> radii[] = {{0.1, 0.5}, {0.5, 1.0}, {1.0, 2.0}, {2.0, 4.0}};
    const int groups[] = {4096, 1024, 256, 64};
    const int widths[] = {64, 128, 256, 512};
    for (int i = 0; i < 4; ++i) c.stage1.sa.push_back(sa_multi(groups[i], radii[i], {16, 32}, widths[i]));
    for (int w : {512, 512, 256, 128}) c.stage1.fp.push_back(fp(w));
    c.stage1.head_hidden = 128;

    c.stage2.num_points = 512;
    c.stage2.sa = {sa_single(256, 0.2, 32, 64), sa_single(128, 0.4, 32, 128), sa_single(32, 0.8, 32, 256),
                   sa_single(1, 0.0, 0, 512)};
    c.stage2.head_hidden = {256, 256};

    c.train.stage1_iterations = 8000;
    c.train.stage1_batch = 25;
    c.train.stage2_iterations = p == ClassProfile::Car ? 50000 : 20000;
    c.train.stage2_batch = 800;
    return c;
}

DetectorConfig DetectorConfig::desk(ClassProfile p) {
    DetectorConfig c = full(p);
    c.preset = Preset::Desk;
    c.stage1.num_points = 2048;
    // 8x fewer points spread the same scene thinner, so radii double
    const std::array<double, 2> radii[] = {{0.2, 1.0}, {1.0, 2.0}, {2.0, 4.0}, {4.0, 8.0}};
    const int groups[] = {512, 128, 32, 8};
    const int widths[] = {16, 32, 64, 128};
    c.stage1.sa.clear();
    for (int i = 0; i < 4; ++i) c.stage1.sa.push_back(sa_multi(groups[i], radii[i], {16, 32}, widths[i]));
    c.stage1.fp.clear();
    for (int w : {128, 128, 64, 32}) c.stage1.fp.push_back(fp(w));
    c.stage1.head_hidden = 32;

    c.stage2.num_points = 64;
    c.stage2.sa = {sa_single(32, 0.4, 16, 16), sa_single(16, 0.8, 16, 32), sa_single(4, 1.6, 16, 64),
                   sa_single(1, 0.0, 0, 128)};
    c.stage2.head_hidden = {64, 64};

    c.train.stage1_iterations = 400;
    c.train.stage1_batch = 4;
    c.train.stage2_iterations = p == ClassProfile::Car ? 2500 : 1000;
    c.train.stage2_batch = 32;
    c.train.proposals_per_gt = 8;
    return c;
}

std::string to_string(ClassProfile p) { return p == ClassProfile::Car ? "car" : "pedestrian"; }

namespace {

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
    return s;
}

json spec_json(const nn::LayerSpec& s) {
    json j;
    j["kind"] = static_cast<int>(s.kind);
    j["group_size"] = s.group_size;
    j["group_all"] = s.group_all;
    j["widths"] = s.widths;
    json scales = json::array();
    for (const auto& sc : s.scales) scales.push_back({{"radius", sc.radius}, {"cap", sc.cap}, {"widths", sc.widths}});
    j["scales"] = scales;
    return j;
}

nn::LayerSpec spec_from(const json& j) {
    nn::LayerSpec s;
    s.kind = static_cast<nn::LayerKind>(j.at("kind").get<int>());
    s.group_size = j.at("group_size");
    s.group_all = j.at("group_all");
    s.widths = j.at("widths").get<std::vector<int>>();
    for (const auto& sc : j.at("scales")) {
        s.scales.push_back({sc.at("radius"), sc.at("cap"), sc.at("widths").get<std::vector<int>>()});
    }
    return s;
}

json specs_json(const std::vector<nn::LayerSpec>& v) {
    json a = json::array();
    for (const auto& s : v) a.push_back(spec_json(s));
    return a;
}

std::vector<nn::LayerSpec> specs_from(const json& a) {
    std::vector<nn::LayerSpec> v;
    for (const auto& j : a) v.push_back(spec_from(j));
    return v;
}

}  // namespace

ClassProfile parse_profile(const std::string& name) {
    const auto n = lower(name);
    if (n == "car") return ClassProfile::Car;
    if (n == "pedestrian") return ClassProfile::Pedestrian;
    throw Error("unknown class profile '" + name + "' (expected car or pedestrian)");
}

Preset parse_preset(const std::string& name) {
    const auto n = lower(name);
    if (n == "full") return Preset::Full;
    if (n == "desk") return Preset::Desk;
    throw Error("unknown preset '" + name + "' (expected full or desk)");
}

std::string DetectorConfig::to_json() const {
    json j;
    j["preset"] = preset == Preset::Full ? "full" : "desk";
    j["profile"] = detector::to_string(profile.profile);
    j["anchor"] = {profile.anchor.h, profile.anchor.w, profile.anchor.l};
    j["stage1"] = {{"num_points", stage1.num_points},
                   {"sa", specs_json(stage1.sa)},
                   {"fp", specs_json(stage1.fp)},
                   {"head_hidden", stage1.head_hidden},
                   {"bins", {stage1.bins.half_range, stage1.bins.bin_size, stage1.bins.num_bins}},
                   {"fg_threshold", stage1.fg_threshold}};
    j["stage2"] = {{"num_points", stage2.num_points},
                   {"sa", specs_json(stage2.sa)},
                   {"head_hidden", stage2.head_hidden},
                   {"theta_bins", stage2.theta_bins},
                   {"cuboid_margin", stage2.cuboid_margin}};
    j["loss"] = {{"focal_alpha", loss.focal_alpha},
                 {"focal_gamma", loss.focal_gamma},
                 {"smooth_l1_beta", loss.smooth_l1_beta},
                 {"center_weight", loss.center_weight}};
    j["train"] = {{"stage1_iterations", train.stage1_iterations},
                  {"stage1_batch", train.stage1_batch},
                  {"stage2_iterations", train.stage2_iterations},
                  {"stage2_batch", train.stage2_batch},
                  {"proposals_per_gt", train.proposals_per_gt},
                  {"negatives_per_scene", train.negatives_per_scene},
                  {"lr", train.adam.lr},
                  {"weight_decay", train.adam.weight_decay},
                  {"log_every", train.log_every},
                  {"seed", train.seed}};
    return j.dump();
}

DetectorConfig DetectorConfig::from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
        const auto prof = parse_profile(j.at("profile").get<std::string>());
        DetectorConfig c = parse_preset(j.at("preset").get<std::string>()) == Preset::Full ? full(prof) : desk(prof);
        const auto anchor = j.at("anchor").get<std::vector<double>>();
        c.profile.anchor.h = anchor.at(0);
        c.profile.anchor.w = anchor.at(1);
        c.profile.anchor.l = anchor.at(2);
        const auto& s1 = j.at("stage1");
        c.stage1.num_points = s1.at("num_points");
        c.stage1.sa = specs_from(s1.at("sa"));
        c.stage1.fp = specs_from(s1.at("fp"));
        c.stage1.head_hidden = s1.at("head_hidden");
        c.stage1.bins.half_range = s1.at("bins").at(0);
        c.stage1.bins.bin_size = s1.at("bins").at(1);
        c.stage1.bins.num_bins = s1.at("bins").at(2);
        c.stage1.fg_threshold = s1.at("fg_threshold");
        const auto& s2 = j.at("stage2");
        c.stage2.num_points = s2.at("num_points");
        c.stage2.sa = specs_from(s2.at("sa"));
        c.stage2.head_hidden = s2.at("head_hidden").get<std::vector<int>>();
        c.stage2.theta_bins = s2.at("theta_bins");
        c.stage2.cuboid_margin = s2.at("cuboid_margin");
        const auto& l = j.at("loss");
        c.loss.focal_alpha = l.at("focal_alpha");
        c.loss.focal_gamma = l.at("focal_gamma");
        c.loss.smooth_l1_beta = l.at("smooth_l1_beta");
        c.loss.center_weight = l.at("center_weight");
        const auto& t = j.at("train");
        c.train.stage1_iterations = t.at("stage1_iterations");
        c.train.stage1_batch = t.at("stage1_batch");
        c.train.stage2_iterations = t.at("stage2_iterations");
        c.train.stage2_batch = t.at("stage2_batch");
        c.train.proposals_per_gt = t.at("proposals_per_gt");
        c.train.negatives_per_scene = t.at("negatives_per_scene");
        c.train.adam.lr = t.at("lr");
        c.train.adam.weight_decay = t.at("weight_decay");
        c.train.log_every = t.at("log_every");
        c.train.seed = t.at("seed");
        return c;
    } catch (const json::exception& e) {
        throw Error(std::string("bad detector config: ") + e.what());
    }
}

}  // namespace ws3d::detector
