// ws3d command-line front end. Every verb also reads an INI-style file given
// by --config (keys are flag names, one section per verb or none); explicit
// flags win over the file.

#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include <csignal>
#include <filesystem>
#include <fstream>
#include <optional>

#include "ws3d/annotate/server.hpp"
#include "ws3d/dataset.hpp"
#include "ws3d/detector/inference.hpp"
#include "ws3d/detector/training.hpp"
#include "ws3d/evalkit.hpp"
#include "ws3d/log.hpp"
#include "ws3d/synthgen.hpp"

namespace fs = std::filesystem;
using namespace ws3d;

namespace {

struct TrainArgs {
    std::string scenes;
    std::string clicks;
    std::string instances;
    std::string stage1;
    std::string out;
    std::string preset = "desk";
    std::string cls = "car";
    std::string loss_log;
    std::optional<int> iterations;
    std::optional<int> batch;
    std::uint64_t seed = 1;
};

struct InferArgs {
    std::string scenes;
    std::string stage1;
    std::string stage2;
    std::string out;
    double min_confidence = 0.0;
};

struct EvalArgs {
    std::string pred;
    std::string gt;
    std::string scenes;
    std::string cls = "car";
    double iou = 0.7;
    std::string difficulty = "kitti";
    int protocol = 11;
    bool records = false;
};

struct ServeArgs {
    std::string scenes;
    std::string out;
    std::string stage1;
    std::string stage2;
    std::string ui;
    std::string cls = "car";
    std::string host = "127.0.0.1";
    int port = 8080;
};

detector::DetectorConfig make_config(const TrainArgs& a) {
    const auto profile = detector::parse_profile(a.cls);
    auto cfg = detector::parse_preset(a.preset) == detector::Preset::Desk ? detector::DetectorConfig::desk(profile)
                                                                          : detector::DetectorConfig::full(profile);
    cfg.train.seed = a.seed;
    return cfg;
}

std::ofstream open_log(const std::string& path) {
    if (fs::path(path).has_parent_path()) fs::create_directories(fs::path(path).parent_path());
    std::ofstream f(path);
    if (!f) throw Error("cannot open loss log " + path);
    return f;
}

detector::TrainOptions log_to(std::ofstream& f) {
    detector::TrainOptions o;
    o.sink = [&f](const detector::LossRecord& r) {
        const auto line = detector::format_loss_record(r);
        f << line << '\n' << std::flush;
        spdlog::info("{}", line);
    };
    return o;
}

std::vector<detector::TrainingScene> load_scenes(const TrainArgs& a, bool with_instances) {
    const fs::path root = a.scenes;
    const fs::path clicks = a.clicks.empty() ? root / "clicks" : fs::path(a.clicks);
    std::optional<fs::path> inst;
    if (with_instances) inst = a.instances.empty() ? root / "instances" : fs::path(a.instances);
    auto scenes = data::load_training_scenes(root, clicks, inst, kitti::canonical_class(a.cls));
    spdlog::info("loaded {} scenes from {}", scenes.size(), root.string());
    return scenes;
}

void run_synth(const synth::SynthConfig& cfg, const std::string& out) {
    const auto scenes = synth::generate_dataset(cfg);
    synth::write_dataset(out, scenes, cfg);
    std::size_t boxes = 0;
    std::size_t precise = 0;
    for (const auto& s : scenes) {
        boxes += s.boxes.size();
        precise += static_cast<std::size_t>(std::count(s.precise.begin(), s.precise.end(), true));
    }
    spdlog::info("wrote {} scenes ({} objects, {} precise) to {}", scenes.size(), boxes, precise, out);
}

void run_train_stage1(const TrainArgs& a) {
    auto cfg = make_config(a);
    if (a.iterations) cfg.train.stage1_iterations = *a.iterations;
    if (a.batch) cfg.train.stage1_batch = *a.batch;
    const auto scenes = load_scenes(a, false);
    auto log = open_log(a.loss_log.empty() ? a.out + ".loss.log" : a.loss_log);
    auto res = detector::train_stage1(scenes, cfg, log_to(log));
    if (fs::path(a.out).has_parent_path()) fs::create_directories(fs::path(a.out).parent_path());
    detector::Detector::save_stage1(a.out, *res.net, cfg);
    spdlog::info("stage-1 checkpoint written to {}", a.out);
}

void run_train_stage2(const TrainArgs& a) {
    auto cfg = make_config(a);
    if (a.iterations) cfg.train.stage2_iterations = *a.iterations;
    if (a.batch) cfg.train.stage2_batch = *a.batch;
    detector::DetectorConfig c1;
    auto s1 = detector::Detector::load_stage1(a.stage1, &c1);
    cfg.stage1 = c1.stage1;
    const auto scenes = load_scenes(a, true);
    auto log = open_log(a.loss_log.empty() ? a.out + ".loss.log" : a.loss_log);
    auto res = detector::train_stage2(scenes, *s1, cfg, log_to(log));
    if (fs::path(a.out).has_parent_path()) fs::create_directories(fs::path(a.out).parent_path());
    detector::Detector::save_stage2(a.out, *res.initial, *res.refine, cfg);
    spdlog::info("stage-2 checkpoint written to {}", a.out);
}

// infer writes scored detections; annotate-auto writes pseudo labels
// (no score column) above a confidence floor.
void run_infer(const InferArgs& a, bool pseudo) {
    const auto det = detector::Detector::load(a.stage1, a.stage2);
    const std::string cls = det.config().profile.cls;
    fs::create_directories(a.out);
    std::size_t total = 0;
    for (const auto& id : data::scene_ids(a.scenes)) {
        const auto calib = data::scene_calib(a.scenes, id);
        std::vector<kitti::LabelRecord> recs;
        for (const auto& d : det.infer_scene(data::load_cloud(a.scenes, id))) {
            if (d.confidence < a.min_confidence) continue;
            recs.push_back(kitti::from_cuboid(d.box, cls, calib,
                                              pseudo ? std::nullopt : std::optional<double>(d.confidence)));
        }
        total += recs.size();
        kitti::write_text_file_atomic(fs::path(a.out) / (id + ".txt"), kitti::format_labels(recs));
    }
    spdlog::info("wrote {} {} to {}", total, pseudo ? "pseudo labels" : "detections", a.out);
}

void run_eval(const EvalArgs& a) {
    const std::string cls = kitti::canonical_class(a.cls);
    const bool by_points = a.difficulty == "points";
    if (by_points && a.scenes.empty()) throw Error("--difficulty points needs --scenes");
    std::vector<eval::SceneEval> scenes;
    for (const auto& e : fs::directory_iterator(a.gt)) {
        if (e.path().extension() != ".txt") continue;
        const std::string id = e.path().stem().string();
        eval::SceneEval s;
        std::optional<PointCloud> cloud;
        if (by_points) cloud = data::load_cloud(a.scenes, id);
        for (const auto& r : kitti::read_labels(e.path())) {
            eval::GtBox g;
            g.box = kitti::to_cuboid(r);
            if (r.cls == "DontCare") {
                g.dont_care = true;
            } else if (r.cls != cls) {
                continue;
            } else {
                g.regimes = by_points ? eval::assign_difficulty_points(synth::count_points_in_box(*cloud, g.box))
                                      : eval::assign_difficulty(r);
            }
            s.gts.push_back(g);
        }
        for (const auto& r : data::load_labels(a.pred, id, cls)) {
            s.dets.push_back({kitti::to_cuboid(r), r.score.value_or(1.0)});
        }
        scenes.push_back(std::move(s));
    }
    if (scenes.empty()) throw Error("no label files under " + a.gt);
    const auto rep = eval::evaluate_all(scenes, cls, a.iou,
                                        a.protocol == 40 ? eval::ApProtocol::Forty : eval::ApProtocol::Eleven);
    fmt::print("{}", a.records ? eval::format_records(rep) : eval::format_table(rep));
}

annotate::Server* g_server = nullptr;

void run_serve(const ServeArgs& a) {
    std::shared_ptr<const detector::Detector> det;
    if (!a.stage2.empty()) {
        auto d = a.stage1.empty() ? detector::Detector::load_stage2_only(a.stage2)
                                  : detector::Detector::load(a.stage1, a.stage2);
        det = std::make_shared<const detector::Detector>(std::move(d));
    } else {
        spdlog::warn("no --stage2 checkpoint: only record-mode clicks are available");
    }
    auto session = std::make_shared<annotate::Session>(a.scenes, a.out.empty() ? a.scenes + "/annotations" : a.out,
                                                       det, kitti::canonical_class(a.cls));
    annotate::Server server(session);
    if (!a.ui.empty() && !server.mount_static(a.ui)) throw Error("cannot serve UI directory " + a.ui);
    if (!server.bind(a.host, a.port)) throw Error(fmt::format("cannot bind {}:{}", a.host, a.port));
    g_server = &server;
    std::signal(SIGINT, [](int) {
        if (g_server) g_server->stop();
    });
    std::signal(SIGTERM, [](int) {
        if (g_server) g_server->stop();
    });
    spdlog::info("serving {} scenes on http://{}:{}", session->scenes().size(), a.host, a.port);
    server.listen_after_bind();
    g_server = nullptr;
}

void add_train_options(CLI::App* c, TrainArgs& a, bool stage2) {
    c->add_option("--scenes", a.scenes, "dataset root (velodyne/, calib/)")->required()->check(CLI::ExistingDirectory);
    c->add_option("--clicks", a.clicks, "click files directory (default <scenes>/clicks)");
    if (stage2) {
        c->add_option("--instances", a.instances, "precise labels directory (default <scenes>/instances)");
        c->add_option("--stage1", a.stage1, "stage-1 checkpoint")->required()->check(CLI::ExistingFile);
    }
    c->add_option("--out", a.out, "checkpoint path")->required();
    c->add_option("--preset", a.preset, "full | desk")->check(CLI::IsMember({"full", "desk"}));
    c->add_option("--class", a.cls, "car | pedestrian")->check(CLI::IsMember({"car", "pedestrian"}, CLI::ignore_case));
    c->add_option("--loss-log", a.loss_log, "loss log path (default <out>.loss.log)");
    c->add_option("--iterations", a.iterations, "override the preset iteration count");
    c->add_option("--batch", a.batch, "override the preset batch size");
    c->add_option("--seed", a.seed, "training seed");
}

void add_infer_options(CLI::App* c, InferArgs& a) {
    c->add_option("--scenes", a.scenes, "dataset root")->required()->check(CLI::ExistingDirectory);
    c->add_option("--stage1", a.stage1, "stage-1 checkpoint")->required()->check(CLI::ExistingFile);
    c->add_option("--stage2", a.stage2, "stage-2 checkpoint")->required()->check(CLI::ExistingFile);
    c->add_option("--out", a.out, "output label directory")->required();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"ws3d: weakly supervised lidar 3D detection"};
    app.set_config("--config", "", "INI file with default option values");
    std::string log_level;
    app.add_option("--log-level", log_level, "trace | debug | info | warn | error (or WS3D_LOG_LEVEL)");
    app.require_subcommand(1);

    synth::SynthConfig sc;
    std::string synth_out;
    auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic dataset");
    synth_cmd->add_option("--out", synth_out, "output dataset root")->required();
    synth_cmd->add_option("--scenes", sc.scenes, "number of scenes")->check(CLI::PositiveNumber);
    synth_cmd->add_option("--seed", sc.seed, "generator seed");
    synth_cmd->add_option("--class", sc.cls, "object class")->check(CLI::IsMember({"car", "pedestrian"}, CLI::ignore_case));
    synth_cmd->add_option("--min-objects", sc.min_vehicles);
    synth_cmd->add_option("--max-objects", sc.max_vehicles);
    synth_cmd->add_option("--density", sc.surface_density, "surface points per m^2 at 10 m");
    synth_cmd->add_option("--precise-fraction", sc.precise_fraction)->check(CLI::Range(0.0, 1.0));
    synth_cmd->add_option("--click-sigma-x", sc.click_sigma_x);
    synth_cmd->add_option("--click-sigma-z", sc.click_sigma_z);
    bool no_shadow = false;
    synth_cmd->add_flag("--no-shadowing", no_shadow, "keep occluded points");

    TrainArgs t1;
    auto* t1_cmd = app.add_subcommand("train-stage1", "train the click-supervised proposal network");
    add_train_options(t1_cmd, t1, false);
    TrainArgs t2;
    auto* t2_cmd = app.add_subcommand("train-stage2", "train the cuboid networks");
    add_train_options(t2_cmd, t2, true);

    InferArgs inf;
    auto* infer_cmd = app.add_subcommand("infer", "detect objects and write scored KITTI labels");
    add_infer_options(infer_cmd, inf);
    InferArgs aut;
    aut.min_confidence = 0.5;
    auto* auto_cmd = app.add_subcommand("annotate-auto", "write detections as pseudo annotations");
    add_infer_options(auto_cmd, aut);
    auto_cmd->add_option("--min-confidence", aut.min_confidence, "confidence floor")->capture_default_str();

    EvalArgs ev;
    auto* eval_cmd = app.add_subcommand("eval", "average precision table");
    eval_cmd->add_option("--pred", ev.pred, "prediction label directory")->required()->check(CLI::ExistingDirectory);
    eval_cmd->add_option("--gt", ev.gt, "groundtruth label directory")->required()->check(CLI::ExistingDirectory);
    eval_cmd->add_option("--scenes", ev.scenes, "dataset root (for --difficulty points)");
    eval_cmd->add_option("--class", ev.cls, "class to evaluate");
    eval_cmd->add_option("--iou", ev.iou, "IoU threshold")->check(CLI::Range(0.0, 1.0));
    eval_cmd->add_option("--difficulty", ev.difficulty, "kitti | points")->check(CLI::IsMember({"kitti", "points"}));
    eval_cmd->add_option("--protocol", ev.protocol, "11 | 40 recall points")->check(CLI::IsMember({11, 40}));
    eval_cmd->add_flag("--records", ev.records, "one key=value line per cell instead of the table");

    ServeArgs sv;
    auto* serve_cmd = app.add_subcommand("serve", "annotation HTTP service");
    serve_cmd->add_option("--scenes", sv.scenes, "dataset root")->required()->check(CLI::ExistingDirectory);
    serve_cmd->add_option("--out", sv.out, "annotation output directory (default <scenes>/annotations)");
    serve_cmd->add_option("--stage1", sv.stage1, "stage-1 checkpoint")->check(CLI::ExistingFile);
    serve_cmd->add_option("--stage2", sv.stage2, "stage-2 checkpoint (enables active mode)")->check(CLI::ExistingFile);
    serve_cmd->add_option("--ui", sv.ui, "static UI directory served at /");
    serve_cmd->add_option("--class", sv.cls, "annotated class");
    serve_cmd->add_option("--host", sv.host);
    serve_cmd->add_option("--port", sv.port)->check(CLI::Range(1, 65535));

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        init_logging(log_level);
        if (*synth_cmd) {
            sc.shadowing = !no_shadow;
            run_synth(sc, synth_out);
        } else if (*t1_cmd) {
            run_train_stage1(t1);
        } else if (*t2_cmd) {
            run_train_stage2(t2);
        } else if (*infer_cmd) {
            run_infer(inf, false);
        } else if (*auto_cmd) {
            run_infer(aut, true);
        } else if (*eval_cmd) {
            run_eval(ev);
        } else if (*serve_cmd) {
            run_serve(sv);
        }
    } catch (const std::exception& e) {
        fmt::print(stderr, "error: {}\n", e.what());
        return 1;
    }
    return 0;
}
