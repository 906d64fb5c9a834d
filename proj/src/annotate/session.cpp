#include "ws3d/annotate/session.hpp"

#include <algorithm>

namespace ws3d::annotate {

namespace fs = std::filesystem;

Session::Session(fs::path dataset, fs::path output, std::shared_ptr<const detector::Detector> detector,
                 std::string cls, BevWindow window)
    : dataset_(std::move(dataset)),
      output_(std::move(output)),
      detector_(std::move(detector)),
      cls_(kitti::canonical_class(cls)),
      window_(window) {
    const fs::path velo = dataset_ / "velodyne";
    if (!fs::is_directory(velo)) throw Error("no velodyne directory under " + dataset_.string());
    for (const auto& e : fs::directory_iterator(velo)) {
        if (e.is_regular_file() && e.path().extension() == ".bin") ids_.push_back(e.path().stem().string());
    }
    std::sort(ids_.begin(), ids_.end());
    reload();
}

bool Session::has_scene(const std::string& id) const { return std::binary_search(ids_.begin(), ids_.end(), id); }

void Session::require(const std::string& id) const {
    if (!has_scene(id)) throw UnknownScene("unknown scene '" + id + "'");
}

kitti::CalibRecord Session::calib(const std::string& id) const {
    const fs::path p = dataset_ / "calib" / (id + ".txt");
    return fs::exists(p) ? kitti::read_calib(p) : kitti::CalibRecord::identity();
}

std::shared_ptr<const PointCloud> Session::cloud(const std::string& id) const {
    require(id);
    {
        std::lock_guard lock(cache_mu_);
        if (auto it = clouds_.find(id); it != clouds_.end()) return it->second;
    }
    auto c = std::make_shared<const PointCloud>(
        kitti::transform_to_internal(kitti::read_velodyne(dataset_ / "velodyne" / (id + ".bin")), calib(id)));
    std::lock_guard lock(cache_mu_);
    return clouds_.emplace(id, std::move(c)).first->second;
}

BevRaster Session::raster(const std::string& id) const { return rasterize_bev(*cloud(id), window_); }

SceneState Session::state(const std::string& id) const {
    require(id);
    std::shared_lock lock(mu_);
    auto it = states_.find(id);
    return it == states_.end() ? SceneState{} : it->second;
}

void Session::check_in_window(double x, double z) const {
    if (!world_to_pixel(window_, x, z)) {
        throw OutOfWindow("click (" + std::to_string(x) + ", " + std::to_string(z) + ") is outside the BEV window");
    }
}

fs::path Session::clicks_path(const std::string& id) const { return output_ / "clicks" / (id + ".txt"); }
fs::path Session::labels_path(const std::string& id) const { return output_ / "label_2" / (id + ".txt"); }

void Session::persist(const std::string& id, const SceneState& s) const {
    // an untouched scene leaves no files; a file that exists is kept current
    const auto write = [](const fs::path& p, const std::string& text, bool empty) {
        if (empty && !fs::exists(p)) return;
        fs::create_directories(p.parent_path());
        kitti::write_text_file_atomic(p, text);
    };
    write(clicks_path(id), kitti::write_clicks(s.clicks), s.clicks.empty());
    std::vector<kitti::LabelRecord> recs;
    const auto c = calib(id);
    for (const auto& a : s.annotations) recs.push_back(kitti::from_cuboid(a.box, a.cls, c, a.confidence));
    write(labels_path(id), kitti::format_labels(recs), recs.empty());
}

SceneState Session::load_state(const std::string& id) const {
    SceneState s;
    if (fs::exists(clicks_path(id))) s.clicks = kitti::read_clicks_file(clicks_path(id));
    if (fs::exists(labels_path(id))) {
        for (const auto& r : kitti::read_labels(labels_path(id))) {
            s.annotations.push_back({r.cls, kitti::to_cuboid(r), r.score.value_or(1.0)});
        }
    }
    return s;
}

void Session::reload() {
    std::map<std::string, SceneState> fresh;
    for (const auto& id : ids_) {
        SceneState s = load_state(id);
        if (!s.clicks.empty() || !s.annotations.empty()) fresh.emplace(id, std::move(s));
    }
    std::unique_lock lock(mu_);
    states_ = std::move(fresh);
}

void Session::record_click(const std::string& id, double x, double z) {
    require(id);
    check_in_window(x, z);
    std::unique_lock lock(mu_);
    SceneState next = states_[id];
    next.clicks.push_back({cls_, x, z});
    persist(id, next);  // throws before the in-memory state changes
    states_[id] = std::move(next);
}

detector::ActiveResult Session::active_click(const std::string& id, double x, double z) const {
    require(id);
    check_in_window(x, z);
    if (!detector_ || !detector_->has_stage2()) throw NoDetector("no stage-2 checkpoint loaded");
    return detector_->active_annotate(*cloud(id), x, z);
}

std::size_t Session::accept(const std::string& id, const Annotation& a) {
    require(id);
    validate(a.box);
    std::unique_lock lock(mu_);
    SceneState next = states_[id];
    next.annotations.push_back(a);
    persist(id, next);
    states_[id] = std::move(next);
    return states_[id].annotations.size() - 1;
}

void Session::remove(const std::string& id, std::size_t index) {
    require(id);
    std::unique_lock lock(mu_);
    SceneState next = states_[id];
    if (index >= next.annotations.size()) throw std::out_of_range("no annotation " + std::to_string(index));
    next.annotations.erase(next.annotations.begin() + static_cast<std::ptrdiff_t>(index));
    persist(id, next);
    states_[id] = std::move(next);
}

}  // namespace ws3d::annotate
