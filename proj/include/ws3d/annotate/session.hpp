#pragma once

// Annotation state of one dataset: recorded clicks and accepted cuboids per
// scene, persisted as clicks/<id>.txt and label_2/<id>.txt under the output
// directory.

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include "ws3d/annotate/bev_raster.hpp"
#include "ws3d/detector/inference.hpp"
#include "ws3d/error.hpp"
#include "ws3d/kitti_io.hpp"

namespace ws3d::annotate {

class UnknownScene : public Error {
public:
    using Error::Error;
};

class OutOfWindow : public Error {
public:
    using Error::Error;
};

class NoDetector : public Error {
public:
    using Error::Error;
};

struct Annotation {
    std::string cls;
    Cuboid box;
    double confidence = 1.0;
};

struct SceneState {
    std::vector<kitti::ClickAnnotation> clicks;
    std::vector<Annotation> annotations;
};

class Session {
public:
    /// Scenes are the velodyne/*.bin files of `dataset`. Previously saved
    /// state under `output` is loaded. `detector` may be null (record-only).
    Session(std::filesystem::path dataset, std::filesystem::path output,
            std::shared_ptr<const detector::Detector> detector, std::string cls = "Car", BevWindow window = {});

    const std::vector<std::string>& scenes() const { return ids_; }
    bool has_scene(const std::string& id) const;
    const BevWindow& window() const { return window_; }
    const std::string& cls() const { return cls_; }
    bool has_detector() const { return detector_ != nullptr; }

    /// Scene cloud in the camera frame (cached after the first read).
    std::shared_ptr<const PointCloud> cloud(const std::string& id) const;
    BevRaster raster(const std::string& id) const;

    SceneState state(const std::string& id) const;

    /// Throws OutOfWindow when (x, z) is outside the raster window.
    void check_in_window(double x, double z) const;

    /// Stores a click and persists.
    void record_click(const std::string& id, double x, double z);
    /// Runs active annotation; the session itself is not modified.
    detector::ActiveResult active_click(const std::string& id, double x, double z) const;

    /// Returns the index of the new annotation.
    std::size_t accept(const std::string& id, const Annotation& a);
    /// Throws std::out_of_range for a bad index.
    void remove(const std::string& id, std::size_t index);

    /// Rereads the persisted state from disk.
    void reload();

    std::filesystem::path clicks_path(const std::string& id) const;
    std::filesystem::path labels_path(const std::string& id) const;

private:
    kitti::CalibRecord calib(const std::string& id) const;
    void require(const std::string& id) const;
    void persist(const std::string& id, const SceneState& s) const;
    SceneState load_state(const std::string& id) const;

    std::filesystem::path dataset_;
    std::filesystem::path output_;
    std::shared_ptr<const detector::Detector> detector_;
    std::string cls_;
    BevWindow window_;
    std::vector<std::string> ids_;

    mutable std::shared_mutex mu_;  // guards states_
    std::map<std::string, SceneState> states_;

    mutable std::mutex cache_mu_;
    mutable std::map<std::string, std::shared_ptr<const PointCloud>> clouds_;
};

}  // namespace ws3d::annotate
