#include "ws3d/dataset.hpp"

#include <algorithm>

#include "ws3d/error.hpp"

namespace ws3d::data {

namespace fs = std::filesystem;

std::vector<std::string> scene_ids(const fs::path& root) {
    const fs::path velo = root / "velodyne";
    if (!fs::is_directory(velo)) throw Error("no velodyne directory under " + root.string());
    std::vector<std::string> ids;
    for (const auto& e : fs::directory_iterator(velo)) {
        if (e.is_regular_file() && e.path().extension() == ".bin") ids.push_back(e.path().stem().string());
    }
    std::sort(ids.begin(), ids.end());
    return ids;
}

kitti::CalibRecord scene_calib(const fs::path& root, const std::string& id) {
    const fs::path p = root / "calib" / (id + ".txt");
    return fs::exists(p) ? kitti::read_calib(p) : kitti::CalibRecord::identity();
}

PointCloud load_cloud(const fs::path& root, const std::string& id) {
    return kitti::transform_to_internal(kitti::read_velodyne(root / "velodyne" / (id + ".bin")), scene_calib(root, id));
}

std::vector<kitti::LabelRecord> load_labels(const fs::path& dir, const std::string& id, const std::string& cls) {
    const fs::path p = dir / (id + ".txt");
    if (!fs::exists(p)) return {};
    std::vector<kitti::LabelRecord> out;
    for (auto& r : kitti::read_labels(p)) {
        if (r.cls == kitti::canonical_class(cls)) out.push_back(std::move(r));
    }
    return out;
}

std::vector<detector::TrainingScene> load_training_scenes(const fs::path& root, const fs::path& clicks,
                                                          const std::optional<fs::path>& instances,
                                                          const std::string& cls) {
    std::vector<detector::TrainingScene> out;
    for (const auto& id : scene_ids(root)) {
        detector::TrainingScene s;
        s.id = id;
        s.cloud = load_cloud(root, id);
        const fs::path cp = clicks / (id + ".txt");
        if (fs::exists(cp)) {
            for (auto& c : kitti::read_clicks_file(cp)) {
                if (kitti::canonical_class(c.cls) == kitti::canonical_class(cls)) s.clicks.push_back(std::move(c));
            }
        }
        if (instances) {
            for (const auto& r : load_labels(*instances, id, cls)) s.precise.push_back(kitti::to_cuboid(r));
        }
        out.push_back(std::move(s));
    }
    return out;
}

}  // namespace ws3d::data
