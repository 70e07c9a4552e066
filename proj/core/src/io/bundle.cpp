#include "evasplat/io/bundle.hpp"

#include <fstream>

#include <json.hpp>

#include "evasplat/io/gaussian_io.hpp"
#include "evasplat/io/image_io.hpp"

namespace evasplat::io {

namespace fs = std::filesystem;

void write_camera(const fs::path& path, const CameraModel& cam) {
    nlohmann::json j;
    j["fx"] = cam.fx();
    j["fy"] = cam.fy();
    j["cx"] = cam.cx();
    j["cy"] = cam.cy();
    j["width"] = cam.width();
    j["height"] = cam.height();
    std::vector<double> pose(12);
    const RigidTransform& w2c = cam.world_to_camera();
    for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 3; ++c) pose[static_cast<std::size_t>(r) * 4 + c] = w2c.rotation(r, c);
        pose[static_cast<std::size_t>(r) * 4 + 3] = w2c.translation[r];
    }
    j["world_to_camera"] = pose;
    atomic_write(path, j.dump(2));
}

CameraModel read_camera(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(errc::kIoFailure, "cannot open " + path.string());
    nlohmann::json j;
    in >> j;
    const auto pose = j.at("world_to_camera").get<std::vector<double>>();
    if (pose.size() != 12)
        throw Error(errc::kIoFailure, "world_to_camera must hold 12 numbers");
    RigidTransform w2c;
    for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 3; ++c) w2c.rotation(r, c) = pose[static_cast<std::size_t>(r) * 4 + c];
        w2c.translation[r] = pose[static_cast<std::size_t>(r) * 4 + 3];
    }
    return CameraModel(j.at("fx"), j.at("fy"), j.at("cx"), j.at("cy"), j.at("width"),
                       j.at("height"), w2c);
}

void write_landmarks(const fs::path& path, const LandmarkSet& landmarks) {
    nlohmann::json j = nlohmann::json::array();
    for (const LandmarkObservation& lm : landmarks.items)
        j.push_back({{"view_id", lm.view_id},
                     {"landmark_id", lm.landmark_id},
                     {"u", lm.u},
                     {"v", lm.v}});
    atomic_write(path, j.dump(2));
}

LandmarkSet read_landmarks(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(errc::kIoFailure, "cannot open " + path.string());
    nlohmann::json j;
    in >> j;
    LandmarkSet out;
    for (const auto& e : j)
        out.items.push_back({e.at("view_id"), e.at("landmark_id"), e.at("u"), e.at("v")});
    return out;
}

namespace {
std::string view_name(std::size_t v, const char* ext) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "view_%03zu%s", v, ext);
    return buf;
}
}  // namespace

void write_bundle(const fs::path& dir, const SyntheticScene& scene) {
    fs::create_directories(dir / "cameras");
    fs::create_directories(dir / "images");
    fs::create_directories(dir / "depth");
    fs::create_directories(dir / "masks");

    for (std::size_t v = 0; v < scene.cameras.size(); ++v) {
        write_camera(dir / "cameras" / view_name(v, ".json"), scene.cameras[v]);
        write_png(dir / "images" / view_name(v, ".png"), scene.images[v]);
        write_pfm(dir / "depth" / view_name(v, ".pfm"), scene.depths[v]);
        write_mask_png(dir / "masks" / view_name(v, ".png"), scene.depths[v],
                       v < scene.alphas.size() ? scene.alphas[v] : Image{});
    }
    write_gaussians(dir / "gaussians.evgs", scene.ground_truth);
    write_landmarks(dir / "landmarks.json", scene.landmarks);
}

SceneBundle read_bundle(const fs::path& dir) {
    if (!fs::is_directory(dir))
        throw Error(errc::kBundleNotFound, "no scene bundle at " + dir.string());

    SceneBundle bundle;
    for (std::size_t v = 0;; ++v) {
        const fs::path cam_path = dir / "cameras" / view_name(v, ".json");
        if (!fs::exists(cam_path)) break;
        bundle.cameras.push_back(read_camera(cam_path));
        const fs::path img_path = dir / "images" / view_name(v, ".png");
        const fs::path depth_path = dir / "depth" / view_name(v, ".pfm");
        if (!fs::exists(img_path) || !fs::exists(depth_path))
            throw Error(errc::kBundleNotFound, "bundle view " + std::to_string(v) +
                                                   " is missing its image or depth file");
        bundle.images.push_back(read_png(img_path));
        DepthMap depth = read_pfm(depth_path);
        Image alpha;
        const fs::path mask_path = dir / "masks" / view_name(v, ".png");
        if (fs::exists(mask_path)) read_mask_png(mask_path, depth, &alpha);
        bundle.depths.push_back(std::move(depth));
        bundle.alphas.push_back(std::move(alpha));
    }
    if (bundle.cameras.empty())
        throw Error(errc::kBundleNotFound, "no cameras found under " + dir.string());

    if (fs::exists(dir / "landmarks.json"))
        bundle.landmarks = read_landmarks(dir / "landmarks.json");
    if (fs::exists(dir / "gaussians.evgs"))
        bundle.ground_truth = read_gaussians(dir / "gaussians.evgs");
    return bundle;
}

SyntheticScene SceneBundle::as_scene() const {
    SyntheticScene scene;
    scene.cameras = cameras;
    scene.images = images;
    scene.depths = depths;
    scene.alphas = alphas;
    scene.landmarks = landmarks;
    if (ground_truth) scene.ground_truth = *ground_truth;
    if (!cameras.empty()) {
        scene.config.n_views = static_cast<int>(cameras.size());
        scene.config.image_size = cameras.front().width();
    }
    return scene;
}

}  // namespace evasplat::io
