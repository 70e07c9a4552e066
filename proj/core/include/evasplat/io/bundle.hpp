#pragma once

#include <filesystem>
#include <optional>

#include "evasplat/scene.hpp"

namespace evasplat::io {

/// Camera JSON: { fx, fy, cx, cy, width, height, world_to_camera: 12 numbers
/// row-major 3x4 }.
void write_camera(const std::filesystem::path& path, const CameraModel& cam);
CameraModel read_camera(const std::filesystem::path& path);

void write_landmarks(const std::filesystem::path& path, const LandmarkSet& landmarks);
LandmarkSet read_landmarks(const std::filesystem::path& path);

/// Scene bundle directory layout:
///   cameras/view_%03d.json  images/view_%03d.png  depth/view_%03d.pfm
///   masks/view_%03d.png     gaussians.evgs        landmarks.json
void write_bundle(const std::filesystem::path& dir, const SyntheticScene& scene);

struct SceneBundle {
    std::vector<CameraModel> cameras;
    std::vector<Image> images;  // linear float
    std::vector<DepthMap> depths;
    std::vector<Image> alphas;  // soft coverage from the 8-bit masks
    LandmarkSet landmarks;
    std::optional<GaussianSet> ground_truth;

    /// View of the bundle as a scene for the forward pipeline.
    SyntheticScene as_scene() const;
};

/// Throws BundleNotFound when the directory or a required file is missing.
SceneBundle read_bundle(const std::filesystem::path& dir);

}  // namespace evasplat::io
