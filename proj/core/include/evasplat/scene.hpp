#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <vector>

#include "evasplat/camera.hpp"
#include "evasplat/gaussian_set.hpp"
#include "evasplat/image.hpp"
#include "evasplat/losses.hpp"
#include "evasplat/rasterizer.hpp"

namespace evasplat {

struct SceneConfig {
    std::uint64_t seed = 7;
    int n_views = 2;
    double delta_deg = 45.0;    // angle between adjacent camera axes
    int n_gaussians = 50;
    int image_size = 64;
    int n_landmarks = 8;        // designated gaussians annotated per view
    double ring_radius = 2.5;   // meters
    double blob_radius = 0.45;  // shell radius; gaussians stay inside the 1 m sphere
    double fov_deg = 45.0;
    double mask_alpha = 0.05;   // foreground where accumulated alpha >= this
    Eigen::Vector3d background = Eigen::Vector3d::Zero();
};

/// Ground truth plus everything a feed-forward run consumes: ring cameras,
/// oracle-rendered images, blended depth maps with masks, and landmark
/// annotations on the designated gaussians.
struct SyntheticScene {
    SceneConfig config;
    GaussianSet ground_truth;
    std::vector<CameraModel> cameras;
    std::vector<Image> images;      // H x W x 3
    std::vector<DepthMap> depths;
    std::vector<Image> alphas;      // H x W x 1, accumulated alpha (1 - transmittance)
    LandmarkSet landmarks;
    std::vector<int> landmark_gaussians;
};

/// Camera `view` on the ring, facing the origin. Adjacent views are
/// delta_deg apart.
CameraModel ring_camera(const SceneConfig& config, int view);

/// Deterministic in the seed; images come from oracle_render and depth maps
/// from its blended depth. Throws InvalidRing when the ring is over-full.
SyntheticScene generate_scene(const SceneConfig& config);

/// Where lifted gaussians take their non-geometric attributes from.
struct AttributeSource {
    enum class Kind {
        kConstant,  // fixed opacity, depth-proportional isotropic scale
        kDominant,  // copy from the dominant ground-truth contributor per pixel
    };
    Kind kind = Kind::kConstant;
    double opacity = 0.95;
    double scale_factor = 0.55;  // scale = factor * depth / fx

    /// Per-pixel accumulated alpha of the source view (H x W x 1); when set,
    /// the constant source takes each splat's opacity from it so re-renders
    /// reproduce the source coverage.
    const Image* alpha = nullptr;

    // kDominant inputs
    const GaussianSet* ground_truth = nullptr;
    const std::vector<std::int64_t>* dominant = nullptr;  // per pixel, -1 = none
};

/// One gaussian per masked-in pixel: position from the map, color from the
/// image, the rest from the attribute source. Features carry the color in
/// dims 0-2. Throws MaskMismatch when shapes disagree.
GaussianSet lift_view(const Image& image, const PositionMap& position_map, const CameraModel& cam,
                      const AttributeSource& source);

/// Per-view lifting over aligned image/position-map/camera lists.
std::vector<GaussianSet> lift_views(const std::vector<Image>& images,
                                    const std::vector<PositionMap>& position_maps,
                                    const std::vector<CameraModel>& cams,
                                    const AttributeSource& source);

}  // namespace evasplat
