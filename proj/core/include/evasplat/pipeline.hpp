#pragma once

#include <Eigen/Core>
#include <memory>
#include <vector>

#include "evasplat/losses.hpp"
#include "evasplat/scene.hpp"

namespace evasplat {

/// Recurrent refinement interface: image^l = refine(image^{l-1}, F_novel),
/// iterated L times. Output shape equals the input image shape.
class Refiner {
public:
    virtual ~Refiner() = default;
    virtual Image apply(const Image& image, const Image& feature_plane) const = 0;
};

class IdentityRefiner final : public Refiner {
public:
    Image apply(const Image& image, const Image&) const override { return image; }
};

/// Per-pixel affine readout from [rgb ⊕ feature] (35 inputs + bias) back to
/// rgb. The reference stand-in for the learned refiner.
class LinearRefiner final : public Refiner {
public:
    LinearRefiner();  // identity readout

    Image apply(const Image& image, const Image& feature_plane) const override;

    /// Least-squares fit on one (image, features, target) triple. The
    /// returned refiner never scores worse than the identity readout on the
    /// training MSE.
    static LinearRefiner fit(const Image& image, const Image& feature_plane, const Image& target);

    Eigen::Matrix<double, 3, Eigen::Dynamic> weights;  // 3 x 36
};

struct PipelineConfig {
    AttributeSource attributes;
    Eigen::Vector3d background = Eigen::Vector3d::Zero();
    int refine_iterations = 0;          // L; 0 means passthrough
    const Refiner* refiner = nullptr;   // nullptr behaves as identity
};

struct PipelineResult {
    Image rendered;       // the raw splatted view
    Image feature_plane;  // H x W x kFeatureDim
    Image refined;        // after L refiner applications
    std::size_t gaussian_count = 0;
    std::vector<GaussianSet> per_view_sets;
};

/// Lift every source view, merge, splat at the target camera, then refine.
PipelineResult forward_pipeline(const SyntheticScene& scene, const CameraModel& target_cam,
                                const PipelineConfig& config);

struct FitConfig {
    int iterations = 2000;
    double step = 1e-2;
    double momentum = 0.9;
    // Per-attribute step multipliers. The render loss is pixel-mean
    // normalized, so raw gradients sit around 1e-4; these bring the
    // activated-parameter motion to useful magnitudes.
    double step_position = 200.0;
    double step_opacity = 1000.0;
    double step_scale = 300.0;
    double step_quaternion = 500.0;
    double step_color = 1000.0;
    double step_feature = 0.0;  // features are unsupervised by color targets
    double lambda_render = 0.2;
    Eigen::Vector3d background = Eigen::Vector3d::Zero();
};

struct FitResult {
    GaussianSet best;
    double best_loss = 0.0;
    int best_iteration = 0;
    std::vector<double> loss_trace;
};

/// Momentum descent through the differentiable renderer on the render loss
/// over all target views. Attributes move in activated space (logit opacity
/// and color, log scale, normalized quaternion). Best-so-far is returned.
/// Throws DivergenceDetected when the loss leaves the finite range.
FitResult fit_gaussians(const std::vector<Image>& targets, const std::vector<CameraModel>& cams,
                        const GaussianSet& init, const FitConfig& config);

struct AnchorExperimentConfig {
    double perturbation = 0.05;  // meters, applied alternately +/- per view
    int iterations = 150;
    double step = 2e-4;
    double momentum = 0.9;
    bool use_anchor = true;
    LossWeights weights;  // tolerance and lambda3 drive the anchor term
};

struct AnchorExperimentResult {
    double initial_mean_dist = 0.0;  // cross-view landmark distance before fitting
    double final_mean_dist = 0.0;
    std::vector<double> loss_trace;
};

/// Perturbs each view's landmark depths along their rays and descends the
/// per-view self render loss, optionally with the anchor landmark term.
/// Exercises the anchor gradients end to end: without the anchor the
/// photometric loss barely constrains along-ray depth.
AnchorExperimentResult run_anchor_experiment(const SyntheticScene& scene,
                                             const AnchorExperimentConfig& config);

}  // namespace evasplat
