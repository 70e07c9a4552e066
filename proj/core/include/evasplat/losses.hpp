#pragma once

#include <string>
#include <vector>

#include "evasplat/camera.hpp"
#include "evasplat/gaussian_set.hpp"
#include "evasplat/image.hpp"
#include "evasplat/metrics.hpp"

namespace evasplat {

struct LossWeights {
    double lambda_render = 0.2;   // SSIM weight inside the render loss
    double lambda_refine = 0.2;   // SSIM weight inside the refine loss
    double lambda1 = 1.0;         // render term in the total loss
    double lambda2 = 1.0;         // refine term
    double lambda3 = 0.1;         // anchor term
    double lambda_opacity = 0.01;
    double lambda_scale = 0.01;
    double tolerance = 0.005;     // anchor distance floor t, meters
    bool hinge_tolerance = false; // max{Dist - t, 0} instead of max{Dist, t}

    void validate() const;
};

struct ScalarWithGrad {
    double value = 0.0;
    std::vector<double> grad;  // with respect to the first argument
};

/// MSE over the ground-truth foreground mask; gradient per depth entry
/// (zero outside the mask). Throws EmptyMask when nothing is masked in.
ScalarWithGrad depth_loss(const DepthMap& pred, const DepthMap& gt);

/// Position-map flavor: entry-mean over masked-in 3-vectors. Both maps must
/// share the mask. Gradient laid out H*W*3.
ScalarWithGrad depth_loss(const PositionMap& pred, const PositionMap& gt);

/// MSE + lambda*(1 - SSIM). Gradient with respect to pred, H*W*C entries.
/// The refine loss is this same operation applied to the refined image.
ScalarWithGrad render_loss(const Image& pred, const Image& gt, double lambda);

struct LandmarkObservation {
    int view_id = 0;
    int landmark_id = 0;
    double u = 0.0;  // pixel x, continuous
    double v = 0.0;  // pixel y, continuous
};

struct LandmarkSet {
    std::vector<LandmarkObservation> items;
};

struct AnchorLossResult {
    double value = 0.0;          // weighted opacity + scale terms plus the landmark term
    double opacity_term = 0.0;   // sum |O log O|, unweighted
    double scale_term = 0.0;     // sum ||S||_2, unweighted
    double landmark_term = 0.0;  // sum over pairs of max{Dist, t}
    bool landmarks_matched = false;
    std::string warning;

    std::vector<std::vector<double>> d_opacity;  // per view, N
    std::vector<std::vector<double>> d_scale;    // per view, N*3
    std::vector<std::vector<double>> d_depth;    // per view, H*W (landmark pixels only)
};

/// Eq-style anchor regularizer: opacity entropy + scale shrinkage over all
/// gaussians of every view, plus the cross-view landmark term. Landmark
/// distances unproject each view's landmark pixel through the depth implied
/// by its position map; gradients flow to those depth entries.
AnchorLossResult anchor_loss(const std::vector<GaussianSet>& sets,
                             const std::vector<CameraModel>& cams,
                             const std::vector<PositionMap>& pos_maps,
                             const LandmarkSet& landmarks, const LossWeights& weights);

struct LossComponents {
    double depth = 0.0;
    double render = 0.0;
    double refine = 0.0;
    double anchor = 0.0;
};

/// depth + lambda1*render + lambda2*refine + lambda3*anchor.
double total_loss(const LossComponents& components, const LossWeights& weights);

}  // namespace evasplat
