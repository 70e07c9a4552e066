#include "evasplat/losses.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace evasplat {

void LossWeights::validate() const {
    for (double v : {lambda_render, lambda_refine, lambda1, lambda2, lambda3, lambda_opacity,
                     lambda_scale, tolerance})
        if (!(v >= 0.0) || !std::isfinite(v))
            throw Error(errc::kBadConfig, "loss weights must be finite and >= 0");
}

ScalarWithGrad depth_loss(const DepthMap& pred, const DepthMap& gt) {
    if (pred.width != gt.width || pred.height != gt.height)
        throw Error(errc::kShapeMismatch, "depth map shapes differ");

    ScalarWithGrad out;
    out.grad.assign(gt.values.size(), 0.0);
    std::size_t count = 0;
    for (std::size_t i = 0; i < gt.values.size(); ++i)
        if (gt.mask[i]) ++count;
    if (count == 0) throw Error(errc::kEmptyMask, "no masked-in pixels in the depth loss");

    const double inv = 1.0 / static_cast<double>(count);
    for (std::size_t i = 0; i < gt.values.size(); ++i) {
        if (!gt.mask[i]) continue;
        const double d = static_cast<double>(pred.values[i]) - gt.values[i];
        out.value += d * d * inv;
        out.grad[i] = 2.0 * d * inv;
    }
    return out;
}

ScalarWithGrad depth_loss(const PositionMap& pred, const PositionMap& gt) {
    if (pred.width != gt.width || pred.height != gt.height)
        throw Error(errc::kShapeMismatch, "position map shapes differ");

    ScalarWithGrad out;
    out.grad.assign(gt.positions.size() * 3, 0.0);
    std::size_t count = 0;
    for (std::size_t i = 0; i < gt.positions.size(); ++i) {
        if (!gt.mask[i]) continue;
        if (!pred.mask[i])
            throw Error(errc::kMaskMismatch, "prediction not masked-in at a ground-truth pixel");
        ++count;
    }
    if (count == 0) throw Error(errc::kEmptyMask, "no masked-in pixels in the depth loss");

    const double inv = 1.0 / static_cast<double>(3 * count);
    for (std::size_t i = 0; i < gt.positions.size(); ++i) {
        if (!gt.mask[i]) continue;
        for (int k = 0; k < 3; ++k) {
            const double d = pred.positions[i][k] - gt.positions[i][k];
            out.value += d * d * inv;
            out.grad[3 * i + k] = 2.0 * d * inv;
        }
    }
    return out;
}

ScalarWithGrad render_loss(const Image& pred, const Image& gt, double lambda) {
    require_same_shape(pred, gt);
    ScalarWithGrad out;
    out.grad.assign(pred.data.size(), 0.0);

    const double inv = 1.0 / static_cast<double>(pred.data.size());
    double sq = 0.0;
    for (std::size_t i = 0; i < pred.data.size(); ++i) {
        const double d = static_cast<double>(pred.data[i]) - gt.data[i];
        sq += d * d;
        out.grad[i] = 2.0 * d * inv;
    }
    out.value = sq * inv;

    if (lambda != 0.0) {
        const SsimResult s = ssim_with_gradient(pred, gt);
        out.value += lambda * (1.0 - s.value);
        for (std::size_t i = 0; i < out.grad.size(); ++i) out.grad[i] -= lambda * s.d_a[i];
    }
    return out;
}

namespace {

double camera_depth_of(const CameraModel& cam, const Eigen::Vector3d& world) {
    return cam.world_to_camera().apply(world).z();
}

}  // namespace

AnchorLossResult anchor_loss(const std::vector<GaussianSet>& sets,
                             const std::vector<CameraModel>& cams,
                             const std::vector<PositionMap>& pos_maps,
                             const LandmarkSet& landmarks, const LossWeights& weights) {
    weights.validate();
    const std::size_t n_views = sets.size();
    if (cams.size() != n_views || pos_maps.size() != n_views)
        throw Error(errc::kShapeMismatch, "sets, cameras and position maps must align per view");

    AnchorLossResult out;
    out.d_opacity.resize(n_views);
    out.d_scale.resize(n_views);
    out.d_depth.resize(n_views);

    // Opacity entropy and scale shrinkage over every gaussian of every view.
    for (std::size_t v = 0; v < n_views; ++v) {
        const GaussianSet& s = sets[v];
        out.d_opacity[v].assign(s.size(), 0.0);
        out.d_scale[v].assign(s.size() * 3, 0.0);
        out.d_depth[v].assign(pos_maps[v].positions.size(), 0.0);

        for (std::size_t i = 0; i < s.size(); ++i) {
            const double o = std::clamp(static_cast<double>(s.opacities[i]), 1e-12, 1.0);
            out.opacity_term += -o * std::log(o);
            if (s.opacities[i] > 1e-12)
                out.d_opacity[v][i] = weights.lambda_opacity * (-(std::log(o) + 1.0));

            const Eigen::Vector3d sc = s.scale(i);
            const double norm = sc.norm();
            out.scale_term += norm;
            if (norm > 1e-12)
                for (int k = 0; k < 3; ++k)
                    out.d_scale[v][3 * i + k] = weights.lambda_scale * sc[k] / norm;
        }
    }

    // Landmark term: unproject each observation through its position-map
    // depth at the landmark pixel, then penalize cross-view disagreement.
    struct Obs {
        std::size_t view;
        std::size_t pixel;
        Eigen::Vector3d point;      // unprojected at the continuous landmark coords
        Eigen::Vector3d d_point_dd; // derivative of the point w.r.t. its depth
    };
    std::map<int, std::vector<Obs>> by_id;
    for (const LandmarkObservation& lm : landmarks.items) {
        if (lm.view_id < 0 || static_cast<std::size_t>(lm.view_id) >= n_views)
            throw Error(errc::kShapeMismatch, "landmark view_id out of range");
        const std::size_t v = static_cast<std::size_t>(lm.view_id);
        const PositionMap& pm = pos_maps[v];
        const CameraModel& cam = cams[v];
        const int px = std::clamp(static_cast<int>(std::floor(lm.u)), 0, pm.width - 1);
        const int py = std::clamp(static_cast<int>(std::floor(lm.v)), 0, pm.height - 1);
        const std::size_t pixel = static_cast<std::size_t>(py) * pm.width + px;
        if (!pm.mask[pixel]) continue;

        const double depth = camera_depth_of(cam, pm.positions[pixel]);
        if (!(depth > 0.0)) continue;
        Obs obs;
        obs.view = v;
        obs.pixel = pixel;
        obs.point = unproject(cam, lm.u, lm.v, depth);
        const Eigen::Vector3d dir((lm.u - cam.cx()) / cam.fx(), (lm.v - cam.cy()) / cam.fy(), 1.0);
        obs.d_point_dd = cam.world_to_camera().rotation.transpose() * dir;
        by_id[lm.landmark_id].push_back(obs);
    }

    std::size_t pair_count = 0;
    for (const auto& [id, group] : by_id) {
        (void)id;
        for (std::size_t a = 0; a < group.size(); ++a) {
            for (std::size_t b = a + 1; b < group.size(); ++b) {
                if (group[a].view == group[b].view) continue;
                ++pair_count;
                const Eigen::Vector3d diff = group[a].point - group[b].point;
                const double dist = diff.norm();

                double term;
                bool active;  // gradient flows only when the distance exceeds t
                if (weights.hinge_tolerance) {
                    active = dist > weights.tolerance;
                    term = active ? dist - weights.tolerance : 0.0;
                } else {
                    active = dist > weights.tolerance;
                    term = active ? dist : weights.tolerance;
                }
                out.landmark_term += term;
                if (active && dist > 1e-12) {
                    const Eigen::Vector3d dir = diff / dist;
                    out.d_depth[group[a].view][group[a].pixel] += dir.dot(group[a].d_point_dd);
                    out.d_depth[group[b].view][group[b].pixel] -= dir.dot(group[b].d_point_dd);
                }
            }
        }
    }

    if (pair_count == 0) {
        if (!landmarks.items.empty())
            out.warning = "NoMatchedLandmarks: landmark term skipped, regularizers still apply";
        out.landmarks_matched = false;
    } else {
        out.landmarks_matched = true;
    }

    out.value = weights.lambda_opacity * out.opacity_term + weights.lambda_scale * out.scale_term +
                out.landmark_term;
    return out;
}

double total_loss(const LossComponents& components, const LossWeights& weights) {
    weights.validate();
    for (double v : {components.depth, components.render, components.refine, components.anchor})
        if (!std::isfinite(v))
            throw Error(errc::kNonFiniteComponent, "loss component is not finite");
    return components.depth + weights.lambda1 * components.render +
           weights.lambda2 * components.refine + weights.lambda3 * components.anchor;
}

}  // namespace evasplat
