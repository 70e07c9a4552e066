#include "evasplat/scene.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "evasplat/rng.hpp"

namespace evasplat {

CameraModel ring_camera(const SceneConfig& config, int view) {
    const double theta = view * config.delta_deg * M_PI / 180.0;
    const Eigen::Vector3d center(config.ring_radius * std::sin(theta), 0.0,
                                 config.ring_radius * std::cos(theta));

    const Eigen::Vector3d z = (-center).normalized();  // optical axis, toward the blob
    const Eigen::Vector3d up(0.0, 1.0, 0.0);
    const Eigen::Vector3d x = up.cross(z).normalized();
    const Eigen::Vector3d y = z.cross(x);

    RigidTransform w2c;
    w2c.rotation.row(0) = x;
    w2c.rotation.row(1) = y;
    w2c.rotation.row(2) = z;
    w2c.translation = -(w2c.rotation * center);

    const double size = config.image_size;
    const double f = 0.5 * size / std::tan(0.5 * config.fov_deg * M_PI / 180.0);
    return CameraModel(f, f, 0.5 * size, 0.5 * size, config.image_size, config.image_size, w2c);
}

SyntheticScene generate_scene(const SceneConfig& config) {
    if (config.n_views < 2)
        throw Error(errc::kInvalidRing, "a scene needs at least two views");
    if (config.delta_deg * (config.n_views - 1) >= 360.0)
        throw Error(errc::kInvalidRing, "ring spans " +
                                            std::to_string(config.delta_deg * (config.n_views - 1)) +
                                            " degrees");

    SyntheticScene scene;
    scene.config = config;

    Rng rng(config.seed);
    Rng pos_rng = rng.fork(1), attr_rng = rng.fork(2);

    const std::size_t n = static_cast<std::size_t>(config.n_gaussians);
    GaussianSet& gt = scene.ground_truth;
    gt.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        // Near-opaque bumpy shell: a solid subject with a clean front surface,
        // rather than a translucent cloud whose blended depth floats between
        // layers.
        Eigen::Vector3d dir(pos_rng.normal(), pos_rng.normal(), pos_rng.normal());
        while (dir.squaredNorm() < 1e-12)
            dir = {pos_rng.normal(), pos_rng.normal(), pos_rng.normal()};
        dir.normalize();
        gt.set_position(i, dir * (config.blob_radius * pos_rng.uniform(0.88, 1.0)));

        gt.opacities[i] = static_cast<float>(attr_rng.uniform(0.95, 0.99));
        gt.set_scale(i, {attr_rng.uniform(0.10, 0.16), attr_rng.uniform(0.10, 0.16),
                         attr_rng.uniform(0.10, 0.16)});
        Eigen::Vector4d q(attr_rng.normal(), attr_rng.normal(), attr_rng.normal(),
                          attr_rng.normal());
        gt.set_quaternion(i, q.normalized());
        gt.set_color(i, {attr_rng.uniform(0.15, 0.9), attr_rng.uniform(0.15, 0.9),
                         attr_rng.uniform(0.15, 0.9)});
        for (int f = 0; f < kFeatureDim; ++f)
            gt.features[kFeatureDim * i + f] =
                f < 3 ? gt.colors[3 * i + f] : static_cast<float>(attr_rng.uniform(0.0, 1.0));
    }

    const int n_landmarks = std::min<int>(config.n_landmarks, static_cast<int>(n));
    for (int k = 0; k < n_landmarks; ++k) scene.landmark_gaussians.push_back(k);

    for (int v = 0; v < config.n_views; ++v) {
        const CameraModel cam = ring_camera(config, v);
        RenderTarget rt = oracle_render(gt, cam, config.background);

        DepthMap depth(cam.height(), cam.width());
        Image alpha_plane(cam.height(), cam.width(), 1);
        for (int y = 0; y < cam.height(); ++y) {
            for (int x = 0; x < cam.width(); ++x) {
                const float alpha = 1.0f - rt.final_transmittance.at(y, x, 0);
                const float d = rt.blended_depth.at(y, x, 0);
                alpha_plane.at(y, x, 0) = alpha;
                if (alpha >= static_cast<float>(config.mask_alpha) && d > 0.0f) {
                    depth.values[static_cast<std::size_t>(y) * cam.width() + x] = d;
                    depth.mask[static_cast<std::size_t>(y) * cam.width() + x] = 1;
                }
            }
        }

        for (int k = 0; k < n_landmarks; ++k) {
            try {
                const PixelPoint pp = project(cam, gt.position(scene.landmark_gaussians[k]));
                if (pp.u >= 0.0 && pp.u < cam.width() && pp.v >= 0.0 && pp.v < cam.height())
                    scene.landmarks.items.push_back({v, k, pp.u, pp.v});
            } catch (const Error&) {
                // behind this camera; not annotated in this view
            }
        }

        scene.cameras.push_back(cam);
        scene.images.push_back(std::move(rt.color));
        scene.depths.push_back(std::move(depth));
        scene.alphas.push_back(std::move(alpha_plane));
    }
    return scene;
}

std::vector<GaussianSet> lift_views(const std::vector<Image>& images,
                                    const std::vector<PositionMap>& position_maps,
                                    const std::vector<CameraModel>& cams,
                                    const AttributeSource& source) {
    if (images.size() != position_maps.size() || images.size() != cams.size())
        throw Error(errc::kMaskMismatch, "per-view inputs must align");
    std::vector<GaussianSet> sets;
    sets.reserve(images.size());
    for (std::size_t v = 0; v < images.size(); ++v)
        sets.push_back(lift_view(images[v], position_maps[v], cams[v], source));
    return sets;
}

GaussianSet lift_view(const Image& image, const PositionMap& position_map, const CameraModel& cam,
                      const AttributeSource& source) {
    if (image.height != position_map.height || image.width != position_map.width ||
        image.channels != 3)
        throw Error(errc::kMaskMismatch, "image and position map shapes disagree");
    if (source.kind == AttributeSource::Kind::kDominant &&
        (source.ground_truth == nullptr || source.dominant == nullptr ||
         source.dominant->size() != position_map.positions.size()))
        throw Error(errc::kMaskMismatch, "dominant attribute source inputs missing");

    std::size_t count = 0;
    for (const auto m : position_map.mask) count += m ? 1 : 0;

    GaussianSet set(count);
    std::size_t out = 0;
    for (int y = 0; y < position_map.height; ++y) {
        for (int x = 0; x < position_map.width; ++x) {
            const std::size_t pix = static_cast<std::size_t>(y) * position_map.width + x;
            if (!position_map.mask[pix]) continue;
            const Eigen::Vector3d pos = position_map.positions[pix];
            set.set_position(out, pos);
            set.set_color(out, {image.at(y, x, 0), image.at(y, x, 1), image.at(y, x, 2)});

            if (source.kind == AttributeSource::Kind::kDominant &&
                (*source.dominant)[pix] >= 0) {
                const std::size_t g = static_cast<std::size_t>((*source.dominant)[pix]);
                const GaussianSet& gt = *source.ground_truth;
                set.opacities[out] = gt.opacities[g];
                set.set_scale(out, gt.scale(g));
                set.set_quaternion(out, gt.quaternion(g));
                for (int f = 0; f < kFeatureDim; ++f)
                    set.features[kFeatureDim * out + f] = gt.features[kFeatureDim * g + f];
            } else {
                const double depth = cam.world_to_camera().apply(pos).z();
                const double s = source.scale_factor * depth / cam.fx();
                double opacity = source.opacity;
                if (source.alpha)
                    opacity = std::clamp(static_cast<double>(source.alpha->at(y, x, 0)),
                                         1.0 / 255.0, 1.0);
                set.opacities[out] = static_cast<float>(opacity);
                set.set_scale(out, {s, s, s});
                set.set_quaternion(out, {1.0, 0.0, 0.0, 0.0});
                for (int f = 0; f < 3; ++f)
                    set.features[kFeatureDim * out + f] = set.colors[3 * out + f];
            }
            ++out;
        }
    }
    return set;
}

}  // namespace evasplat
