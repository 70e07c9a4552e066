#include <algorithm>
#include <cmath>
#include <vector>

#include "evasplat/parallel.hpp"
#include "evasplat/projection.hpp"
#include "evasplat/rasterizer.hpp"
#include "rasterizer_internal.hpp"

namespace evasplat {

namespace {

using detail::Splat;
using detail::SplatFrame;

/// Per-gaussian screen-space adjoints accumulated over pixels. The chain
/// down to 3D attributes is shared across pixels and applied once at the end.
struct ScreenAdjoint {
    Eigen::Vector2d d_mean = Eigen::Vector2d::Zero();
    Eigen::Matrix2d d_conic = Eigen::Matrix2d::Zero();  // symmetric
    double d_opacity = 0.0;
    double d_depth = 0.0;
    Eigen::Vector3d d_color = Eigen::Vector3d::Zero();
    Eigen::Matrix<double, kFeatureDim, 1> d_feature =
        Eigen::Matrix<double, kFeatureDim, 1>::Zero();
    bool touched = false;
};

struct Contributor {
    std::uint32_t splat;  // index into the sorted splat list
    double alpha;
    double trans;  // transmittance before this contribution
};

inline double plane_at(const Image& img, int y, int x, int c) {
    return img.data.empty() ? 0.0 : static_cast<double>(img.at(y, x, c));
}

/// Walks one pixel forward then backward, accumulating screen-space adjoints.
void pixel_backward(const GaussianSet& gaussians, const std::vector<Splat>& splats,
                    const std::vector<std::uint32_t>& bin, int y, int x,
                    const Eigen::Vector3d& background, const RenderAdjoint& d_target,
                    std::vector<Contributor>& scratch, std::vector<ScreenAdjoint>& adj) {
    const double px = x + 0.5, py = y + 0.5;

    scratch.clear();
    double trans = 1.0;
    double weight_sum = 0.0;
    double depth_num = 0.0;
    for (const std::uint32_t si : bin) {
        const Splat& s = splats[si];
        const double alpha = detail::splat_alpha(s, px, py);
        if (alpha < kAlphaSkip) continue;
        const double test_t = trans * (1.0 - alpha);
        if (test_t < kTransmittanceStop) break;
        scratch.push_back({si, alpha, trans});
        const double wgt = alpha * trans;
        weight_sum += wgt;
        depth_num += wgt * s.depth;
        trans = test_t;
    }

    Eigen::Vector3d dc;
    dc << plane_at(d_target.d_color, y, x, 0), plane_at(d_target.d_color, y, x, 1),
        plane_at(d_target.d_color, y, x, 2);
    const double dd = plane_at(d_target.d_blended_depth, y, x, 0);
    const double dt = plane_at(d_target.d_final_transmittance, y, x, 0);

    bool any_feat = !d_target.d_feature.data.empty();
    if (scratch.empty()) return;

    // blended_depth = depth_num / weight_sum
    double d_num = 0.0, d_wsum = 0.0;
    if (weight_sum > 0.0 && dd != 0.0) {
        d_num = dd / weight_sum;
        d_wsum = -dd * depth_num / (weight_sum * weight_sum);
    }

    // tail collects every term hit by -1/(1-alpha_k): later weights, the
    // background through the final transmittance, and the transmittance
    // output itself.
    double tail = (dc.dot(background) + dt) * trans;
    for (std::size_t r = scratch.size(); r-- > 0;) {
        const Contributor& e = scratch[r];
        const Splat& s = splats[e.splat];
        const std::size_t g = s.index;
        ScreenAdjoint& a = adj[g];
        a.touched = true;

        const double wgt = e.alpha * e.trans;
        // dL/d w_k
        double g_k = d_wsum + d_num * s.depth;
        for (int c = 0; c < 3; ++c) {
            g_k += dc[c] * gaussians.colors[3 * g + c];
            a.d_color[c] += wgt * dc[c];
        }
        if (any_feat) {
            for (int f = 0; f < kFeatureDim; ++f) {
                const double df = plane_at(d_target.d_feature, y, x, f);
                g_k += df * gaussians.features[kFeatureDim * g + f];
                a.d_feature[f] += wgt * df;
            }
        }
        a.d_depth += wgt * d_num;

        const double d_alpha = g_k * e.trans - tail / (1.0 - e.alpha);
        tail += g_k * wgt;

        // alpha = min(kAlphaClamp, opacity * gauss); zero slope when clamped.
        const double gauss = e.alpha / s.opacity;
        if (s.opacity * gauss >= kAlphaClamp) continue;
        a.d_opacity += d_alpha * gauss;
        const double d_gauss = d_alpha * s.opacity;

        // gauss = exp(-q/2), q = d^T conic d
        const double dq = -0.5 * gauss * d_gauss;
        const Eigen::Vector2d delta(px - s.mean.x(), py - s.mean.y());
        const Eigen::Vector2d cd = s.conic * delta;
        a.d_mean -= dq * 2.0 * cd;
        a.d_conic += dq * (delta * delta.transpose());
    }
}

}  // namespace

GradientBundle render_backward(const GaussianSet& gaussians, const CameraModel& cam,
                               const Eigen::Vector3d& background, const RenderAdjoint& d_target) {
    if (cam.width() > kMaxImageDim || cam.height() > kMaxImageDim)
        throw Error(errc::kImageTooLarge, "camera dimensions exceed the rasterizer limit");
    gaussians.validate();

    const int h = cam.height();
    const int w = cam.width();
    auto check_plane = [&](const Image& img, int c, const char* name) {
        if (!img.data.empty() && !(img.height == h && img.width == w && img.channels == c))
            throw Error(errc::kShapeMismatch, std::string("adjoint plane ") + name +
                                                  " does not match the render target shape");
    };
    check_plane(d_target.d_color, 3, "d_color");
    check_plane(d_target.d_feature, kFeatureDim, "d_feature");
    check_plane(d_target.d_blended_depth, 1, "d_blended_depth");
    check_plane(d_target.d_final_transmittance, 1, "d_final_transmittance");

    std::vector<SplatFrame> frames;
    const std::vector<Splat> splats = detail::project_and_sort(gaussians, cam, &frames);
    const detail::TileBins bins = detail::bin_to_tiles(splats, w, h);

    const std::size_t n = gaussians.size();
    const std::int64_t tile_count = static_cast<std::int64_t>(bins.bins.size());

    // Per-tile partials reduced in tile order keep the result deterministic
    // under any worker count.
    std::vector<std::vector<ScreenAdjoint>> partials(
        static_cast<std::size_t>(tile_count));

    parallel_for(0, tile_count, [&](std::int64_t lo, std::int64_t hi) {
        std::vector<Contributor> scratch;
        for (std::int64_t tile = lo; tile < hi; ++tile) {
            const auto& bin = bins.bins[static_cast<std::size_t>(tile)];
            if (bin.empty()) continue;
            auto& adj = partials[static_cast<std::size_t>(tile)];
            adj.assign(n, ScreenAdjoint{});
            const int tx = static_cast<int>(tile) % bins.tiles_x;
            const int ty = static_cast<int>(tile) / bins.tiles_x;
            const int px1 = std::min(w, (tx + 1) * kTileSize);
            const int py1 = std::min(h, (ty + 1) * kTileSize);
            for (int y = ty * kTileSize; y < py1; ++y)
                for (int x = tx * kTileSize; x < px1; ++x)
                    pixel_backward(gaussians, splats, bin, y, x, background, d_target, scratch,
                                   adj);
        }
    });

    std::vector<ScreenAdjoint> total(n);
    for (const auto& part : partials) {
        if (part.empty()) continue;
        for (std::size_t g = 0; g < n; ++g) {
            if (!part[g].touched) continue;
            ScreenAdjoint& t = total[g];
            t.touched = true;
            t.d_mean += part[g].d_mean;
            t.d_conic += part[g].d_conic;
            t.d_opacity += part[g].d_opacity;
            t.d_depth += part[g].d_depth;
            t.d_color += part[g].d_color;
            t.d_feature += part[g].d_feature;
        }
    }

    // Chain from screen space to the 3D attributes.
    GradientBundle grad(n);
    const Eigen::Matrix3d& rot = cam.world_to_camera().rotation;

    for (std::size_t g = 0; g < n; ++g) {
        const ScreenAdjoint& a = total[g];
        if (!a.touched) continue;

        grad.d_opacity[g] = a.d_opacity;
        for (int c = 0; c < 3; ++c) grad.d_color[3 * g + c] = a.d_color[c];
        for (int f = 0; f < kFeatureDim; ++f) grad.d_feature[kFeatureDim * g + f] = a.d_feature[f];

        const SplatFrame& fr = frames[g];
        const double fx = cam.fx(), fy = cam.fy();
        const double x_c = fr.cam_point.x(), y_c = fr.cam_point.y(), z_c = fr.cam_point.z();
        const double inv_z = 1.0 / z_c;

        // conic = cov^{-1}: d_cov = -conic * d_conic * conic (all symmetric).
        const Eigen::Matrix2d conic = [&] {
            Eigen::Matrix2d cov = fr.jw * fr.cov3 * fr.jw.transpose();
            cov(0, 0) += kCovRegularization;
            cov(1, 1) += kCovRegularization;
            const double det = cov(0, 0) * cov(1, 1) - cov(0, 1) * cov(1, 0);
            Eigen::Matrix2d ic;
            ic << cov(1, 1) / det, -cov(0, 1) / det, -cov(0, 1) / det, cov(0, 0) / det;
            return ic;
        }();
        const Eigen::Matrix2d d_cov = -conic * a.d_conic * conic;

        // cov = (J W) cov3 (J W)^T + reg: both factors chain.
        const Eigen::Matrix3d d_cov3 = fr.jw.transpose() * d_cov * fr.jw;
        const Eigen::Matrix<double, 2, 3> d_jw = (d_cov + d_cov.transpose()) * fr.jw * fr.cov3;
        const Eigen::Matrix<double, 2, 3> d_jac = d_jw * rot.transpose();

        // J entries depend on the camera-frame point.
        Eigen::Vector3d d_cam = Eigen::Vector3d::Zero();
        d_cam.x() += d_jac(0, 2) * (-fx * inv_z * inv_z);
        d_cam.y() += d_jac(1, 2) * (-fy * inv_z * inv_z);
        d_cam.z() += d_jac(0, 0) * (-fx * inv_z * inv_z) + d_jac(1, 1) * (-fy * inv_z * inv_z) +
                     d_jac(0, 2) * (2.0 * fx * x_c * inv_z * inv_z * inv_z) +
                     d_jac(1, 2) * (2.0 * fy * y_c * inv_z * inv_z * inv_z);

        // mean_2d = (fx X/Z + cx, fy Y/Z + cy)
        d_cam.x() += a.d_mean.x() * fx * inv_z;
        d_cam.y() += a.d_mean.y() * fy * inv_z;
        d_cam.z() += -a.d_mean.x() * fx * x_c * inv_z * inv_z -
                     a.d_mean.y() * fy * y_c * inv_z * inv_z;

        // blended depth reads Z directly.
        d_cam.z() += a.d_depth;

        const Eigen::Vector3d d_pos = rot.transpose() * d_cam;
        for (int k = 0; k < 3; ++k) grad.d_position[3 * g + k] = d_pos[k];

        // cov3 = M M^T, M = R diag(s)
        const Eigen::Vector4d q_raw = gaussians.quaternion(g);
        const Eigen::Vector3d scale = gaussians.scale(g);
        const Eigen::Matrix3d rot_g = quaternion_to_rotation(q_raw);
        const Eigen::Matrix3d m = rot_g * scale.asDiagonal();
        const Eigen::Matrix3d d_m = (d_cov3 + d_cov3.transpose()) * m;

        for (int k = 0; k < 3; ++k)
            grad.d_scale[3 * g + k] = rot_g.col(k).dot(d_m.col(k));
        const Eigen::Matrix3d d_rot = d_m * scale.asDiagonal();

        // rotation -> normalized quaternion
        const double norm = q_raw.norm();
        const Eigen::Vector4d qh = q_raw / norm;
        const double qw = qh[0], qx = qh[1], qy = qh[2], qz = qh[3];
        Eigen::Vector4d d_qh;
        // dR/dw
        d_qh[0] = 2.0 * (d_rot(0, 1) * -qz + d_rot(0, 2) * qy + d_rot(1, 0) * qz +
                         d_rot(1, 2) * -qx + d_rot(2, 0) * -qy + d_rot(2, 1) * qx);
        // dR/dx
        d_qh[1] = 2.0 * (d_rot(0, 1) * qy + d_rot(0, 2) * qz + d_rot(1, 0) * qy +
                         d_rot(1, 1) * -2.0 * qx + d_rot(1, 2) * -qw + d_rot(2, 0) * qz +
                         d_rot(2, 1) * qw + d_rot(2, 2) * -2.0 * qx);
        // dR/dy
        d_qh[2] = 2.0 * (d_rot(0, 0) * -2.0 * qy + d_rot(0, 1) * qx + d_rot(0, 2) * qw +
                         d_rot(1, 0) * qx + d_rot(1, 2) * qz + d_rot(2, 0) * -qw +
                         d_rot(2, 1) * qz + d_rot(2, 2) * -2.0 * qy);
        // dR/dz
        d_qh[3] = 2.0 * (d_rot(0, 0) * -2.0 * qz + d_rot(0, 1) * -qw + d_rot(0, 2) * qx +
                         d_rot(1, 0) * qw + d_rot(1, 1) * -2.0 * qz + d_rot(1, 2) * qy +
                         d_rot(2, 0) * qx + d_rot(2, 1) * qy);
        const Eigen::Vector4d d_q = (d_qh - qh * qh.dot(d_qh)) / norm;
        for (int k = 0; k < 4; ++k) grad.d_quaternion[4 * g + k] = d_q[k];
    }
    return grad;
}

}  // namespace evasplat
