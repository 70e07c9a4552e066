#include "evasplat/rasterizer.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "evasplat/parallel.hpp"
#include "evasplat/projection.hpp"
#include "rasterizer_internal.hpp"

namespace evasplat {

namespace detail {

std::vector<Splat> project_and_sort(const GaussianSet& gaussians, const CameraModel& cam,
                                    std::vector<SplatFrame>* frames) {
    const std::size_t n = gaussians.size();
    const Eigen::Matrix3d& w = cam.world_to_camera().rotation;
    const Eigen::Vector3d& t = cam.world_to_camera().translation;

    std::vector<Splat> splats;
    splats.reserve(n);
    if (frames) frames->assign(n, SplatFrame{});

    for (std::size_t i = 0; i < n; ++i) {
        const Eigen::Vector3d p = w * gaussians.position(i) + t;
        if (!(p.z() > kNearPlane)) continue;

        const double inv_z = 1.0 / p.z();
        Eigen::Matrix<double, 2, 3> jac;
        jac << cam.fx() * inv_z, 0.0, -cam.fx() * p.x() * inv_z * inv_z,
               0.0, cam.fy() * inv_z, -cam.fy() * p.y() * inv_z * inv_z;
        const Eigen::Matrix<double, 2, 3> jw = jac * w;
        const Eigen::Matrix3d cov3 = covariance_3d(gaussians.scale(i), gaussians.quaternion(i));

        Splat s;
        s.index = i;
        s.depth = p.z();
        s.mean = {cam.fx() * p.x() * inv_z + cam.cx(), cam.fy() * p.y() * inv_z + cam.cy()};
        s.cov = jw * cov3 * jw.transpose();
        s.cov(0, 0) += kCovRegularization;
        s.cov(1, 1) += kCovRegularization;
        const double det = s.cov(0, 0) * s.cov(1, 1) - s.cov(0, 1) * s.cov(1, 0);
        s.conic << s.cov(1, 1) / det, -s.cov(0, 1) / det, -s.cov(0, 1) / det, s.cov(0, 0) / det;
        s.opacity = gaussians.opacities[i];

        // Largest pixel distance at which alpha can still reach kAlphaSkip,
        // bounded through the max covariance eigenvalue. Pixels farther out
        // fail the per-pixel alpha test in every path.
        const double mid = 0.5 * (s.cov(0, 0) + s.cov(1, 1));
        const double lam_max = mid + std::sqrt(std::max(0.0, mid * mid - det));
        const double gain = 255.0 * s.opacity;
        s.bin_radius = gain > 1.0 ? std::sqrt(2.0 * std::log(gain) * lam_max) + 1.0 : 0.0;

        if (frames) (*frames)[i] = SplatFrame{p, jw, cov3};
        splats.push_back(s);
    }

    std::stable_sort(splats.begin(), splats.end(), [](const Splat& a, const Splat& b) {
        if (a.depth != b.depth) return a.depth < b.depth;
        return a.index < b.index;
    });
    return splats;
}

TileBins bin_to_tiles(const std::vector<Splat>& splats, int width, int height) {
    TileBins bins;
    bins.tiles_x = (width + kTileSize - 1) / kTileSize;
    bins.tiles_y = (height + kTileSize - 1) / kTileSize;
    bins.bins.resize(static_cast<std::size_t>(bins.tiles_x) * bins.tiles_y);

    for (std::uint32_t si = 0; si < splats.size(); ++si) {
        const Splat& s = splats[si];
        if (s.bin_radius <= 0.0) continue;
        const int x0 = std::max(0, static_cast<int>(std::floor(s.mean.x() - s.bin_radius)) - 1);
        const int x1 = std::min(width - 1, static_cast<int>(std::ceil(s.mean.x() + s.bin_radius)));
        const int y0 = std::max(0, static_cast<int>(std::floor(s.mean.y() - s.bin_radius)) - 1);
        const int y1 = std::min(height - 1, static_cast<int>(std::ceil(s.mean.y() + s.bin_radius)));
        if (x0 > x1 || y0 > y1) continue;
        for (int ty = y0 / kTileSize; ty <= y1 / kTileSize; ++ty)
            for (int tx = x0 / kTileSize; tx <= x1 / kTileSize; ++tx)
                bins.bins[static_cast<std::size_t>(ty) * bins.tiles_x + tx].push_back(si);
    }
    return bins;
}

}  // namespace detail

namespace {

void check_render_inputs(const GaussianSet& gaussians, const CameraModel& cam) {
    if (cam.width() > kMaxImageDim || cam.height() > kMaxImageDim)
        throw Error(errc::kImageTooLarge, std::to_string(cam.width()) + "x" +
                                              std::to_string(cam.height()) + " exceeds " +
                                              std::to_string(kMaxImageDim));
    gaussians.validate();
}

}  // namespace

RenderTarget render(const GaussianSet& gaussians, const CameraModel& cam,
                    const Eigen::Vector3d& background) {
    check_render_inputs(gaussians, cam);
    const int h = cam.height();
    const int w = cam.width();
    RenderTarget target(h, w);

    const std::vector<detail::Splat> splats = detail::project_and_sort(gaussians, cam);
    const detail::TileBins bins = detail::bin_to_tiles(splats, w, h);

    const float bg[3] = {static_cast<float>(background.x()), static_cast<float>(background.y()),
                         static_cast<float>(background.z())};

    const std::int64_t tile_count = static_cast<std::int64_t>(bins.bins.size());
    parallel_for(0, tile_count, [&](std::int64_t lo, std::int64_t hi) {
        for (std::int64_t tile = lo; tile < hi; ++tile) {
            const int tx = static_cast<int>(tile) % bins.tiles_x;
            const int ty = static_cast<int>(tile) / bins.tiles_x;
            const auto& bin = bins.bins[static_cast<std::size_t>(tile)];
            const int px0 = tx * kTileSize, px1 = std::min(w, px0 + kTileSize);
            const int py0 = ty * kTileSize, py1 = std::min(h, py0 + kTileSize);

            for (int y = py0; y < py1; ++y) {
                for (int x = px0; x < px1; ++x) {
                    const double px = x + 0.5, py = y + 0.5;
                    // Transmittance stays double so the skip/stop decisions
                    // match the oracle exactly; only the sums are f32.
                    double trans = 1.0;
                    float col[3] = {0, 0, 0};
                    float feat[kFeatureDim] = {0};
                    float depth_num = 0.0f;
                    float weight_sum = 0.0f;

                    for (const std::uint32_t si : bin) {
                        const detail::Splat& s = splats[si];
                        const double alpha = detail::splat_alpha(s, px, py);
                        if (alpha < kAlphaSkip) continue;
                        const double test_t = trans * (1.0 - alpha);
                        if (test_t < kTransmittanceStop) break;
                        const double wgt = alpha * trans;
                        const std::size_t g = s.index;
                        for (int c = 0; c < 3; ++c)
                            col[c] += static_cast<float>(wgt * gaussians.colors[3 * g + c]);
                        for (int f = 0; f < kFeatureDim; ++f)
                            feat[f] += static_cast<float>(wgt * gaussians.features[kFeatureDim * g + f]);
                        depth_num += static_cast<float>(wgt * s.depth);
                        weight_sum += static_cast<float>(wgt);
                        trans = test_t;
                    }

                    for (int c = 0; c < 3; ++c)
                        target.color.at(y, x, c) = col[c] + static_cast<float>(trans) * bg[c];
                    for (int f = 0; f < kFeatureDim; ++f) target.feature.at(y, x, f) = feat[f];
                    target.blended_depth.at(y, x, 0) = weight_sum > 0.0f ? depth_num / weight_sum : 0.0f;
                    target.final_transmittance.at(y, x, 0) = static_cast<float>(trans);
                }
            }
        }
    });
    return target;
}

RenderTargetD oracle_render_f64(const GaussianSet& gaussians, const CameraModel& cam,
                                const Eigen::Vector3d& background,
                                OracleDiagnostics* diagnostics) {
    check_render_inputs(gaussians, cam);
    if (gaussians.size() > kOracleMaxGaussians)
        throw Error(errc::kTooManyGaussiansForOracle,
                    std::to_string(gaussians.size()) + " gaussians exceed the oracle limit");

    const int h = cam.height();
    const int w = cam.width();
    RenderTargetD target;
    target.height = h;
    target.width = w;
    const std::size_t px_count = static_cast<std::size_t>(h) * w;
    target.color.assign(px_count * 3, 0.0);
    target.feature.assign(px_count * kFeatureDim, 0.0);
    target.blended_depth.assign(px_count, 0.0);
    target.final_transmittance.assign(px_count, 1.0);
    if (diagnostics) {
        diagnostics->weight_sum.assign(px_count, 0.0);
        diagnostics->dominant.assign(px_count, -1);
    }

    const std::vector<detail::Splat> splats = detail::project_and_sort(gaussians, cam);

    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const std::size_t pix = static_cast<std::size_t>(y) * w + x;
            const double px = x + 0.5, py = y + 0.5;
            double trans = 1.0;
            double* col = target.color.data() + pix * 3;
            double* feat = target.feature.data() + pix * kFeatureDim;
            double depth_num = 0.0;
            double weight_sum = 0.0;
            double best_weight = 0.0;
            std::int64_t best_index = -1;

            for (const detail::Splat& s : splats) {
                const double alpha = detail::splat_alpha(s, px, py);
                if (alpha < kAlphaSkip) continue;
                const double test_t = trans * (1.0 - alpha);
                if (test_t < kTransmittanceStop) break;
                const double wgt = alpha * trans;
                const std::size_t g = s.index;
                for (int c = 0; c < 3; ++c) col[c] += wgt * gaussians.colors[3 * g + c];
                for (int f = 0; f < kFeatureDim; ++f)
                    feat[f] += wgt * gaussians.features[kFeatureDim * g + f];
                depth_num += wgt * s.depth;
                weight_sum += wgt;
                if (wgt > best_weight) {
                    best_weight = wgt;
                    best_index = static_cast<std::int64_t>(g);
                }
                trans = test_t;
            }

            for (int c = 0; c < 3; ++c) col[c] += trans * background[c];
            target.blended_depth[pix] = weight_sum > 0.0 ? depth_num / weight_sum : 0.0;
            target.final_transmittance[pix] = trans;
            if (diagnostics) {
                diagnostics->weight_sum[pix] = weight_sum;
                diagnostics->dominant[pix] = best_index;
            }
        }
    }
    return target;
}

RenderTarget oracle_render(const GaussianSet& gaussians, const CameraModel& cam,
                           const Eigen::Vector3d& background, OracleDiagnostics* diagnostics) {
    const RenderTargetD full = oracle_render_f64(gaussians, cam, background, diagnostics);
    RenderTarget target(full.height, full.width);
    for (std::size_t i = 0; i < full.color.size(); ++i)
        target.color.data[i] = static_cast<float>(full.color[i]);
    for (std::size_t i = 0; i < full.feature.size(); ++i)
        target.feature.data[i] = static_cast<float>(full.feature[i]);
    for (std::size_t i = 0; i < full.blended_depth.size(); ++i)
        target.blended_depth.data[i] = static_cast<float>(full.blended_depth[i]);
    for (std::size_t i = 0; i < full.final_transmittance.size(); ++i)
        target.final_transmittance.data[i] = static_cast<float>(full.final_transmittance[i]);
    return target;
}

}  // namespace evasplat
