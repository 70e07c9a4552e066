#pragma once

#include <Eigen/Core>
#include <optional>
#include <vector>

#include "evasplat/camera.hpp"
#include "evasplat/gaussian_set.hpp"
#include "evasplat/image.hpp"
#include "evasplat/projection.hpp"

namespace evasplat {

// Front-to-back alpha blending constants, shared by the tiled path, the
// oracle and the backward pass. All three must mirror each other exactly.
inline constexpr double kAlphaClamp = 0.99;
inline constexpr double kAlphaSkip = 1.0 / 255.0;
inline constexpr double kTransmittanceStop = 1e-4;
inline constexpr int kTileSize = 16;
inline constexpr int kMaxImageDim = 4096;
inline constexpr std::size_t kOracleMaxGaussians = 10000;

struct RenderTarget {
    Image color;                 // H x W x 3, composited over the background
    Image feature;               // H x W x kFeatureDim, composited over zero
    Image blended_depth;         // H x W x 1, alpha-weighted mean depth (meters)
    Image final_transmittance;   // H x W x 1, residual (1 - alpha) product

    RenderTarget() = default;
    RenderTarget(int h, int w)
        : color(h, w, 3), feature(h, w, kFeatureDim), blended_depth(h, w, 1),
          final_transmittance(h, w, 1, 1.0f) {}
};

/// Extra per-pixel accumulators the oracle can expose for invariant checks
/// and attribute lookup.
struct OracleDiagnostics {
    std::vector<double> weight_sum;      // H*W, sum of blend weights alpha_j * T_j
    std::vector<std::int64_t> dominant;  // H*W, gaussian with the largest weight, -1 = none
};

/// Tile-binned, depth-sorted alpha blender. Per-gaussian math in double,
/// per-pixel accumulation in f32. Deterministic: tiles own disjoint pixels
/// and gaussians are walked in global depth order (ties broken by index).
RenderTarget render(const GaussianSet& gaussians, const CameraModel& cam,
                    const Eigen::Vector3d& background);

/// Reference semantics: every gaussian evaluated at every pixel, no tiles,
/// double-precision accumulation. Blending math identical to render().
RenderTarget oracle_render(const GaussianSet& gaussians, const CameraModel& cam,
                           const Eigen::Vector3d& background,
                           OracleDiagnostics* diagnostics = nullptr);

/// The oracle's native double-precision planes. Gradient checks difference
/// these: f32 output rounding would drown central differences.
struct RenderTargetD {
    int height = 0;
    int width = 0;
    std::vector<double> color;                // H*W*3
    std::vector<double> feature;              // H*W*kFeatureDim
    std::vector<double> blended_depth;        // H*W
    std::vector<double> final_transmittance;  // H*W
};

RenderTargetD oracle_render_f64(const GaussianSet& gaussians, const CameraModel& cam,
                                const Eigen::Vector3d& background,
                                OracleDiagnostics* diagnostics = nullptr);

/// Adjoint of render() with respect to every GaussianSet column, including
/// the chain through alpha, the 2D covariance, the projection Jacobian and
/// quaternion normalization. d_target planes may be empty (treated as zero).
struct RenderAdjoint {
    Image d_color;                // H x W x 3
    Image d_feature;              // H x W x kFeatureDim
    Image d_blended_depth;        // H x W x 1
    Image d_final_transmittance;  // H x W x 1
};

GradientBundle render_backward(const GaussianSet& gaussians, const CameraModel& cam,
                               const Eigen::Vector3d& background, const RenderAdjoint& d_target);

}  // namespace evasplat
