#pragma once

#include <Eigen/Core>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "evasplat/camera.hpp"
#include "evasplat/gaussian_set.hpp"
#include "evasplat/rasterizer.hpp"

namespace evasplat::detail {

/// Screen-space data of one visible gaussian, double precision.
struct Splat {
    std::size_t index = 0;        // index into the GaussianSet
    Eigen::Vector2d mean;         // pixels
    Eigen::Matrix2d cov;          // regularized covariance
    Eigen::Matrix2d conic;        // inverse covariance
    double depth = 0.0;
    double opacity = 0.0;
    double bin_radius = 0.0;      // covers every pixel where alpha >= kAlphaSkip
};

/// Camera-frame intermediates needed by the backward chain.
struct SplatFrame {
    Eigen::Vector3d cam_point;              // (X, Y, Z)
    Eigen::Matrix<double, 2, 3> jw;         // J * W
    Eigen::Matrix3d cov3;                   // world-frame 3D covariance
};

/// Projects visible gaussians (depth > kNearPlane) and sorts them by
/// (depth, index). Gaussians that can never reach alpha >= kAlphaSkIP get
/// bin_radius 0 and are binned nowhere; the per-pixel alpha test makes the
/// oracle skip them identically.
std::vector<Splat> project_and_sort(const GaussianSet& gaussians, const CameraModel& cam,
                                    std::vector<SplatFrame>* frames = nullptr);

/// Tile bins: for each tile, indices into the sorted splat list, in sorted
/// order. Grid is ceil(W/kTileSize) x ceil(H/kTileSize).
struct TileBins {
    int tiles_x = 0;
    int tiles_y = 0;
    std::vector<std::vector<std::uint32_t>> bins;
};

TileBins bin_to_tiles(const std::vector<Splat>& splats, int width, int height);

inline double splat_alpha(const Splat& s, double px, double py) {
    const double dx = px - s.mean.x();
    const double dy = py - s.mean.y();
    const double q = s.conic(0, 0) * dx * dx + 2.0 * s.conic(0, 1) * dx * dy +
                     s.conic(1, 1) * dy * dy;
    const double alpha = s.opacity * std::exp(-0.5 * q);
    return alpha < kAlphaClamp ? alpha : kAlphaClamp;
}

}  // namespace evasplat::detail
