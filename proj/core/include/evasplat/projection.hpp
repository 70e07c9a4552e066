#pragma once

#include <Eigen/Core>

#include "evasplat/camera.hpp"

namespace evasplat {

/// Screen-space footprint of one Gaussian.
struct ProjectedGaussian {
    Eigen::Vector2d mean_2d;   // pixels
    Eigen::Matrix2d cov_2d;    // pixels^2, regularized, positive definite
    double depth = 0.0;        // camera-frame Z, meters
    double radius = 0.0;       // 3-sigma bound, pixels
};

/// Screen-space covariance floor added to every projected Gaussian.
inline constexpr double kCovRegularization = 0.3;
/// Gaussians closer than this to the camera plane are culled.
inline constexpr double kNearPlane = 1e-4;

/// Rotation matrix of a (w,x,y,z) quaternion, normalized internally.
/// Throws ZeroQuaternion when the norm is ~0.
Eigen::Matrix3d quaternion_to_rotation(const Eigen::Vector4d& quaternion);

/// Sigma = R * diag(scale)^2 * R^T. Eigenvalues equal the squared scales.
Eigen::Matrix3d covariance_3d(const Eigen::Vector3d& scale, const Eigen::Vector4d& quaternion);

/// First-order (EWA) perspective projection of a 3D Gaussian:
/// cov_2d = J * W * Sigma * W^T * J^T + kCovRegularization * I, with W the
/// world->camera rotation and J the projection Jacobian at the position.
/// Throws BehindCamera when camera-frame depth <= kNearPlane.
ProjectedGaussian project_gaussian(const CameraModel& cam, const Eigen::Vector3d& position,
                                   const Eigen::Vector3d& scale,
                                   const Eigen::Vector4d& quaternion);

}  // namespace evasplat
