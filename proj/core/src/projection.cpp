#include "evasplat/projection.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace evasplat {

Eigen::Matrix3d quaternion_to_rotation(const Eigen::Vector4d& quaternion) {
    const double norm = quaternion.norm();
    if (!(norm > 1e-12))
        throw Error(errc::kZeroQuaternion, "quaternion norm is zero");
    const double w = quaternion[0] / norm;
    const double x = quaternion[1] / norm;
    const double y = quaternion[2] / norm;
    const double z = quaternion[3] / norm;

    Eigen::Matrix3d r;
    r << 1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
         2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
         2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y);
    return r;
}

Eigen::Matrix3d covariance_3d(const Eigen::Vector3d& scale, const Eigen::Vector4d& quaternion) {
    const Eigen::Matrix3d r = quaternion_to_rotation(quaternion);
    const Eigen::Matrix3d m = r * scale.asDiagonal();
    return m * m.transpose();
}

ProjectedGaussian project_gaussian(const CameraModel& cam, const Eigen::Vector3d& position,
                                   const Eigen::Vector3d& scale,
                                   const Eigen::Vector4d& quaternion) {
    const Eigen::Vector3d p = cam.world_to_camera().apply(position);
    if (!(p.z() > kNearPlane))
        throw Error(errc::kBehindCamera, "gaussian depth " + std::to_string(p.z()) +
                                             " behind near plane");

    ProjectedGaussian out;
    out.depth = p.z();
    out.mean_2d = {cam.fx() * p.x() / p.z() + cam.cx(), cam.fy() * p.y() / p.z() + cam.cy()};

    // Projection Jacobian at the gaussian center.
    const double inv_z = 1.0 / p.z();
    Eigen::Matrix<double, 2, 3> jac;
    jac << cam.fx() * inv_z, 0.0, -cam.fx() * p.x() * inv_z * inv_z,
           0.0, cam.fy() * inv_z, -cam.fy() * p.y() * inv_z * inv_z;

    const Eigen::Matrix<double, 2, 3> t = jac * cam.world_to_camera().rotation;
    Eigen::Matrix2d cov = t * covariance_3d(scale, quaternion) * t.transpose();
    cov(0, 0) += kCovRegularization;
    cov(1, 1) += kCovRegularization;
    out.cov_2d = cov;

    // Closed-form eigenvalues of the symmetric 2x2.
    const double mid = 0.5 * (cov(0, 0) + cov(1, 1));
    const double det = cov(0, 0) * cov(1, 1) - cov(0, 1) * cov(1, 0);
    const double disc = std::sqrt(std::max(0.0, mid * mid - det));
    out.radius = 3.0 * std::sqrt(std::max(0.0, mid + disc));
    return out;
}

}  // namespace evasplat
