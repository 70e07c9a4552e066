#include "evasplat/camera.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace evasplat {

namespace {
constexpr double kMinProjectDepth = 1e-9;
}

CameraModel::CameraModel(double fx, double fy, double cx, double cy, int width, int height,
                         const RigidTransform& world_to_camera)
    : fx_(fx), fy_(fy), cx_(cx), cy_(cy), width_(width), height_(height), w2c_(world_to_camera) {
    if (!(fx > 0.0) || !(fy > 0.0))
        throw Error(errc::kBadConfig, "focal lengths must be positive");
    if (width <= 0 || height <= 0)
        throw Error(errc::kBadConfig, "image size must be positive");
    if (!(cx > 0.0 && cx < width) || !(cy > 0.0 && cy < height))
        throw Error(errc::kBadConfig, "principal point must lie inside the image");

    const Eigen::Matrix3d& r = w2c_.rotation;
    const double ortho = (r * r.transpose() - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff();
    if (ortho > 1e-9 || std::abs(r.determinant() - 1.0) > 1e-9)
        throw Error(errc::kBadConfig, "rotation must be orthonormal with determinant +1");
}

PixelPoint project(const CameraModel& cam, const Eigen::Vector3d& world_point) {
    const Eigen::Vector3d p = cam.world_to_camera().apply(world_point);
    if (!(p.z() > kMinProjectDepth))
        throw Error(errc::kPointBehindCamera,
                    "camera-frame depth " + std::to_string(p.z()) + " <= 1e-9");
    return {cam.fx() * p.x() / p.z() + cam.cx(), cam.fy() * p.y() / p.z() + cam.cy(), p.z()};
}

Eigen::Vector3d unproject(const CameraModel& cam, double u, double v, double depth) {
    if (!(depth > 0.0))
        throw Error(errc::kNonPositiveDepth, "depth " + std::to_string(depth) + " <= 0");
    const Eigen::Vector3d cam_point((u - cam.cx()) / cam.fx() * depth,
                                    (v - cam.cy()) / cam.fy() * depth, depth);
    return cam.camera_to_world().apply(cam_point);
}

void DepthMap::validate() const {
    const std::size_t n = static_cast<std::size_t>(height) * width;
    if (values.size() != n || mask.size() != n)
        throw Error(errc::kDimensionMismatch, "depth map storage does not match its dimensions");
    for (std::size_t i = 0; i < n; ++i) {
        if (mask[i] && !(std::isfinite(values[i]) && values[i] > 0.0f))
            throw Error(errc::kNonPositiveDepth,
                        "masked-in depth at index " + std::to_string(i) + " is not finite positive");
    }
}

PositionMap::PositionMap(int h, int w)
    : height(h), width(w),
      positions(static_cast<std::size_t>(h) * w,
                Eigen::Vector3d::Constant(std::numeric_limits<double>::quiet_NaN())),
      mask(static_cast<std::size_t>(h) * w, 0) {}

PositionMap depth_to_positions(const CameraModel& cam, const DepthMap& depth) {
    if (depth.width != cam.width() || depth.height != cam.height())
        throw Error(errc::kDimensionMismatch,
                    "depth map " + std::to_string(depth.width) + "x" + std::to_string(depth.height) +
                        " does not match camera " + std::to_string(cam.width()) + "x" +
                        std::to_string(cam.height()));
    depth.validate();

    PositionMap out(depth.height, depth.width);
    for (int y = 0; y < depth.height; ++y) {
        for (int x = 0; x < depth.width; ++x) {
            const std::size_t i = static_cast<std::size_t>(y) * depth.width + x;
            if (!depth.mask[i]) continue;
            out.positions[i] = unproject(cam, x + 0.5, y + 0.5, depth.values[i]);
            out.mask[i] = 1;
        }
    }
    return out;
}

}  // namespace evasplat
