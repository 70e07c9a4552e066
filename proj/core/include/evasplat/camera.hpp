#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <cstdint>
#include <vector>

#include "evasplat/error.hpp"

namespace evasplat {

/// Rigid world->camera transform. x_cam = rotation * x_world + translation.
struct RigidTransform {
    Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
    Eigen::Vector3d translation = Eigen::Vector3d::Zero();

    Eigen::Vector3d apply(const Eigen::Vector3d& p) const { return rotation * p + translation; }
    RigidTransform inverse() const {
        RigidTransform inv;
        inv.rotation = rotation.transpose();
        inv.translation = -(rotation.transpose() * translation);
        return inv;
    }
};

/// Pinhole camera. Intrinsics in pixels, pose stored as world->camera only;
/// camera->world is derived on demand. Immutable after construction.
class CameraModel {
public:
    CameraModel(double fx, double fy, double cx, double cy, int width, int height,
                const RigidTransform& world_to_camera);

    double fx() const { return fx_; }
    double fy() const { return fy_; }
    double cx() const { return cx_; }
    double cy() const { return cy_; }
    int width() const { return width_; }
    int height() const { return height_; }
    const RigidTransform& world_to_camera() const { return w2c_; }
    RigidTransform camera_to_world() const { return w2c_.inverse(); }

    /// Camera center in world coordinates.
    Eigen::Vector3d center() const { return -(w2c_.rotation.transpose() * w2c_.translation); }
    /// Optical axis direction in world coordinates.
    Eigen::Vector3d forward() const { return w2c_.rotation.row(2).transpose(); }

private:
    double fx_, fy_, cx_, cy_;
    int width_, height_;
    RigidTransform w2c_;
};

struct PixelPoint {
    double u;      // pixel x
    double v;      // pixel y
    double depth;  // camera-frame Z, meters
};

/// Perspective projection. Throws PointBehindCamera when camera-frame Z <= 1e-9.
PixelPoint project(const CameraModel& cam, const Eigen::Vector3d& world_point);

/// Right inverse of project. Throws NonPositiveDepth when depth <= 0.
Eigen::Vector3d unproject(const CameraModel& cam, double u, double v, double depth);

/// H x W depth grid, camera-frame Z in meters, with a foreground mask.
/// Masked-in values must be finite and positive.
struct DepthMap {
    int height = 0;
    int width = 0;
    std::vector<float> values;         // H*W
    std::vector<std::uint8_t> mask;    // H*W, nonzero = foreground

    DepthMap() = default;
    DepthMap(int h, int w)
        : height(h), width(w),
          values(static_cast<std::size_t>(h) * w, 0.0f),
          mask(static_cast<std::size_t>(h) * w, 0) {}

    float depth_at(int y, int x) const { return values[static_cast<std::size_t>(y) * width + x]; }
    bool in(int y, int x) const { return mask[static_cast<std::size_t>(y) * width + x] != 0; }

    void validate() const;
};

/// H x W grid of world positions. Masked-out entries hold NaN sentinels and
/// must never be read downstream.
struct PositionMap {
    int height = 0;
    int width = 0;
    std::vector<Eigen::Vector3d> positions;  // H*W
    std::vector<std::uint8_t> mask;          // H*W

    PositionMap() = default;
    PositionMap(int h, int w);

    const Eigen::Vector3d& at(int y, int x) const {
        return positions[static_cast<std::size_t>(y) * width + x];
    }
    bool in(int y, int x) const { return mask[static_cast<std::size_t>(y) * width + x] != 0; }
};

/// Lifts every masked-in pixel (u,v) to unproject(cam, u+0.5, v+0.5, depth).
/// Mask is copied through. Throws DimensionMismatch when sizes disagree.
PositionMap depth_to_positions(const CameraModel& cam, const DepthMap& depth);

}  // namespace evasplat
