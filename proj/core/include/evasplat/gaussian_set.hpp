#pragma once

#include <Eigen/Core>
#include <cstddef>
#include <vector>

#include "evasplat/error.hpp"

namespace evasplat {

inline constexpr int kFeatureDim = 32;

/// Columnar store of N Gaussians. Quaternions are (w, x, y, z), identity
/// is (1,0,0,0). Columns are contiguous f32 in the same order and layout
/// as the EVGS file format.
struct GaussianSet {
    std::vector<float> positions;    // N*3, world meters
    std::vector<float> opacities;    // N, in [0,1]
    std::vector<float> scales;       // N*3, meters, > 0
    std::vector<float> quaternions;  // N*4, unit norm
    std::vector<float> colors;       // N*3, in [0,1]
    std::vector<float> features;     // N*kFeatureDim

    GaussianSet() = default;
    explicit GaussianSet(std::size_t n) { resize(n); }

    std::size_t size() const { return opacities.size(); }
    bool empty() const { return opacities.empty(); }
    void resize(std::size_t n);

    Eigen::Vector3d position(std::size_t i) const {
        return {positions[3 * i], positions[3 * i + 1], positions[3 * i + 2]};
    }
    Eigen::Vector3d scale(std::size_t i) const {
        return {scales[3 * i], scales[3 * i + 1], scales[3 * i + 2]};
    }
    Eigen::Vector4d quaternion(std::size_t i) const {
        return {quaternions[4 * i], quaternions[4 * i + 1], quaternions[4 * i + 2],
                quaternions[4 * i + 3]};
    }
    Eigen::Vector3d color(std::size_t i) const {
        return {colors[3 * i], colors[3 * i + 1], colors[3 * i + 2]};
    }

    void set_position(std::size_t i, const Eigen::Vector3d& p);
    void set_scale(std::size_t i, const Eigen::Vector3d& s);
    void set_quaternion(std::size_t i, const Eigen::Vector4d& q);
    void set_color(std::size_t i, const Eigen::Vector3d& c);

    /// Checks column lengths and the attribute ranges. Throws
    /// InvalidGaussianSet on the first violation.
    void validate() const;
};

/// Per-attribute gradients, shape-congruent with GaussianSet columns.
/// Double precision: the backward pass accumulates exactly and tests
/// compare against central finite differences.
struct GradientBundle {
    std::vector<double> d_position;    // N*3
    std::vector<double> d_opacity;     // N
    std::vector<double> d_scale;       // N*3
    std::vector<double> d_quaternion;  // N*4
    std::vector<double> d_color;       // N*3
    std::vector<double> d_feature;     // N*kFeatureDim

    GradientBundle() = default;
    explicit GradientBundle(std::size_t n)
        : d_position(n * 3, 0.0), d_opacity(n, 0.0), d_scale(n * 3, 0.0),
          d_quaternion(n * 4, 0.0), d_color(n * 3, 0.0), d_feature(n * kFeatureDim, 0.0) {}

    std::size_t size() const { return d_opacity.size(); }
    void add(const GradientBundle& other);
};

/// Concatenates the per-view sets in order. Throws EmptyInput when the
/// list is empty.
GaussianSet merge_views(const std::vector<GaussianSet>& sets);

}  // namespace evasplat
