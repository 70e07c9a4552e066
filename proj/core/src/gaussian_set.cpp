#include "evasplat/gaussian_set.hpp"

#include <cmath>
#include <string>

namespace evasplat {

void GaussianSet::resize(std::size_t n) {
    positions.assign(n * 3, 0.0f);
    opacities.assign(n, 0.0f);
    scales.assign(n * 3, 1.0f);
    quaternions.assign(n * 4, 0.0f);
    for (std::size_t i = 0; i < n; ++i) quaternions[4 * i] = 1.0f;  // identity (w,x,y,z)
    colors.assign(n * 3, 0.0f);
    features.assign(n * kFeatureDim, 0.0f);
}

void GaussianSet::set_position(std::size_t i, const Eigen::Vector3d& p) {
    for (int k = 0; k < 3; ++k) positions[3 * i + k] = static_cast<float>(p[k]);
}
void GaussianSet::set_scale(std::size_t i, const Eigen::Vector3d& s) {
    for (int k = 0; k < 3; ++k) scales[3 * i + k] = static_cast<float>(s[k]);
}
void GaussianSet::set_quaternion(std::size_t i, const Eigen::Vector4d& q) {
    for (int k = 0; k < 4; ++k) quaternions[4 * i + k] = static_cast<float>(q[k]);
}
void GaussianSet::set_color(std::size_t i, const Eigen::Vector3d& c) {
    for (int k = 0; k < 3; ++k) colors[3 * i + k] = static_cast<float>(c[k]);
}

void GaussianSet::validate() const {
    const std::size_t n = size();
    if (positions.size() != n * 3 || scales.size() != n * 3 || quaternions.size() != n * 4 ||
        colors.size() != n * 3 || features.size() != n * kFeatureDim)
        throw Error(errc::kInvalidGaussianSet, "columns do not share a common length");

    for (std::size_t i = 0; i < n; ++i) {
        const float o = opacities[i];
        if (!(o >= 0.0f && o <= 1.0f))
            throw Error(errc::kInvalidGaussianSet,
                        "opacity " + std::to_string(o) + " outside [0,1] at " + std::to_string(i));
        for (int k = 0; k < 3; ++k) {
            if (!(scales[3 * i + k] > 0.0f))
                throw Error(errc::kInvalidGaussianSet,
                            "non-positive scale at " + std::to_string(i));
            if (!std::isfinite(positions[3 * i + k]))
                throw Error(errc::kInvalidGaussianSet,
                            "non-finite position at " + std::to_string(i));
        }
        const double qn = quaternion(i).norm();
        if (std::abs(qn - 1.0) > 1e-6)
            throw Error(errc::kInvalidGaussianSet,
                        "quaternion norm " + std::to_string(qn) + " at " + std::to_string(i));
    }
}

void GradientBundle::add(const GradientBundle& other) {
    auto acc = [](std::vector<double>& a, const std::vector<double>& b) {
        for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
    };
    acc(d_position, other.d_position);
    acc(d_opacity, other.d_opacity);
    acc(d_scale, other.d_scale);
    acc(d_quaternion, other.d_quaternion);
    acc(d_color, other.d_color);
    acc(d_feature, other.d_feature);
}

GaussianSet merge_views(const std::vector<GaussianSet>& sets) {
    if (sets.empty()) throw Error(errc::kEmptyInput, "merge_views needs at least one set");

    GaussianSet out;
    auto cat = [](std::vector<float>& dst, const std::vector<float>& src) {
        dst.insert(dst.end(), src.begin(), src.end());
    };
    for (const auto& s : sets) {
        cat(out.positions, s.positions);
        cat(out.opacities, s.opacities);
        cat(out.scales, s.scales);
        cat(out.quaternions, s.quaternions);
        cat(out.colors, s.colors);
        cat(out.features, s.features);
    }
    return out;
}

}  // namespace evasplat
