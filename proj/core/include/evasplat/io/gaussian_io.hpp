#pragma once

#include <filesystem>

#include "evasplat/gaussian_set.hpp"

namespace evasplat::io {

/// Binary gaussian container: magic "EVGS", u32 version, u64 count, then
/// contiguous little-endian f32 columns in the order position, opacity,
/// scale, quaternion, color, feature.
void write_gaussians(const std::filesystem::path& path, const GaussianSet& set);
GaussianSet read_gaussians(const std::filesystem::path& path);

/// Lossless JSON export for debugging; refuses sets of 10^4 or more.
void write_gaussians_json(const std::filesystem::path& path, const GaussianSet& set);
GaussianSet read_gaussians_json(const std::filesystem::path& path);

}  // namespace evasplat::io
