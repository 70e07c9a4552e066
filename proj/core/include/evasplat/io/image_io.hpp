#pragma once

#include <filesystem>
#include <string>

#include "evasplat/camera.hpp"
#include "evasplat/image.hpp"

namespace evasplat::io {

/// sRGB transfer functions. Images are linear in memory and sRGB on disk.
float linear_to_srgb(float linear);
float srgb_to_linear(float srgb);

/// 8-bit PNG, sRGB-encoded. The image must have 1 or 3 channels with values
/// in [0, 1]; writes go through a temp file and rename on success.
void write_png(const std::filesystem::path& path, const Image& image);
Image read_png(const std::filesystem::path& path);  // linear float, 1 or 3 channels

/// 8-bit grayscale PNG mask (no transfer function). Masked-in pixels store
/// round(255 * alpha) (at least 1) so the file carries the soft coverage;
/// masked-out pixels store 0. `alpha` may be empty for a binary mask.
void write_mask_png(const std::filesystem::path& path, const DepthMap& depth,
                    const Image& alpha = {});
/// Restores the mask (nonzero bytes) and, when requested, the alpha plane.
void read_mask_png(const std::filesystem::path& path, DepthMap& depth, Image* alpha = nullptr);

/// PFM, grayscale "Pf", scale -1.0 (little-endian), rows bottom-to-top.
void write_pfm(const std::filesystem::path& path, const DepthMap& depth);
DepthMap read_pfm(const std::filesystem::path& path);

/// Lossless raw f32 dump of an image plane with a 16-byte EVFP header:
/// magic "EVFP", then u32 height, width, channels; data row-major.
void write_feature_plane(const std::filesystem::path& path, const Image& image);
Image read_feature_plane(const std::filesystem::path& path);

/// Write-to-temp, rename-on-success for arbitrary payloads.
void atomic_write(const std::filesystem::path& path, const std::string& payload);

}  // namespace evasplat::io
