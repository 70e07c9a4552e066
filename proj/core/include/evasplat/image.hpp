#pragma once

#include <cstdint>
#include <vector>

#include "evasplat/error.hpp"

namespace evasplat {

/// Dense H x W x C plane of f32, row-major with interleaved channels.
/// Used for RGB images (C=3), feature planes (C=32) and scalar maps (C=1).
struct Image {
    int height = 0;
    int width = 0;
    int channels = 0;
    std::vector<float> data;

    Image() = default;
    Image(int h, int w, int c, float fill = 0.0f)
        : height(h), width(w), channels(c),
          data(static_cast<std::size_t>(h) * w * c, fill) {}

    float& at(int y, int x, int c) {
        return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
    }
    float at(int y, int x, int c) const {
        return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
    }

    std::size_t size() const { return data.size(); }
    bool same_shape(const Image& o) const {
        return height == o.height && width == o.width && channels == o.channels;
    }
};

inline void require_same_shape(const Image& a, const Image& b) {
    if (!a.same_shape(b))
        throw Error(errc::kShapeMismatch, "image shapes differ: " + std::to_string(a.height) +
                                              "x" + std::to_string(a.width) + "x" +
                                              std::to_string(a.channels) + " vs " +
                                              std::to_string(b.height) + "x" +
                                              std::to_string(b.width) + "x" +
                                              std::to_string(b.channels));
}

}  // namespace evasplat
