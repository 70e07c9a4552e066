#include "evasplat/io/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <vector>

namespace evasplat::io {

namespace fs = std::filesystem;

float linear_to_srgb(float linear) {
    const float l = std::clamp(linear, 0.0f, 1.0f);
    return l <= 0.0031308f ? 12.92f * l : 1.055f * std::pow(l, 1.0f / 2.4f) - 0.055f;
}

float srgb_to_linear(float srgb) {
    const float s = std::clamp(srgb, 0.0f, 1.0f);
    return s <= 0.04045f ? s / 12.92f : std::pow((s + 0.055f) / 1.055f, 2.4f);
}

void atomic_write(const fs::path& path, const std::string& payload) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error(errc::kIoFailure, "cannot open " + tmp.string());
        out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
        if (!out) throw Error(errc::kIoFailure, "short write to " + tmp.string());
    }
    fs::rename(tmp, path);
}

namespace {

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(errc::kIoFailure, "cannot open " + path.string());
    std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return data;
}

/// libpng rendered into a memory buffer for atomic writes.
void png_write_buffer(png_structp png, png_bytep data, png_size_t length) {
    auto* out = static_cast<std::string*>(png_get_io_ptr(png));
    out->append(reinterpret_cast<const char*>(data), length);
}
void png_flush_noop(png_structp) {}

struct PngReadState {
    const unsigned char* data;
    std::size_t size;
    std::size_t offset;
};
void png_read_buffer(png_structp png, png_bytep out, png_size_t length) {
    auto* st = static_cast<PngReadState*>(png_get_io_ptr(png));
    if (st->offset + length > st->size) png_error(png, "truncated png");
    std::memcpy(out, st->data + st->offset, length);
    st->offset += length;
}

std::string encode_png(const std::vector<unsigned char>& pixels, int width, int height,
                       int channels) {
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png_create_info_struct(png);
    std::string out;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw Error(errc::kIoFailure, "png encode failed");
    }
    png_set_write_fn(png, &out, png_write_buffer, png_flush_noop);
    png_set_compression_level(png, 6);
    png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), 8,
                 channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    std::vector<png_bytep> rows(static_cast<std::size_t>(height));
    for (int y = 0; y < height; ++y)
        rows[static_cast<std::size_t>(y)] = const_cast<png_bytep>(
            pixels.data() + static_cast<std::size_t>(y) * width * channels);
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    return out;
}

std::vector<unsigned char> decode_png(const std::string& bytes, int& width, int& height,
                                      int& channels) {
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png_create_info_struct(png);
    PngReadState st{reinterpret_cast<const unsigned char*>(bytes.data()), bytes.size(), 0};
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw Error(errc::kIoFailure, "png decode failed");
    }
    png_set_read_fn(png, &st, png_read_buffer);
    png_read_info(png, info);

    width = static_cast<int>(png_get_image_width(png, info));
    height = static_cast<int>(png_get_image_height(png, info));
    const png_byte color = png_get_color_type(png, info);
    const png_byte depth = png_get_bit_depth(png, info);
    if (depth == 16) png_set_strip_16(png);
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
    png_read_update_info(png, info);

    channels = static_cast<int>(png_get_channels(png, info));
    std::vector<unsigned char> pixels(static_cast<std::size_t>(width) * height * channels);
    std::vector<png_bytep> rows(static_cast<std::size_t>(height));
    for (int y = 0; y < height; ++y)
        rows[static_cast<std::size_t>(y)] =
            pixels.data() + static_cast<std::size_t>(y) * width * channels;
    png_read_image(png, rows.data());
    png_destroy_read_struct(&png, &info, nullptr);
    return pixels;
}

}  // namespace

void write_png(const fs::path& path, const Image& image) {
    if (image.channels != 1 && image.channels != 3)
        throw Error(errc::kShapeMismatch, "png writer expects 1 or 3 channels");
    std::vector<unsigned char> pixels(image.data.size());
    for (std::size_t i = 0; i < image.data.size(); ++i)
        pixels[i] = static_cast<unsigned char>(
            std::lround(255.0f * linear_to_srgb(image.data[i])));
    atomic_write(path, encode_png(pixels, image.width, image.height, image.channels));
}

Image read_png(const fs::path& path) {
    int w = 0, h = 0, c = 0;
    const std::vector<unsigned char> pixels = decode_png(read_file(path), w, h, c);
    Image img(h, w, c);
    for (std::size_t i = 0; i < img.data.size(); ++i)
        img.data[i] = srgb_to_linear(static_cast<float>(pixels[i]) / 255.0f);
    return img;
}

void write_mask_png(const fs::path& path, const DepthMap& depth, const Image& alpha) {
    const bool soft = !alpha.data.empty();
    if (soft && (alpha.height != depth.height || alpha.width != depth.width || alpha.channels != 1))
        throw Error(errc::kDimensionMismatch, "alpha plane does not match the depth map");
    std::vector<unsigned char> pixels(depth.mask.size());
    for (std::size_t i = 0; i < depth.mask.size(); ++i) {
        if (!depth.mask[i]) {
            pixels[i] = 0;
        } else if (soft) {
            const long v = std::lround(255.0f * std::clamp(alpha.data[i], 0.0f, 1.0f));
            pixels[i] = static_cast<unsigned char>(std::max(1L, v));
        } else {
            pixels[i] = 255;
        }
    }
    atomic_write(path, encode_png(pixels, depth.width, depth.height, 1));
}

void read_mask_png(const fs::path& path, DepthMap& depth, Image* alpha) {
    int w = 0, h = 0, c = 0;
    const std::vector<unsigned char> pixels = decode_png(read_file(path), w, h, c);
    if (w != depth.width || h != depth.height || c != 1)
        throw Error(errc::kDimensionMismatch, "mask png does not match the depth map");
    if (alpha) *alpha = Image(h, w, 1);
    for (std::size_t i = 0; i < depth.mask.size(); ++i) {
        depth.mask[i] = pixels[i] > 0 ? 1 : 0;
        if (alpha) alpha->data[i] = static_cast<float>(pixels[i]) / 255.0f;
    }
}

void write_pfm(const fs::path& path, const DepthMap& depth) {
    std::string out = "Pf\n" + std::to_string(depth.width) + " " + std::to_string(depth.height) +
                      "\n-1.0\n";
    // bottom-to-top rows per the PFM convention
    for (int y = depth.height - 1; y >= 0; --y)
        out.append(reinterpret_cast<const char*>(depth.values.data() +
                                                 static_cast<std::size_t>(y) * depth.width),
                   static_cast<std::size_t>(depth.width) * sizeof(float));
    atomic_write(path, out);
}

DepthMap read_pfm(const fs::path& path) {
    const std::string data = read_file(path);
    std::size_t pos = 0;
    auto token = [&]() {
        while (pos < data.size() && std::isspace(static_cast<unsigned char>(data[pos]))) ++pos;
        std::size_t start = pos;
        while (pos < data.size() && !std::isspace(static_cast<unsigned char>(data[pos]))) ++pos;
        return data.substr(start, pos - start);
    };
    const std::string magic = token();
    if (magic != "Pf") throw Error(errc::kIoFailure, "not a grayscale PFM: " + path.string());
    const int w = std::stoi(token());
    const int h = std::stoi(token());
    const double scale = std::stod(token());
    if (scale >= 0.0) throw Error(errc::kIoFailure, "big-endian PFM not supported");
    ++pos;  // single whitespace after the scale line

    DepthMap depth(h, w);
    const std::size_t need = static_cast<std::size_t>(w) * h * sizeof(float);
    if (data.size() - pos < need) throw Error(errc::kIoFailure, "truncated PFM");
    for (int y = h - 1; y >= 0; --y) {
        std::memcpy(depth.values.data() + static_cast<std::size_t>(y) * w, data.data() + pos,
                    static_cast<std::size_t>(w) * sizeof(float));
        pos += static_cast<std::size_t>(w) * sizeof(float);
    }
    // masks ride in a sidecar png; default to finite positive entries
    for (std::size_t i = 0; i < depth.values.size(); ++i)
        depth.mask[i] = std::isfinite(depth.values[i]) && depth.values[i] > 0.0f ? 1 : 0;
    return depth;
}

namespace {
constexpr char kFeatureMagic[4] = {'E', 'V', 'F', 'P'};

void put_u32(std::string& out, std::uint32_t v) {
    out.push_back(static_cast<char>(v & 0xff));
    out.push_back(static_cast<char>((v >> 8) & 0xff));
    out.push_back(static_cast<char>((v >> 16) & 0xff));
    out.push_back(static_cast<char>((v >> 24) & 0xff));
}
std::uint32_t get_u32(const std::string& data, std::size_t at) {
    return static_cast<std::uint32_t>(static_cast<unsigned char>(data[at])) |
           (static_cast<std::uint32_t>(static_cast<unsigned char>(data[at + 1])) << 8) |
           (static_cast<std::uint32_t>(static_cast<unsigned char>(data[at + 2])) << 16) |
           (static_cast<std::uint32_t>(static_cast<unsigned char>(data[at + 3])) << 24);
}
}  // namespace

void write_feature_plane(const fs::path& path, const Image& image) {
    std::string out(kFeatureMagic, 4);
    put_u32(out, static_cast<std::uint32_t>(image.height));
    put_u32(out, static_cast<std::uint32_t>(image.width));
    put_u32(out, static_cast<std::uint32_t>(image.channels));
    out.append(reinterpret_cast<const char*>(image.data.data()),
               image.data.size() * sizeof(float));
    atomic_write(path, out);
}

Image read_feature_plane(const fs::path& path) {
    const std::string data = read_file(path);
    if (data.size() < 16 || std::memcmp(data.data(), kFeatureMagic, 4) != 0)
        throw Error(errc::kIoFailure, "not an EVFP file: " + path.string());
    const int h = static_cast<int>(get_u32(data, 4));
    const int w = static_cast<int>(get_u32(data, 8));
    const int c = static_cast<int>(get_u32(data, 12));
    Image img(h, w, c);
    if (data.size() - 16 != img.data.size() * sizeof(float))
        throw Error(errc::kIoFailure, "EVFP payload size mismatch");
    std::memcpy(img.data.data(), data.data() + 16, data.size() - 16);
    return img;
}

}  // namespace evasplat::io
