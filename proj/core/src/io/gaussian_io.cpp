#include "evasplat/io/gaussian_io.hpp"

#include <cstring>
#include <fstream>

#include <json.hpp>

#include "evasplat/io/image_io.hpp"

namespace evasplat::io {

namespace {
constexpr char kMagic[4] = {'E', 'V', 'G', 'S'};
constexpr std::uint32_t kVersion = 1;
constexpr std::size_t kJsonLimit = 10000;

void append_column(std::string& out, const std::vector<float>& column) {
    out.append(reinterpret_cast<const char*>(column.data()), column.size() * sizeof(float));
}

void take_column(const std::string& data, std::size_t& pos, std::vector<float>& column,
                 std::size_t count) {
    column.resize(count);
    std::memcpy(column.data(), data.data() + pos, count * sizeof(float));
    pos += count * sizeof(float);
}
}  // namespace

void write_gaussians(const std::filesystem::path& path, const GaussianSet& set) {
    std::string out(kMagic, 4);
    const std::uint32_t version = kVersion;
    out.append(reinterpret_cast<const char*>(&version), sizeof(version));
    const std::uint64_t count = set.size();
    out.append(reinterpret_cast<const char*>(&count), sizeof(count));
    append_column(out, set.positions);
    append_column(out, set.opacities);
    append_column(out, set.scales);
    append_column(out, set.quaternions);
    append_column(out, set.colors);
    append_column(out, set.features);
    atomic_write(path, out);
}

GaussianSet read_gaussians(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(errc::kIoFailure, "cannot open " + path.string());
    std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

    if (data.size() < 16 || std::memcmp(data.data(), kMagic, 4) != 0)
        throw Error(errc::kIoFailure, "not an EVGS file: " + path.string());
    std::uint32_t version = 0;
    std::memcpy(&version, data.data() + 4, sizeof(version));
    if (version != kVersion)
        throw Error(errc::kIoFailure, "unsupported EVGS version " + std::to_string(version));
    std::uint64_t count = 0;
    std::memcpy(&count, data.data() + 8, sizeof(count));

    const std::size_t n = static_cast<std::size_t>(count);
    const std::size_t expected = 16 + n * (3 + 1 + 3 + 4 + 3 + kFeatureDim) * sizeof(float);
    if (data.size() != expected)
        throw Error(errc::kIoFailure, "EVGS payload size mismatch in " + path.string());

    GaussianSet set;
    std::size_t pos = 16;
    take_column(data, pos, set.positions, n * 3);
    take_column(data, pos, set.opacities, n);
    take_column(data, pos, set.scales, n * 3);
    take_column(data, pos, set.quaternions, n * 4);
    take_column(data, pos, set.colors, n * 3);
    take_column(data, pos, set.features, n * kFeatureDim);
    return set;
}

void write_gaussians_json(const std::filesystem::path& path, const GaussianSet& set) {
    if (set.size() >= kJsonLimit)
        throw Error(errc::kIoFailure, "JSON export limited to sets below 10^4 gaussians");
    nlohmann::json j;
    j["count"] = set.size();
    j["positions"] = set.positions;
    j["opacities"] = set.opacities;
    j["scales"] = set.scales;
    j["quaternions"] = set.quaternions;
    j["colors"] = set.colors;
    j["features"] = set.features;
    atomic_write(path, j.dump(2));
}

GaussianSet read_gaussians_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(errc::kIoFailure, "cannot open " + path.string());
    nlohmann::json j;
    in >> j;
    GaussianSet set;
    set.positions = j.at("positions").get<std::vector<float>>();
    set.opacities = j.at("opacities").get<std::vector<float>>();
    set.scales = j.at("scales").get<std::vector<float>>();
    set.quaternions = j.at("quaternions").get<std::vector<float>>();
    set.colors = j.at("colors").get<std::vector<float>>();
    set.features = j.at("features").get<std::vector<float>>();
    set.validate();
    return set;
}

}  // namespace evasplat::io
