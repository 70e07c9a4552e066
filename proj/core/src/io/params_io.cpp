#include <cstring>
#include <fstream>

#include <json.hpp>

#include "evasplat/attention.hpp"
#include "evasplat/io/image_io.hpp"

namespace evasplat {

namespace {
void append(std::string& out, const std::vector<float>& v) {
    out.append(reinterpret_cast<const char*>(v.data()), v.size() * sizeof(float));
}
void take(const std::string& data, std::size_t& pos, std::vector<float>& v, std::size_t count) {
    v.resize(count);
    if (pos + count * sizeof(float) > data.size())
        throw Error(errc::kIoFailure, "truncated parameter checkpoint");
    std::memcpy(v.data(), data.data() + pos, count * sizeof(float));
    pos += count * sizeof(float);
}
}  // namespace

void save_eva_params(const std::string& path, const EvaParams& params) {
    params.validate();
    std::string blob;
    append(blob, params.gamma);
    append(blob, params.wq);
    append(blob, params.wk);
    append(blob, params.wv);
    append(blob, params.wo);
    io::atomic_write(path, blob);

    nlohmann::json j;
    j["height"] = params.height;
    j["width"] = params.width;
    j["channels"] = params.channels;
    j["heads"] = params.heads;
    j["window"] = params.window;
    j["num_iterations"] = params.num_iterations;
    j["tensors"] = {{"gamma", {params.height, params.width, params.channels}},
                    {"wq", {params.channels, params.channels}},
                    {"wk", {params.channels, params.channels}},
                    {"wv", {params.channels, params.channels}},
                    {"wo", {params.channels, params.channels}}};
    io::atomic_write(path + ".json", j.dump(2) + "\n");
}

EvaParams load_eva_params(const std::string& path) {
    std::ifstream side(path + ".json");
    if (!side) throw Error(errc::kIoFailure, "missing checkpoint sidecar " + path + ".json");
    nlohmann::json j;
    side >> j;

    EvaParams params;
    params.height = j.at("height");
    params.width = j.at("width");
    params.channels = j.at("channels");
    params.heads = j.at("heads");
    params.window = j.at("window");
    params.num_iterations = j.at("num_iterations");

    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(errc::kIoFailure, "cannot open " + path);
    const std::string data((std::istreambuf_iterator<char>(in)),
                           std::istreambuf_iterator<char>());
    std::size_t pos = 0;
    const std::size_t plane = static_cast<std::size_t>(params.height) * params.width *
                              params.channels;
    const std::size_t cc = static_cast<std::size_t>(params.channels) * params.channels;
    take(data, pos, params.gamma, plane);
    take(data, pos, params.wq, cc);
    take(data, pos, params.wk, cc);
    take(data, pos, params.wv, cc);
    take(data, pos, params.wo, cc);
    if (pos != data.size())
        throw Error(errc::kIoFailure, "checkpoint payload size mismatch in " + path);
    params.validate();
    return params;
}

}  // namespace evasplat
