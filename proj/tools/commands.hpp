#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "evasplat/losses.hpp"

namespace evasplat::cli {

/// Resolved run configuration. Precedence: CLI flags > config file > defaults.
struct RunConfig {
    std::string command;
    std::filesystem::path out = ".";
    std::filesystem::path input;       // scene bundle (render/fit)
    std::filesystem::path image_a;     // eval inputs
    std::filesystem::path image_b;
    std::uint64_t seed = 7;
    int views = 2;
    double delta_deg = 45.0;
    int size = 64;
    int gaussians = 50;
    int window = 32;
    int iters = 2000;
    int view = 0;                      // target view for render
    std::string sources;               // comma list of source views, empty = all
    bool deterministic = false;
    bool oracle = false;
    int threads = 0;                   // 0 = hardware
    int repeats = 3;
    double budget_mb = 1024.0;
    std::string shapes;                // bench override: VxCxHxW[,...]
    LossWeights weights;
};

int cmd_gen(const RunConfig& config);
int cmd_render(const RunConfig& config);
int cmd_fit(const RunConfig& config);
int cmd_bench(const RunConfig& config);
int cmd_eval(const RunConfig& config);

}  // namespace evasplat::cli
