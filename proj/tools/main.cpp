#include <CLI11.hpp>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <json.hpp>

#include "commands.hpp"
#include "evasplat/error.hpp"
#include "evasplat/parallel.hpp"

namespace {

using evasplat::Error;
using evasplat::cli::RunConfig;

/// Applies config-file values beneath any flags the user passed explicitly.
/// Unknown keys are rejected.
void apply_config_file(const std::filesystem::path& path, CLI::App& app, RunConfig& config) {
    std::ifstream in(path);
    if (!in) throw Error(evasplat::errc::kBadConfig, "cannot open config " + path.string());
    nlohmann::json j;
    in >> j;

    auto take = [&](const char* key, auto& slot) {
        if (!j.contains(key)) return;
        const CLI::Option* opt = app.get_option_no_throw(std::string("--") + key);
        if (opt != nullptr && opt->count() > 0) {
            j.erase(key);  // explicit flag wins
            return;
        }
        slot = j.at(key).get<std::decay_t<decltype(slot)>>();
        j.erase(key);
    };

    std::string out, input;
    take("out", out);
    take("input", input);
    if (!out.empty()) config.out = out;
    if (!input.empty()) config.input = input;
    take("seed", config.seed);
    take("views", config.views);
    take("delta-deg", config.delta_deg);
    take("size", config.size);
    take("gaussians", config.gaussians);
    take("window", config.window);
    take("iters", config.iters);
    take("view", config.view);
    take("deterministic", config.deterministic);
    take("oracle", config.oracle);
    take("threads", config.threads);
    take("repeats", config.repeats);
    take("budget-mb", config.budget_mb);
    take("shapes", config.shapes);
    take("lambda-render", config.weights.lambda_render);

    if (!j.empty())
        throw Error(evasplat::errc::kBadConfig,
                    "unknown config key '" + j.begin().key() + "' in " + path.string());
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"evasplat: tiled gaussian splatting, windowed cross-view attention and losses"};
    app.require_subcommand(1);

    RunConfig config;
    std::string config_path;

    app.add_option("--config", config_path, "JSON config file (flags take precedence)");
    app.add_option("--out", config.out, "output directory");
    app.add_option("--seed", config.seed, "deterministic seed");
    app.add_option("--views", config.views, "number of source views");
    app.add_option("--delta-deg", config.delta_deg, "angle between adjacent views, degrees");
    app.add_option("--size", config.size, "image size in pixels");
    app.add_option("--gaussians", config.gaussians, "gaussian count for generated scenes");
    app.add_option("--window", config.window, "attention window size")
        ->check(CLI::IsMember({16, 32, 64}));
    app.add_option("--iters", config.iters, "fit iterations");
    app.add_option("--threads", config.threads, "worker cap (0 = hardware)");
    app.add_flag("--deterministic", config.deterministic,
                 "byte-identical outputs for a fixed seed");
    app.add_flag("--oracle", config.oracle, "render: also run the brute-force oracle and compare");

    CLI::App* gen = app.add_subcommand("gen", "generate a synthetic scene bundle");
    gen->fallthrough();
    CLI::App* render = app.add_subcommand("render", "splat a bundle view and report stats");
    render->fallthrough();
    render->add_option("--input", config.input, "scene bundle directory")->required();
    render->add_option("--view", config.view, "target view index");
    render->add_option("--sources", config.sources, "source views to lift, comma list (all)");
    CLI::App* fit = app.add_subcommand("fit", "analysis-by-synthesis fit against bundle images");
    fit->fallthrough();
    fit->add_option("--input", config.input, "scene bundle directory")->required();
    CLI::App* bench = app.add_subcommand("bench", "attention cost benchmark, CSV output");
    bench->fallthrough();
    bench->add_option("--repeats", config.repeats, "timing repeats per cell");
    bench->add_option("--budget-mb", config.budget_mb, "scratch budget before OOM-budget");
    bench->add_option("--shapes", config.shapes, "override shapes, VxCxHxW[,VxCxHxW...]");
    CLI::App* eval = app.add_subcommand("eval", "psnr/ssim/mse between two images");
    eval->fallthrough();
    eval->add_option("image_a", config.image_a, "first image (png/evfp/f32)")->required();
    eval->add_option("image_b", config.image_b, "second image (png/evfp/f32)")->required();

    try {
        app.parse(argc, argv);
        if (!config_path.empty()) apply_config_file(config_path, app, config);

        if (config.threads == 0) {
            if (const char* env = std::getenv("EVA_SPLAT_THREADS")) config.threads = std::atoi(env);
        }
        evasplat::set_worker_count(config.threads);

        if (gen->parsed()) {
            config.command = "gen";
            return evasplat::cli::cmd_gen(config);
        }
        if (render->parsed()) {
            config.command = "render";
            return evasplat::cli::cmd_render(config);
        }
        if (fit->parsed()) {
            config.command = "fit";
            return evasplat::cli::cmd_fit(config);
        }
        if (bench->parsed()) {
            config.command = "bench";
            return evasplat::cli::cmd_bench(config);
        }
        config.command = "eval";
        return evasplat::cli::cmd_eval(config);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const Error& e) {
        nlohmann::json err;
        err["error"] = e.code();
        err["message"] = e.what();
        std::cerr << err.dump() << "\n";
        return e.code() == evasplat::errc::kBundleNotFound ? 2 : 1;
    } catch (const std::exception& e) {
        nlohmann::json err;
        err["error"] = "Internal";
        err["message"] = e.what();
        std::cerr << err.dump() << "\n";
        return 1;
    }
}
