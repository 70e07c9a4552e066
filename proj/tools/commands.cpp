#include "commands.hpp"

#include <chrono>
#include <iostream>
#include <json.hpp>

#include "evasplat/attention_cost.hpp"
#include "evasplat/io/bundle.hpp"
#include "evasplat/io/gaussian_io.hpp"
#include "evasplat/io/image_io.hpp"
#include "evasplat/metrics.hpp"
#include "evasplat/pipeline.hpp"
#include "evasplat/rng.hpp"

namespace evasplat::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

class Stopwatch {
public:
    double ms() const {
        return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start_)
            .count();
    }

private:
    std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

json config_echo(const RunConfig& c) {
    json j;
    j["command"] = c.command;
    j["out"] = c.out.string();
    if (!c.input.empty()) j["input"] = c.input.string();
    j["seed"] = c.seed;
    j["views"] = c.views;
    j["delta_deg"] = c.delta_deg;
    j["size"] = c.size;
    j["gaussians"] = c.gaussians;
    j["window"] = c.window;
    j["iters"] = c.iters;
    j["deterministic"] = c.deterministic;
    j["threads"] = c.threads;
    return j;
}

/// Config echo + version + timings. Timings are zeroed under
/// --deterministic so repeated runs stay byte-identical.
void write_manifest(const RunConfig& c, double wall_ms, const json& extra = {}) {
    json j;
    j["config"] = config_echo(c);
    j["version"] = "0.1.0";
    j["wall_ms"] = c.deterministic ? 0.0 : wall_ms;
    if (!extra.empty()) j["outputs"] = extra;
    io::atomic_write(c.out / "manifest.json", j.dump(2) + "\n");
}

Image load_image_any(const fs::path& path) {
    if (path.extension() == ".evfp" || path.extension() == ".f32")
        return io::read_feature_plane(path);
    return io::read_png(path);
}

GaussianSet perturbed_init(const GaussianSet& gt, std::uint64_t seed) {
    Rng rng(seed ^ 0xf17f17ULL);
    GaussianSet init = gt;
    for (std::size_t i = 0; i < init.size(); ++i) {
        Eigen::Vector3d p = init.position(i);
        for (int k = 0; k < 3; ++k) p[k] += rng.uniform(-0.02, 0.02);
        init.set_position(i, p);
        for (int k = 0; k < 3; ++k)
            init.colors[3 * i + k] = std::clamp(
                init.colors[3 * i + k] + static_cast<float>(rng.uniform(-0.1, 0.1)), 0.05f,
                0.95f);
        init.opacities[i] = std::clamp(
            init.opacities[i] + static_cast<float>(rng.uniform(-0.05, 0.05)), 0.05f, 0.99f);
    }
    return init;
}

}  // namespace

int cmd_gen(const RunConfig& config) {
    Stopwatch watch;
    SceneConfig sc;
    sc.seed = config.seed;
    sc.n_views = config.views;
    sc.delta_deg = config.delta_deg;
    sc.n_gaussians = config.gaussians;
    sc.image_size = config.size;
    const SyntheticScene scene = generate_scene(sc);
    io::write_bundle(config.out, scene);

    json extra;
    extra["views"] = scene.cameras.size();
    extra["gaussians"] = scene.ground_truth.size();
    write_manifest(config, watch.ms(), extra);
    return 0;
}

int cmd_render(const RunConfig& config) {
    Stopwatch watch;
    const io::SceneBundle bundle = io::read_bundle(config.input);
    if (config.view < 0 || static_cast<std::size_t>(config.view) >= bundle.cameras.size())
        throw Error(errc::kBadConfig, "view index out of range");

    SyntheticScene scene = bundle.as_scene();
    if (!config.sources.empty()) {
        SyntheticScene filtered = scene;
        filtered.cameras.clear();
        filtered.images.clear();
        filtered.depths.clear();
        filtered.alphas.clear();
        std::string token;
        for (std::size_t i = 0; i <= config.sources.size(); ++i) {
            if (i < config.sources.size() && config.sources[i] != ',') {
                token += config.sources[i];
                continue;
            }
            const int v = std::stoi(token);
            token.clear();
            if (v < 0 || static_cast<std::size_t>(v) >= scene.cameras.size())
                throw Error(errc::kBadConfig, "source view index out of range");
            filtered.cameras.push_back(scene.cameras[static_cast<std::size_t>(v)]);
            filtered.images.push_back(scene.images[static_cast<std::size_t>(v)]);
            filtered.depths.push_back(scene.depths[static_cast<std::size_t>(v)]);
            filtered.alphas.push_back(scene.alphas[static_cast<std::size_t>(v)]);
        }
        scene = std::move(filtered);
    }
    const CameraModel& target = bundle.cameras[static_cast<std::size_t>(config.view)];

    Stopwatch render_watch;
    const PipelineResult result = forward_pipeline(scene, target, PipelineConfig{});
    const double render_ms = render_watch.ms();

    io::write_png(config.out / "color.png", result.rendered);
    io::write_feature_plane(config.out / "color.f32", result.rendered);
    io::write_feature_plane(config.out / "feature.evfp", result.feature_plane);

    json stats;
    stats["gaussian_count"] = result.gaussian_count;
    stats["render_wall_ms"] = config.deterministic ? 0.0 : render_ms;
    stats["psnr_db"] = psnr(result.rendered, bundle.images[static_cast<std::size_t>(config.view)]);
    stats["ssim"] = ssim(result.rendered, bundle.images[static_cast<std::size_t>(config.view)]);

    if (config.oracle) {
        const GaussianSet merged = merge_views(result.per_view_sets);
        const RenderTarget oracle = oracle_render(merged, target, Eigen::Vector3d::Zero());
        double worst = 0.0;
        for (std::size_t i = 0; i < oracle.color.data.size(); ++i)
            worst = std::max(worst, std::abs(static_cast<double>(oracle.color.data[i]) -
                                             result.rendered.data[i]));
        stats["oracle_max_deviation"] = worst;
        stats["oracle_match"] = worst <= 1e-5;
    }
    io::atomic_write(config.out / "stats.json", stats.dump(2) + "\n");
    write_manifest(config, watch.ms(), stats);
    return 0;
}

int cmd_fit(const RunConfig& config) {
    Stopwatch watch;
    const io::SceneBundle bundle = io::read_bundle(config.input);
    if (!bundle.ground_truth)
        throw Error(errc::kBundleNotFound, "bundle has no gaussians.evgs to initialize from");

    const GaussianSet init = perturbed_init(*bundle.ground_truth, config.seed);
    FitConfig fc;
    fc.iterations = config.iters;
    fc.lambda_render = config.weights.lambda_render;
    const FitResult result = fit_gaussians(bundle.images, bundle.cameras, init, fc);

    io::write_gaussians(config.out / "fitted.evgs", result.best);
    std::string trace = "iteration,loss\n";
    for (std::size_t i = 0; i < result.loss_trace.size(); ++i)
        trace += std::to_string(i) + "," + std::to_string(result.loss_trace[i]) + "\n";
    io::atomic_write(config.out / "loss_trace.csv", trace);

    double mean_mse = 0.0;
    for (std::size_t v = 0; v < bundle.cameras.size(); ++v) {
        const RenderTarget rt = render(result.best, bundle.cameras[v], Eigen::Vector3d::Zero());
        mean_mse += mse(rt.color, bundle.images[v]) / static_cast<double>(bundle.cameras.size());
    }
    json stats;
    stats["best_loss"] = result.best_loss;
    stats["best_iteration"] = result.best_iteration;
    stats["iterations"] = result.loss_trace.size();
    stats["psnr_db"] = mean_mse < 1e-10 ? 100.0 : 10.0 * std::log10(1.0 / mean_mse);
    io::atomic_write(config.out / "stats.json", stats.dump(2) + "\n");
    write_manifest(config, watch.ms(), stats);
    return 0;
}

int cmd_bench(const RunConfig& config) {
    Stopwatch watch;

    std::vector<BenchShape> shapes;
    if (!config.shapes.empty()) {
        // VxCxHxW, comma separated
        std::string token;
        for (std::size_t i = 0; i <= config.shapes.size(); ++i) {
            if (i < config.shapes.size() && config.shapes[i] != ',') {
                token += config.shapes[i];
                continue;
            }
            BenchShape s;
            if (std::sscanf(token.c_str(), "%dx%dx%dx%d", &s.views, &s.channels, &s.height,
                            &s.width) != 4)
                throw Error(errc::kBadConfig, "bad shape '" + token + "', expected VxCxHxW");
            shapes.push_back(s);
            token.clear();
        }
    } else {
        shapes = default_bench_shapes();
    }

    const std::size_t budget =
        static_cast<std::size_t>(config.budget_mb * 1024.0 * 1024.0);
    std::string csv = std::string(kCostCsvHeader) + "\n";
    for (const BenchShape& shape : shapes) {
        for (const auto variant : {AttentionVariant::kEvaW16, AttentionVariant::kEvaW32,
                                   AttentionVariant::kEvaW64, AttentionVariant::kFullCrossView}) {
            std::string row;
            try {
                CostReport report =
                    bench_attention(shape, variant, config.repeats, budget, config.seed);
                if (config.deterministic) report.median_ms = 0.0;  // byte-identical reruns
                row = cost_report_csv_row(report);
            } catch (const Error& e) {
                // no cell is refused outright; infeasible ones carry the code
                row = std::string(variant_name(variant)) + "," + std::to_string(shape.views) +
                      "," + std::to_string(shape.channels) + "," + std::to_string(shape.height) +
                      "," + std::to_string(shape.width) + "," +
                      std::to_string(variant_window(variant)) + "," + e.code() + ",0,0";
            }
            csv += row + "\n";
            std::cout << row << "\n";
        }
    }
    io::atomic_write(config.out / "attention_costs.csv", csv);
    write_manifest(config, watch.ms());
    return 0;
}

int cmd_eval(const RunConfig& config) {
    Stopwatch watch;
    const Image a = load_image_any(config.image_a);
    const Image b = load_image_any(config.image_b);

    json out;
    out["psnr_db"] = psnr(a, b);
    out["ssim"] = ssim(a, b);
    out["mse"] = mse(a, b);
    std::cout << out.dump(2) << "\n";
    io::atomic_write(config.out / "eval.json", out.dump(2) + "\n");
    write_manifest(config, watch.ms(), out);
    return 0;
}

}  // namespace evasplat::cli
