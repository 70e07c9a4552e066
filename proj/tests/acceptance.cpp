// Acceptance suite: one pass/fail line per criterion, nonzero exit when any
// criterion fails. Run via ctest or directly:
//   acceptance --cli path/to/evasplat
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "evasplat/attention.hpp"
#include "evasplat/attention_cost.hpp"
#include "evasplat/io/image_io.hpp"
#include "evasplat/losses.hpp"
#include "evasplat/metrics.hpp"
#include "evasplat/pipeline.hpp"
#include "evasplat/rasterizer.hpp"
#include "testing.hpp"

using namespace evasplat;
namespace fs = std::filesystem;

namespace {

int g_failures = 0;

struct Criterion {
    explicit Criterion(int id, std::string title) : id_(id), title_(std::move(title)) {}

    void check(bool ok, const std::string& detail) {
        if (!ok) {
            failed_ = true;
            if (!detail.empty()) details_.push_back(detail);
        }
    }
    void note(const std::string& detail) { details_.push_back(detail); }

    ~Criterion() {
        const double secs =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
        std::printf("[%s] criterion %d: %s (%.1fs)", failed_ ? "FAIL" : "PASS", id_,
                    title_.c_str(), secs);
        for (const std::string& d : details_) std::printf(" | %s", d.c_str());
        std::printf("\n");
        std::fflush(stdout);
        if (failed_) ++g_failures;
    }

private:
    int id_;
    std::string title_;
    bool failed_ = false;
    std::vector<std::string> details_;
    std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

std::string fmt(double v) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.3g", v);
    return buf;
}

// --------------------------------------------------------------------------
// 1 + 2: oracle equivalence and partition of unity

void criteria_oracle_and_unity() {
    // declared in reverse so the destructors report in criterion order
    Criterion c2(2, "blend weights + final transmittance partition unity to 1e-6");
    Criterion c1(1, "tiled render matches the brute-force oracle to 1e-5, < 60 s");
    const auto start = std::chrono::steady_clock::now();

    Rng rng(20240915);
    double worst_dev = 0.0;
    double worst_unity = 0.0;
    const CameraModel cam(57.6, 57.6, 32.0, 32.0, 64, 64, RigidTransform{});
    for (int scene = 0; scene < 50; ++scene) {
        const std::size_t n = 40 + rng.below(161);  // up to 200
        const GaussianSet set = testing::random_set(rng, n);
        const Eigen::Vector3d bg(rng.uniform(), rng.uniform(), rng.uniform());

        const RenderTarget tiled = render(set, cam, bg);
        OracleDiagnostics diag;
        const RenderTarget oracle = oracle_render(set, cam, bg, &diag);

        const std::pair<const Image*, const Image*> planes[] = {
            {&tiled.color, &oracle.color},
            {&tiled.feature, &oracle.feature},
            {&tiled.blended_depth, &oracle.blended_depth},
            {&tiled.final_transmittance, &oracle.final_transmittance}};
        for (const auto& [ours, ref] : planes)
            for (std::size_t i = 0; i < ours->data.size(); ++i)
                worst_dev = std::max(
                    worst_dev, std::abs(static_cast<double>(ours->data[i]) - ref->data[i]));
        for (std::size_t i = 0; i < diag.weight_sum.size(); ++i)
            worst_unity = std::max(
                worst_unity,
                std::abs(diag.weight_sum[i] + oracle.final_transmittance.data[i] - 1.0));
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    c1.check(worst_dev <= 1e-5, "max deviation " + fmt(worst_dev));
    c1.check(secs < 60.0, "runtime " + fmt(secs) + "s");
    c1.note("50 scenes, max |tiled - oracle| = " + fmt(worst_dev));
    c2.check(worst_unity <= 1e-6, "max |sum - 1| " + fmt(worst_unity));
    c2.note("max |weights + T - 1| = " + fmt(worst_unity));
}

// --------------------------------------------------------------------------
// 3: gradient suite

struct GradStats {
    std::size_t checked = 0;
    std::size_t failed = 0;
    double worst_rel = 0.0;

    void take(double analytic, double fd) {
        ++checked;
        if (std::abs(analytic) <= 1e-6) {
            if (std::abs(fd) > 1e-4) ++failed;
            return;
        }
        const double rel =
            std::abs(analytic - fd) / std::max(std::abs(analytic), std::abs(fd));
        worst_rel = std::max(worst_rel, rel);
        if (rel >= 1e-3) ++failed;
    }
};

void gradients_rasterizer(GradStats& stats) {
    Rng rng(33);
    const CameraModel cam(28.8, 28.8, 16.0, 16.0, 32, 32, RigidTransform{});
    GaussianSet set = testing::random_set(rng, 20, 0.7, 3.0, 0.05, 0.2);
    const Eigen::Vector3d bg(0.2, 0.5, 0.8);

    RenderAdjoint adj;
    adj.d_color = Image(32, 32, 3);
    adj.d_feature = Image(32, 32, kFeatureDim);
    adj.d_blended_depth = Image(32, 32, 1);
    adj.d_final_transmittance = Image(32, 32, 1);
    for (auto& v : adj.d_color.data) v = static_cast<float>(rng.uniform(-1, 1));
    for (auto& v : adj.d_feature.data) v = static_cast<float>(rng.uniform(-0.2, 0.2));
    for (auto& v : adj.d_blended_depth.data) v = static_cast<float>(rng.uniform(-0.3, 0.3));
    for (auto& v : adj.d_final_transmittance.data) v = static_cast<float>(rng.uniform(-0.5, 0.5));

    auto eval = [&] {
        const RenderTargetD rt = oracle_render_f64(set, cam, bg);
        double acc = 0.0;
        for (std::size_t i = 0; i < rt.color.size(); ++i)
            acc += static_cast<double>(adj.d_color.data[i]) * rt.color[i];
        for (std::size_t i = 0; i < rt.feature.size(); ++i)
            acc += static_cast<double>(adj.d_feature.data[i]) * rt.feature[i];
        for (std::size_t i = 0; i < rt.blended_depth.size(); ++i)
            acc += static_cast<double>(adj.d_blended_depth.data[i]) * rt.blended_depth[i];
        for (std::size_t i = 0; i < rt.final_transmittance.size(); ++i)
            acc += static_cast<double>(adj.d_final_transmittance.data[i]) *
                   rt.final_transmittance[i];
        return acc;
    };

    const GradientBundle grad = render_backward(set, cam, bg, adj);
    for (std::size_t g = 0; g < set.size(); ++g) {
        for (int k = 0; k < 3; ++k)
            stats.take(grad.d_position[3 * g + k],
                       testing::central_difference_f32(set.positions, 3 * g + k, eval));
        stats.take(grad.d_opacity[g], testing::central_difference_f32(set.opacities, g, eval));
        for (int k = 0; k < 3; ++k)
            stats.take(grad.d_scale[3 * g + k],
                       testing::central_difference_f32(set.scales, 3 * g + k, eval));
        for (int k = 0; k < 3; ++k)
            stats.take(grad.d_color[3 * g + k],
                       testing::central_difference_f32(set.colors, 3 * g + k, eval));
        for (int k = 0; k < 6; ++k)
            stats.take(grad.d_feature[kFeatureDim * g + k],
                       testing::central_difference_f32(set.features, kFeatureDim * g + k, eval));

        const Eigen::Vector4d grad4(grad.d_quaternion[4 * g], grad.d_quaternion[4 * g + 1],
                                    grad.d_quaternion[4 * g + 2], grad.d_quaternion[4 * g + 3]);
        for (int k = 0; k < 4; ++k) {
            const Eigen::Vector4d original = set.quaternion(g);
            const double h = 1e-4;
            Eigen::Vector4d plus = original, minus = original;
            plus[k] += h;
            minus[k] -= h;
            set.set_quaternion(g, plus.normalized());
            const Eigen::Vector4d sp = set.quaternion(g);
            const double hi = eval();
            set.set_quaternion(g, minus.normalized());
            const Eigen::Vector4d sm = set.quaternion(g);
            const double lo = eval();
            set.set_quaternion(g, original);
            stats.take(grad4.dot(sp - sm) / (2.0 * h), (hi - lo) / (2.0 * h));
        }
    }
}

void gradients_attention(GradStats& stats) {
    Rng rng(47);
    const int views = 2, hgt = 8, wid = 16, chn = 8;
    std::vector<FeatureGridD> grids;
    for (int i = 0; i < views; ++i) {
        FeatureGridD g(i, hgt, wid, chn);
        for (auto& v : g.data) v = rng.uniform(-1.0, 1.0);
        grids.push_back(std::move(g));
    }
    EvaParamsD params = EvaParamsD::seeded(13, hgt, wid, chn, 2, 16, 2);
    std::vector<std::vector<double>> d_out(views);
    for (auto& d : d_out) {
        d.resize(static_cast<std::size_t>(hgt) * wid * chn);
        for (auto& v : d) v = rng.uniform(-1.0, 1.0);
    }

    auto eval = [&] {
        const auto out = eva_forward(grids, params);
        double acc = 0.0;
        for (int i = 0; i < views; ++i)
            for (std::size_t e = 0; e < out[i].data.size(); ++e)
                acc += d_out[static_cast<std::size_t>(i)][e] * out[i].data[e];
        return acc;
    };
    auto fd_on = [&](double& slot) {
        const double orig = slot;
        const double h = std::max(std::abs(orig) * 1e-4, 1e-6);
        slot = orig + h;
        const double hi = eval();
        slot = orig - h;
        const double lo = eval();
        slot = orig;
        return (hi - lo) / (2.0 * h);
    };

    const EvaGradients grad = eva_backward(grids, params, d_out);
    Rng pick(99);
    for (int trial = 0; trial < 60; ++trial) {
        const int view = static_cast<int>(pick.below(views));
        const std::size_t e = pick.below(grids[0].data.size());
        stats.take(grad.d_grids[static_cast<std::size_t>(view)][e],
                   fd_on(grids[static_cast<std::size_t>(view)].data[e]));
    }
    for (int trial = 0; trial < 40; ++trial) {
        const std::size_t e = pick.below(params.gamma.size());
        stats.take(grad.d_gamma[e], fd_on(params.gamma[e]));
    }
    auto sweep = [&](std::vector<double>& w, const std::vector<double>& g, int count) {
        for (int trial = 0; trial < count; ++trial) {
            const std::size_t e = pick.below(w.size());
            stats.take(g[e], fd_on(w[e]));
        }
    };
    sweep(params.wq, grad.d_wq, 25);
    sweep(params.wk, grad.d_wk, 25);
    sweep(params.wv, grad.d_wv, 25);
    sweep(params.wo, grad.d_wo, 25);
}

void gradients_losses(GradStats& stats) {
    Rng rng(57);
    Image pred(24, 24, 3), gt(24, 24, 3);
    for (auto& v : pred.data) v = static_cast<float>(rng.uniform(0.2, 0.8));
    for (auto& v : gt.data) v = static_cast<float>(rng.uniform(0.2, 0.8));

    const ScalarWithGrad out = render_loss(pred, gt, 0.35);
    auto eval = [&] { return render_loss(pred, gt, 0.35).value; };
    Rng pick(9);
    for (int trial = 0; trial < 80; ++trial) {
        const std::size_t e = pick.below(pred.data.size());
        stats.take(out.grad[e], testing::central_difference_f32(pred.data, e, eval, 1e-3, 1e-5));
    }

    const SsimResult sres = ssim_with_gradient(pred, gt);
    auto eval_ssim = [&] { return ssim(pred, gt); };
    for (int trial = 0; trial < 60; ++trial) {
        const std::size_t e = pick.below(pred.data.size());
        stats.take(sres.d_a[e],
                   testing::central_difference_f32(pred.data, e, eval_ssim, 1e-3, 1e-5));
    }
}

void gradients_anchor(GradStats& stats) {
    // two ring cameras and one landmark with a ray-aligned disagreement
    std::vector<CameraModel> cams;
    for (int v = 0; v < 2; ++v) {
        const double theta = v * 40.0 * M_PI / 180.0;
        const Eigen::Vector3d center(2.5 * std::sin(theta), 0.0, 2.5 * std::cos(theta));
        RigidTransform w2c;
        const Eigen::Vector3d z = (-center).normalized();
        const Eigen::Vector3d x = Eigen::Vector3d(0, 1, 0).cross(z).normalized();
        w2c.rotation.row(0) = x;
        w2c.rotation.row(1) = z.cross(x);
        w2c.rotation.row(2) = z;
        w2c.translation = -(w2c.rotation * center);
        cams.emplace_back(60.0, 60.0, 32.0, 32.0, 64, 64, w2c);
    }
    const Eigen::Vector3d p0(0.05, -0.03, 0.1);
    std::vector<GaussianSet> sets;
    std::vector<PositionMap> maps;
    LandmarkSet landmarks;
    std::vector<std::size_t> pixels;
    for (int v = 0; v < 2; ++v) {
        GaussianSet set(2);
        set.opacities = {0.6f, 0.8f};
        set.set_scale(0, {0.05, 0.06, 0.07});
        set.set_scale(1, {0.03, 0.03, 0.03});
        sets.push_back(set);
        const PixelPoint pp = project(cams[v], p0);
        PositionMap pm(64, 64);
        const std::size_t pix = static_cast<std::size_t>(static_cast<int>(pp.v)) * 64 +
                                static_cast<int>(pp.u);
        Eigen::Vector3d point = p0;
        if (v == 1) {
            const Eigen::Vector3d ray = (p0 - cams[v].center()).normalized();
            point = p0 + 0.08 * ray;
        }
        pm.positions[pix] = point;
        pm.mask[pix] = 1;
        maps.push_back(std::move(pm));
        landmarks.items.push_back({v, 0, pp.u, pp.v});
        pixels.push_back(pix);
    }
    LossWeights weights;
    weights.tolerance = 0.01;

    const AnchorLossResult out = anchor_loss(sets, cams, maps, landmarks, weights);
    auto eval = [&] { return anchor_loss(sets, cams, maps, landmarks, weights).value; };
    for (int v = 0; v < 2; ++v) {
        for (std::size_t i = 0; i < sets[v].size(); ++i)
            stats.take(out.d_opacity[static_cast<std::size_t>(v)][i],
                       testing::central_difference_f32(
                           sets[static_cast<std::size_t>(v)].opacities, i, eval));
        for (std::size_t i = 0; i < sets[v].size() * 3; ++i)
            stats.take(out.d_scale[static_cast<std::size_t>(v)][i],
                       testing::central_difference_f32(sets[static_cast<std::size_t>(v)].scales,
                                                       i, eval));

        const auto& lm = landmarks.items[static_cast<std::size_t>(v)];
        const std::size_t pix = pixels[static_cast<std::size_t>(v)];
        const Eigen::Vector3d base = maps[static_cast<std::size_t>(v)].positions[pix];
        const double d0 = cams[static_cast<std::size_t>(v)].world_to_camera().apply(base).z();
        auto eval_at = [&](double d) {
            maps[static_cast<std::size_t>(v)].positions[pix] =
                unproject(cams[static_cast<std::size_t>(v)], lm.u, lm.v, d);
            const double val = eval();
            maps[static_cast<std::size_t>(v)].positions[pix] = base;
            return val;
        };
        const double h = 1e-5;
        stats.take(out.d_depth[static_cast<std::size_t>(v)][pix],
                   (eval_at(d0 + h) - eval_at(d0 - h)) / (2.0 * h));
    }
}

void criterion_gradients() {
    Criterion c(3, "analytic gradients match central finite differences (rel < 1e-3), < 5 min");
    const auto start = std::chrono::steady_clock::now();
    GradStats stats;
    gradients_rasterizer(stats);
    gradients_attention(stats);
    gradients_losses(stats);
    gradients_anchor(stats);
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    c.check(stats.failed == 0, std::to_string(stats.failed) + " entries out of tolerance");
    c.check(secs < 300.0, "runtime " + fmt(secs) + "s");
    c.note(std::to_string(stats.checked) + " entries, worst rel err " + fmt(stats.worst_rel));
}

// --------------------------------------------------------------------------
// 4: blended depth alignment

void criterion_alignment() {
    Criterion c(4, "one-gaussian-per-pixel blended depth aligns to 1e-3 relative");
    const int size = 32;
    const CameraModel cam(48.0, 48.0, 16.0, 16.0, size, size, RigidTransform{});

    DepthMap depth(size, size);
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x) {
            const std::size_t i = static_cast<std::size_t>(y) * size + x;
            depth.values[i] = static_cast<float>(2.0 + 0.006 * std::sin(0.4 * x) +
                                                 0.005 * std::cos(0.3 * y));
            depth.mask[i] = 1;
        }
    const PositionMap pm = depth_to_positions(cam, depth);

    GaussianSet set(static_cast<std::size_t>(size) * size);
    std::size_t g = 0;
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x) {
            const std::size_t i = static_cast<std::size_t>(y) * size + x;
            set.set_position(g, pm.positions[i]);
            const double s = 1e-3 * depth.values[i];
            set.set_scale(g, {s, s, s});
            set.opacities[g] = 1.0f;
            set.set_color(g, {0.5, 0.5, 0.5});
            ++g;
        }

    const RenderTarget rt = render(set, cam, {0, 0, 0});
    double worst = 0.0;
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x) {
            const double d = depth.values[static_cast<std::size_t>(y) * size + x];
            worst = std::max(worst, std::abs(rt.blended_depth.at(y, x, 0) - d) / d);
        }
    c.check(worst <= 1e-3, "worst relative deviation " + fmt(worst));
    c.note("worst |blended - d|/d = " + fmt(worst));
}

// --------------------------------------------------------------------------
// 5: attention memory scaling

double fit_loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const double n = static_cast<double>(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double lx = std::log2(x[i]);
        const double ly = std::log2(y[i]);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

void criterion_memory_scaling() {
    Criterion c(5, "attention memory: EVA slope 1, full slope 2, >=5x apart at 256^2");

    std::vector<double> widths, eva_peaks, full_peaks;
    bool all_ran = true;
    for (const int w : {64, 128, 256, 512}) {
        const BenchShape shape{2, 16, 16, w};
        const CostReport eva =
            bench_attention(shape, AttentionVariant::kEvaW32, 1, std::size_t(3) << 30);
        const CostReport full =
            bench_attention(shape, AttentionVariant::kFullCrossView, 1, std::size_t(3) << 30);
        all_ran = all_ran && !eva.oom_budget && !full.oom_budget;
        widths.push_back(w);
        eva_peaks.push_back(static_cast<double>(eva.peak_bytes));
        full_peaks.push_back(static_cast<double>(full.peak_bytes));
    }
    c.check(all_ran, "a slope cell fell back to the model instead of running");

    const double eva_slope = fit_loglog_slope(widths, eva_peaks);
    const double full_slope = fit_loglog_slope(widths, full_peaks);
    c.check(std::abs(eva_slope - 1.0) <= 0.15, "eva slope " + fmt(eva_slope));
    c.check(std::abs(full_slope - 2.0) <= 0.15, "full slope " + fmt(full_slope));

    // 2 x 64 x 256 x 256: the full variant's score matrix exceeds any desk
    // budget, so its reported requirement comes from the
    // instrumentation-backed model.
    const BenchShape table{2, 64, 256, 256};
    const CostReport eva = bench_attention(table, AttentionVariant::kEvaW32, 1);
    const CostReport full = bench_attention(table, AttentionVariant::kFullCrossView, 1);
    const double ratio =
        static_cast<double>(full.peak_bytes) / static_cast<double>(eva.peak_bytes);
    c.check(ratio >= 5.0, "peak ratio " + fmt(ratio));
    c.note("slopes eva " + fmt(eva_slope) + ", full " + fmt(full_slope) + "; 256^2 ratio " +
           fmt(ratio) + "x" + (full.oom_budget ? " (full cell OOM-budget, modeled)" : ""));
}

// --------------------------------------------------------------------------
// 6: dense equivalence

void criterion_dense_equivalence() {
    Criterion c(6, "window = width, shift 0 matches unwindowed cross-view attention to 1e-6");
    Rng rng(42);
    double worst = 0.0;
    for (const int w : {16, 32, 64}) {
        const int views = 2 + (w == 32 ? 1 : 0);
        std::vector<FeatureGridD> grids;
        for (int i = 0; i < views; ++i) {
            FeatureGridD g(i, 6, w, 8);
            for (auto& v : g.data) v = rng.uniform(-1.0, 1.0);
            grids.push_back(std::move(g));
        }
        const EvaParamsD params = EvaParamsD::seeded(99, 6, w, 8, 4, w, 1);
        const auto ours = eva_forward(grids, params);

        // independent dense reference: plain loops over full rows
        const int chn = 8, dh = chn / 4;
        const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
        for (int i = 0; i < views; ++i) {
            for (int y = 0; y < 6; ++y) {
                for (int x = 0; x < w; ++x) {
                    std::vector<double> attn(chn, 0.0);
                    std::vector<double> q(chn, 0.0);
                    const auto xg_at = [&](int view, int col, int ch) {
                        const std::size_t r = static_cast<std::size_t>(y) * w + col;
                        return grids[static_cast<std::size_t>(view)].data[r * chn + ch] +
                               params.gamma[r * chn + ch];
                    };
                    for (int o = 0; o < chn; ++o)
                        for (int t = 0; t < chn; ++t)
                            q[o] += xg_at(i, x, t) * params.wq[static_cast<std::size_t>(t) * chn + o];
                    for (int h = 0; h < 4; ++h) {
                        std::vector<double> scores;
                        for (int j = 0; j < views; ++j) {
                            if (j == i) continue;
                            for (int kx = 0; kx < w; ++kx) {
                                double kvec, s = 0.0;
                                for (int d = 0; d < dh; ++d) {
                                    kvec = 0.0;
                                    for (int t = 0; t < chn; ++t)
                                        kvec += xg_at(j, kx, t) *
                                                params.wk[static_cast<std::size_t>(t) * chn +
                                                          h * dh + d];
                                    s += q[h * dh + d] * kvec;
                                }
                                scores.push_back(s * scale);
                            }
                        }
                        double m = scores[0];
                        for (double v : scores) m = std::max(m, v);
                        double denom = 0.0;
                        for (double& v : scores) {
                            v = std::exp(v - m);
                            denom += v;
                        }
                        std::size_t idx = 0;
                        for (int j = 0; j < views; ++j) {
                            if (j == i) continue;
                            for (int kx = 0; kx < w; ++kx, ++idx) {
                                for (int d = 0; d < dh; ++d) {
                                    double vvec = 0.0;
                                    for (int t = 0; t < chn; ++t)
                                        vvec += xg_at(j, kx, t) *
                                                params.wv[static_cast<std::size_t>(t) * chn +
                                                          h * dh + d];
                                    attn[h * dh + d] += scores[idx] / denom * vvec;
                                }
                            }
                        }
                    }
                    const std::size_t r = static_cast<std::size_t>(y) * w + x;
                    for (int o = 0; o < chn; ++o) {
                        double acc = grids[static_cast<std::size_t>(i)].data[r * chn + o];
                        for (int t = 0; t < chn; ++t)
                            acc += attn[static_cast<std::size_t>(t)] *
                                   params.wo[static_cast<std::size_t>(t) * chn + o];
                        worst = std::max(worst,
                                         std::abs(acc - ours[static_cast<std::size_t>(i)]
                                                            .data[r * chn + o]));
                    }
                }
            }
        }
    }
    c.check(worst < 1e-6, "max deviation " + fmt(worst));
    c.note("max |eva - dense| = " + fmt(worst));
}

// --------------------------------------------------------------------------
// 7: analysis-by-synthesis fit

void criterion_fit() {
    Criterion c(7, "fit 50 gaussians to 2-view oracle targets above 35 dB in 2000 iters, < 60 s");
    const auto start = std::chrono::steady_clock::now();

    SceneConfig cfg;
    cfg.seed = 7;
    cfg.n_views = 2;
    cfg.delta_deg = 45.0;
    cfg.n_gaussians = 50;
    cfg.image_size = 64;
    const SyntheticScene scene = generate_scene(cfg);

    std::vector<Image> targets;
    for (std::size_t v = 0; v < scene.cameras.size(); ++v)
        targets.push_back(oracle_render(scene.ground_truth, scene.cameras[v],
                                        cfg.background)
                              .color);

    Rng rng(101);
    GaussianSet init = scene.ground_truth;
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

    FitConfig fc;
    fc.iterations = 2000;
    fc.lambda_render = 0.0;
    const FitResult result = fit_gaussians(targets, scene.cameras, init, fc);

    double mean_mse = 0.0;
    for (std::size_t v = 0; v < targets.size(); ++v)
        mean_mse += mse(render(result.best, scene.cameras[v], cfg.background).color,
                        targets[v]) /
                    static_cast<double>(targets.size());
    const double db = mean_mse < 1e-10 ? 100.0 : 10.0 * std::log10(1.0 / mean_mse);
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    c.check(db > 35.0, "final PSNR " + fmt(db));
    c.check(secs < 60.0, "runtime " + fmt(secs) + "s");
    c.note("PSNR " + fmt(db) + " dB at iteration " + std::to_string(result.best_iteration));
}

// --------------------------------------------------------------------------
// 8: anchor loss behavior

void criterion_anchor() {
    Criterion c(8, "anchor term aligns perturbed landmark depths; exact zero regularizers");

    SceneConfig cfg;
    cfg.seed = 7;
    cfg.n_views = 2;
    cfg.delta_deg = 45.0;
    cfg.n_gaussians = 50;
    cfg.image_size = 64;
    const SyntheticScene scene = generate_scene(cfg);

    AnchorExperimentConfig ac;
    ac.iterations = 120;
    ac.perturbation = 0.05;
    ac.weights.tolerance = 0.01;
    ac.weights.lambda3 = 1.0;

    ac.use_anchor = false;
    const AnchorExperimentResult baseline = run_anchor_experiment(scene, ac);
    ac.use_anchor = true;
    const AnchorExperimentResult anchored = run_anchor_experiment(scene, ac);

    c.check(anchored.final_mean_dist < baseline.final_mean_dist,
            "anchored " + fmt(anchored.final_mean_dist) + " !< baseline " +
                fmt(baseline.final_mean_dist));
    c.check(anchored.final_mean_dist < ac.weights.tolerance,
            "final dist " + fmt(anchored.final_mean_dist) + " above t");

    // exact zeros at the boundary attribute values
    GaussianSet flat(3);
    std::fill(flat.opacities.begin(), flat.opacities.end(), 1.0f);
    std::fill(flat.scales.begin(), flat.scales.end(), 0.0f);
    const AnchorLossResult reg = anchor_loss({flat}, {scene.cameras[0]},
                                             {PositionMap(64, 64)}, LandmarkSet{}, ac.weights);
    c.check(reg.opacity_term == 0.0, "opacity term " + fmt(reg.opacity_term));
    c.check(reg.scale_term == 0.0, "scale term " + fmt(reg.scale_term));
    c.note("dist " + fmt(baseline.initial_mean_dist) + " -> " + fmt(anchored.final_mean_dist) +
           " anchored vs " + fmt(baseline.final_mean_dist) + " baseline");
}

// --------------------------------------------------------------------------
// 9: geometry round trips

void criterion_geometry() {
    Criterion c(9, "projection round trips < 1e-9 over 1e6 samples; two-view < 1e-6");
    Rng rng(2024);
    double worst_rt = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
        const CameraModel cam(80.0 + rng.uniform(0.0, 60.0), 80.0 + rng.uniform(0.0, 60.0),
                              40.0 + rng.uniform(0.0, 20.0), 40.0 + rng.uniform(0.0, 20.0), 100,
                              100, testing::random_pose(rng, 2.0));
        for (int i = 0; i < 50000; ++i) {
            const double u = rng.uniform(0.0, 100.0);
            const double v = rng.uniform(0.0, 100.0);
            const double d = rng.uniform(0.05, 20.0);
            const PixelPoint p = project(cam, unproject(cam, u, v, d));
            worst_rt = std::max({worst_rt, std::abs(p.u - u), std::abs(p.v - v),
                                 std::abs(p.depth - d)});
        }
    }
    c.check(worst_rt < 1e-9, "worst round trip " + fmt(worst_rt));

    double worst_two = 0.0;
    for (int trial = 0; trial < 10000; ++trial) {
        const CameraModel cam_a(100, 100, 50, 50, 100, 100, testing::random_pose(rng, 1.5));
        const CameraModel cam_b(90, 95, 50, 50, 100, 100, testing::random_pose(rng, 1.5));
        const Eigen::Vector3d world(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
        try {
            const PixelPoint a = project(cam_a, world);
            const PixelPoint b = project(cam_b, world);
            const Eigen::Vector3d pa = unproject(cam_a, a.u, a.v, a.depth);
            const Eigen::Vector3d pb = unproject(cam_b, b.u, b.v, b.depth);
            worst_two = std::max(worst_two, (pa - pb).norm());
        } catch (const Error&) {
            continue;
        }
    }
    c.check(worst_two < 1e-6, "worst two-view gap " + fmt(worst_two));
    c.note("round trip " + fmt(worst_rt) + ", two-view " + fmt(worst_two));
}

// --------------------------------------------------------------------------
// 10: CLI determinism

std::map<std::string, std::string> dir_contents(const fs::path& dir) {
    std::map<std::string, std::string> contents;
    for (const auto& entry : fs::recursive_directory_iterator(dir)) {
        if (!entry.is_regular_file()) continue;
        std::ifstream in(entry.path(), std::ios::binary);
        contents[fs::relative(entry.path(), dir).string()] =
            std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    }
    return contents;
}

void criterion_determinism(const std::string& cli) {
    Criterion c(10, "gen/render/fit are byte-identical under --deterministic");
    if (cli.empty()) {
        c.check(false, "no --cli path provided");
        return;
    }
    const fs::path work = fs::temp_directory_path() / ("evasplat_accept_" +
                                                       std::to_string(::getpid()));
    fs::remove_all(work);
    fs::create_directories(work);

    auto run = [&](const std::string& args) {
        const std::string cmd = cli + " " + args + " > /dev/null 2>&1";
        return std::system(cmd.c_str()) == 0;
    };

    const std::string bundle = (work / "bundle").string();
    const std::string gen_args = "gen --seed 7 --views 2 --size 48 --gaussians 30 "
                                 "--deterministic --out " + bundle;
    bool ok = run(gen_args);
    const auto gen_first = dir_contents(work / "bundle");
    ok = ok && run(gen_args);
    const auto gen_second = dir_contents(work / "bundle");
    c.check(ok && gen_first == gen_second, "gen runs differ");

    const std::string render_args = "render --input " + bundle + " --view 0 --deterministic "
                                    "--out " + (work / "render").string();
    ok = run(render_args);
    const auto render_first = dir_contents(work / "render");
    ok = ok && run(render_args);
    const auto render_second = dir_contents(work / "render");
    c.check(ok && render_first == render_second, "render runs differ");

    const std::string fit_args = "fit --input " + bundle + " --iters 25 --deterministic --out " +
                                 (work / "fit").string();
    ok = run(fit_args);
    const auto fit_first = dir_contents(work / "fit");
    ok = ok && run(fit_args);
    const auto fit_second = dir_contents(work / "fit");
    c.check(ok && fit_first == fit_second, "fit runs differ");

    fs::remove_all(work);
}

}  // namespace

int main(int argc, char** argv) {
    std::string cli;
    for (int i = 1; i + 1 < argc; ++i)
        if (std::string(argv[i]) == "--cli") cli = argv[i + 1];

    criteria_oracle_and_unity();
    criterion_gradients();
    criterion_alignment();
    criterion_memory_scaling();
    criterion_dense_equivalence();
    criterion_fit();
    criterion_anchor();
    criterion_geometry();
    criterion_determinism(cli);

    if (g_failures > 0) {
        std::printf("%d criterion(s) failed\n", g_failures);
        return 1;
    }
    std::printf("all acceptance criteria passed\n");
    return 0;
}
