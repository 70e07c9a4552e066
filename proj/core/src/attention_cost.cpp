#include "evasplat/attention_cost.hpp"

#include <algorithm>
#include <chrono>
#include <stdexcept>
#include <vector>

#include "evasplat/rng.hpp"

namespace evasplat {

namespace {
constexpr int kBenchHeads = 4;
constexpr int kBenchIterations = 2;  // default shift schedule: 0, w/2
constexpr std::uint64_t kSoftmaxFlopsPerElement = 5;

std::vector<WindowSpan> spans_for(int width, int window) {
    // shift does not change span lengths, so cost models use shift 0
    return window_partition(width, window, 0).spans;
}
}  // namespace

std::vector<BenchShape> default_bench_shapes() {
    return {{2, 64, 128, 128}, {2, 64, 256, 256}, {2, 32, 256, 256}};
}

const char* variant_name(AttentionVariant v) {
    switch (v) {
        case AttentionVariant::kEvaW16: return "eva_w16";
        case AttentionVariant::kEvaW32: return "eva_w32";
        case AttentionVariant::kEvaW64: return "eva_w64";
        case AttentionVariant::kFullCrossView: return "full_cross_view";
    }
    return "?";
}

AttentionVariant variant_from_name(const std::string& name) {
    if (name == "eva_w16") return AttentionVariant::kEvaW16;
    if (name == "eva_w32") return AttentionVariant::kEvaW32;
    if (name == "eva_w64") return AttentionVariant::kEvaW64;
    if (name == "full_cross_view") return AttentionVariant::kFullCrossView;
    throw Error(errc::kBadConfig, "unknown attention variant '" + name + "'");
}

int variant_window(AttentionVariant v) {
    switch (v) {
        case AttentionVariant::kEvaW16: return 16;
        case AttentionVariant::kEvaW32: return 32;
        case AttentionVariant::kEvaW64: return 64;
        case AttentionVariant::kFullCrossView: return 0;
    }
    return 0;
}

std::size_t attention_peak_model(AttentionVariant variant, const BenchShape& shape, int heads,
                                 int num_iterations) {
    (void)heads;
    (void)num_iterations;  // buffers are freed between iterations
    const std::size_t st = sizeof(float);
    const std::size_t n = static_cast<std::size_t>(shape.views);
    const std::size_t px = static_cast<std::size_t>(shape.height) * shape.width;
    const std::size_t c = static_cast<std::size_t>(shape.channels);
    const std::size_t plane = px * c * st;

    if (variant == AttentionVariant::kFullCrossView) {
        // xg,k,v per view + q + kcat + vcat + scores + out
        return 3 * n * plane + plane + 2 * (n - 1) * plane + (n - 1) * px * px * st + plane;
    }
    const std::size_t w = static_cast<std::size_t>(variant_window(variant));
    const std::size_t lkv = (n - 1) * w;
    // xg,q,k,v,out per view + span scratch {qspan, kcat, vcat, scores, ospan}
    return 5 * n * plane + (w * c + 2 * lkv * c + w * lkv + w * c) * st;
}

std::uint64_t attention_score_elements(AttentionVariant variant, const BenchShape& shape,
                                       int heads, int num_iterations) {
    const std::uint64_t n = static_cast<std::uint64_t>(shape.views);
    const std::uint64_t px = static_cast<std::uint64_t>(shape.height) * shape.width;
    if (variant == AttentionVariant::kFullCrossView)
        return static_cast<std::uint64_t>(heads) * n * px * (n - 1) * px;

    std::uint64_t per_row = 0;
    for (const WindowSpan& sp : spans_for(shape.width, variant_window(variant)))
        per_row += static_cast<std::uint64_t>(sp.length) * (n - 1) * sp.length;
    return static_cast<std::uint64_t>(num_iterations) * heads * n * shape.height * per_row;
}

std::uint64_t attention_flop_model(AttentionVariant variant, const BenchShape& shape, int heads,
                                   int num_iterations) {
    const std::uint64_t n = static_cast<std::uint64_t>(shape.views);
    const std::uint64_t px = static_cast<std::uint64_t>(shape.height) * shape.width;
    const std::uint64_t c = static_cast<std::uint64_t>(shape.channels);
    const std::uint64_t iters =
        variant == AttentionVariant::kFullCrossView ? 1 : static_cast<std::uint64_t>(num_iterations);

    // 4 projections (q,k,v,out) at 2*px*C^2 each, plus the residual add.
    std::uint64_t flops = iters * n * (8 * px * c * c + px * c);
    // scores and prob*value GEMMs cost 2*len*lkv*C together per head-slice sweep,
    // softmax a few flops per score element.
    const std::uint64_t elems_all_heads =
        attention_score_elements(variant, shape, heads, num_iterations);
    const std::uint64_t elems = elems_all_heads / static_cast<std::uint64_t>(heads);
    flops += 4 * elems * c + kSoftmaxFlopsPerElement * elems_all_heads;
    return flops;
}

CostReport bench_attention(const BenchShape& shape, AttentionVariant variant, int repeats,
                           std::size_t budget_bytes, std::uint64_t seed) {
    if (repeats < 1) repeats = 1;
    const int window = variant_window(variant);

    CostReport report;
    report.variant = variant_name(variant);
    report.views = shape.views;
    report.channels = shape.channels;
    report.height = shape.height;
    report.width = shape.width;
    report.window = window;
    report.flop_count = attention_flop_model(variant, shape, kBenchHeads, kBenchIterations);
    report.score_elements =
        attention_score_elements(variant, shape, kBenchHeads, kBenchIterations);
    const std::size_t model_peak =
        attention_peak_model(variant, shape, kBenchHeads, kBenchIterations);
    report.peak_bytes = model_peak;

    if (model_peak > budget_bytes) {
        report.oom_budget = true;
        return report;
    }

    // Deterministic workload.
    Rng rng(seed);
    std::vector<FeatureGrid> grids;
    for (int i = 0; i < shape.views; ++i) {
        FeatureGrid g(i, shape.height, shape.width, shape.channels);
        Rng stream = rng.fork(static_cast<std::uint64_t>(i));
        for (auto& x : g.data) x = static_cast<float>(stream.uniform(-1.0, 1.0));
        grids.push_back(std::move(g));
    }
    const EvaParams params = EvaParams::seeded(seed ^ 0x5eedULL, shape.height, shape.width,
                                               shape.channels, kBenchHeads,
                                               window == 0 ? 32 : window, kBenchIterations);

    AllocationMeter meter(budget_bytes);
    SoftmaxProbe probe;
    std::vector<double> times_ms;
    try {
        for (int r = 0; r < repeats; ++r) {
            const auto t0 = std::chrono::steady_clock::now();
            if (variant == AttentionVariant::kFullCrossView)
                (void)full_cross_view_forward(grids, params, &meter, &probe);
            else
                (void)eva_forward(grids, params, &meter, &probe);
            const auto t1 = std::chrono::steady_clock::now();
            times_ms.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
        }
    } catch (const Error& e) {
        if (e.code() != errc::kOutOfMemoryBudget) throw;
        report.oom_budget = true;
        return report;
    }

    if (meter.peak() != model_peak)
        throw std::logic_error("attention peak model out of sync with the meter: " +
                               std::to_string(meter.peak()) + " vs " + std::to_string(model_peak));

    std::sort(times_ms.begin(), times_ms.end());
    report.median_ms = times_ms[times_ms.size() / 2];
    report.peak_bytes = meter.peak();
    report.softmax_row_sum_error = probe.max_row_sum_error;
    return report;
}

std::string cost_report_csv_row(const CostReport& report) {
    std::string row = report.variant;
    row += "," + std::to_string(report.views);
    row += "," + std::to_string(report.channels);
    row += "," + std::to_string(report.height);
    row += "," + std::to_string(report.width);
    row += "," + std::to_string(report.window);
    row += "," + (report.oom_budget ? std::string("OOM-budget") : std::to_string(report.median_ms));
    row += "," + std::to_string(report.peak_bytes);
    row += "," + std::to_string(report.flop_count);
    return row;
}

}  // namespace evasplat
