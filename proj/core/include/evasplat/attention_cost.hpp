#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "evasplat/attention.hpp"

namespace evasplat {

enum class AttentionVariant { kEvaW16, kEvaW32, kEvaW64, kFullCrossView };

const char* variant_name(AttentionVariant v);
AttentionVariant variant_from_name(const std::string& name);
int variant_window(AttentionVariant v);  // 0 for the full variant

struct BenchShape {
    int views = 2;
    int channels = 64;
    int height = 256;
    int width = 256;
};

/// The default benchmark grid: 2x64x128^2, 2x64x256^2 and 2x32x256^2.
std::vector<BenchShape> default_bench_shapes();

/// Scratch bytes over which kernels may allocate before a cell is recorded
/// as OOM-budget instead of run.
inline constexpr std::size_t kDefaultAttentionBudget = std::size_t(1) << 30;

struct CostReport {
    std::string variant;
    int views = 0, channels = 0, height = 0, width = 0, window = 0;
    double median_ms = 0.0;
    std::size_t peak_bytes = 0;       // measured when run, modeled when refused
    std::uint64_t flop_count = 0;
    std::uint64_t score_elements = 0;
    bool oom_budget = false;
    double softmax_row_sum_error = 0.0;
};

/// Peak scratch bytes the f32 kernels request for this shape. Mirrors the
/// allocation schedule exactly; bench_attention asserts the meter agrees
/// whenever a cell actually runs.
std::size_t attention_peak_model(AttentionVariant variant, const BenchShape& shape, int heads,
                                 int num_iterations);

std::uint64_t attention_flop_model(AttentionVariant variant, const BenchShape& shape, int heads,
                                   int num_iterations);

/// Logical attention-score entries (len x keys per window and head).
std::uint64_t attention_score_elements(AttentionVariant variant, const BenchShape& shape,
                                       int heads, int num_iterations);

/// Runs the f32 kernel `repeats` times on a seeded workload and reports the
/// median wall time, peak scratch bytes and the deterministic cost model.
/// Shapes whose scratch exceeds the budget are reported, not run.
CostReport bench_attention(const BenchShape& shape, AttentionVariant variant, int repeats,
                           std::size_t budget_bytes = kDefaultAttentionBudget,
                           std::uint64_t seed = 20240915);

/// CSV row in the pinned column order:
/// variant,views,C,H,W,window,median_ms,peak_bytes,flop_count
std::string cost_report_csv_row(const CostReport& report);
inline constexpr const char* kCostCsvHeader =
    "variant,views,C,H,W,window,median_ms,peak_bytes,flop_count";

}  // namespace evasplat
