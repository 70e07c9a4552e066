#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "evasplat/error.hpp"

namespace evasplat {

/// Per-view 2D grid of C-dim feature vectors, row-major (y, x, c).
template <typename T>
struct BasicFeatureGrid {
    int view_id = 0;
    int height = 0;
    int width = 0;
    int channels = 0;
    std::vector<T> data;

    BasicFeatureGrid() = default;
    BasicFeatureGrid(int view, int h, int w, int c)
        : view_id(view), height(h), width(w), channels(c),
          data(static_cast<std::size_t>(h) * w * c, T(0)) {}

    T& at(int y, int x, int c) {
        return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
    }
    T at(int y, int x, int c) const {
        return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
    }
    bool same_shape(const BasicFeatureGrid& o) const {
        return height == o.height && width == o.width && channels == o.channels;
    }
};

using FeatureGrid = BasicFeatureGrid<float>;
using FeatureGridD = BasicFeatureGrid<double>;

/// Shifted-window cross-view attention parameters. Projection matrices are
/// C x C row-major with row-vector convention (q = x * Wq); heads split the
/// output dimension into contiguous slices. gamma is a positional embedding
/// shared by all views.
template <typename T>
struct BasicEvaParams {
    int height = 0;
    int width = 0;
    int channels = 0;
    int heads = 4;
    int window = 32;          // pixels along x; one of {16, 32, 64}
    int num_iterations = 2;   // shift alternates 0, window/2, 0, ...

    std::vector<T> gamma;  // H*W*C
    std::vector<T> wq, wk, wv, wo;  // C*C each

    void validate() const;

    /// Deterministic seeded init: gamma ~ U(-0.02, 0.02), projections
    /// ~ U(-a, a) with a = 1/sqrt(C).
    static BasicEvaParams seeded(std::uint64_t seed, int height, int width, int channels,
                                 int heads, int window, int num_iterations);

    /// All-zero projections and gamma: the residual path makes the operator
    /// an identity.
    static BasicEvaParams zeros(int height, int width, int channels, int heads, int window,
                                int num_iterations);

    template <typename U>
    BasicEvaParams<U> cast() const {
        BasicEvaParams<U> out;
        out.height = height; out.width = width; out.channels = channels;
        out.heads = heads; out.window = window; out.num_iterations = num_iterations;
        auto cp = [](const std::vector<T>& src, std::vector<U>& dst) {
            dst.assign(src.begin(), src.end());
        };
        cp(gamma, out.gamma); cp(wq, out.wq); cp(wk, out.wk); cp(wv, out.wv); cp(wo, out.wo);
        return out;
    }
};

using EvaParams = BasicEvaParams<float>;
using EvaParamsD = BasicEvaParams<double>;

/// One cyclic span of a row: pixels (start + k) % width for k < length.
struct WindowSpan {
    int start = 0;
    int length = 0;
};

/// Row partition into ceil(width/window) cyclic spans offset by shift.
/// Identical for every row of the grid.
struct WindowLayout {
    int width = 0;
    int window = 0;
    int shift = 0;
    std::vector<WindowSpan> spans;
};

/// Splits a row of `width` pixels into cyclic windows. Every pixel lands in
/// exactly one span. Throws WindowWiderThanImage when window > width.
WindowLayout window_partition(int width, int window, int shift);

template <typename T>
WindowLayout window_partition(const BasicFeatureGrid<T>& grid, int window, int shift) {
    return window_partition(grid.width, window, shift);
}

/// Tracks scratch bytes used by the attention kernels. acquire() throws
/// OutOfMemoryBudget when the running total would exceed the budget; the
/// requested bytes still count toward peak so refused runs report their
/// requirement.
class AllocationMeter {
public:
    explicit AllocationMeter(std::size_t budget_bytes = SIZE_MAX) : budget_(budget_bytes) {}

    void acquire(std::size_t bytes);
    void release(std::size_t bytes);

    std::size_t peak() const { return peak_; }
    std::size_t current() const { return current_; }
    bool overflowed() const { return overflowed_; }

private:
    std::size_t budget_;
    std::size_t current_ = 0;
    std::size_t peak_ = 0;
    bool overflowed_ = false;
};

/// Diagnostics hook: softmax rows must sum to 1.
struct SoftmaxProbe {
    double max_row_sum_error = 0.0;
};

/// Shifted 1D-window cross-view attention. Per iteration r the layout shift
/// is (r % 2) * window / 2; queries come from each view's own span, keys and
/// values from the aligned spans of all other views, with gamma added to
/// both; heads use scale 1/sqrt(C/heads); output adds residually onto the
/// input. All views update synchronously from the same iteration input.
template <typename T>
std::vector<BasicFeatureGrid<T>> eva_forward(const std::vector<BasicFeatureGrid<T>>& grids,
                                             const BasicEvaParams<T>& params,
                                             AllocationMeter* meter = nullptr,
                                             SoftmaxProbe* probe = nullptr);

/// Full-image cross-view attention (the CVA comparator): every pixel of a
/// view attends to every pixel of every other view. Same projection and
/// residual semantics as eva_forward, no windows, single iteration.
template <typename T>
std::vector<BasicFeatureGrid<T>> full_cross_view_forward(
    const std::vector<BasicFeatureGrid<T>>& grids, const BasicEvaParams<T>& params,
    AllocationMeter* meter = nullptr, SoftmaxProbe* probe = nullptr);

struct EvaGradients {
    std::vector<std::vector<double>> d_grids;  // per view, H*W*C
    std::vector<double> d_gamma;
    std::vector<double> d_wq, d_wk, d_wv, d_wo;
};

/// Parameter checkpoint: raw little-endian f32 tensors (gamma, wq, wk, wv,
/// wo in that order) at `path`, with a JSON sidecar `path + ".json"`
/// describing the shapes.
void save_eva_params(const std::string& path, const EvaParams& params);
EvaParams load_eva_params(const std::string& path);

/// Exact adjoint of eva_forward with respect to the inputs, gamma and all
/// projection matrices. d_out holds one H*W*C adjoint array per view.
EvaGradients eva_backward(const std::vector<FeatureGridD>& grids, const EvaParamsD& params,
                          const std::vector<std::vector<double>>& d_out);

}  // namespace evasplat
