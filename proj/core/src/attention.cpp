#include "evasplat/attention.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <memory>
#include <string>

#include "evasplat/rng.hpp"

namespace evasplat {

// ---------------------------------------------------------------------------
// AllocationMeter

void AllocationMeter::acquire(std::size_t bytes) {
    current_ += bytes;
    peak_ = std::max(peak_, current_);
    if (current_ > budget_) {
        overflowed_ = true;
        throw Error(errc::kOutOfMemoryBudget,
                    "attention scratch of " + std::to_string(current_) +
                        " bytes exceeds budget " + std::to_string(budget_));
    }
}

void AllocationMeter::release(std::size_t bytes) {
    current_ = bytes > current_ ? 0 : current_ - bytes;
}

namespace {

/// Scratch vector whose bytes are tracked by an optional meter. When the
/// meter refuses the acquisition nothing is allocated.
template <typename T>
class MeteredVec {
public:
    MeteredVec(AllocationMeter* meter, std::size_t count) : meter_(meter), bytes_(count * sizeof(T)) {
        if (meter_) meter_->acquire(bytes_);
        v_.resize(count, T(0));
    }
    ~MeteredVec() {
        if (meter_) meter_->release(bytes_);
    }
    MeteredVec(const MeteredVec&) = delete;
    MeteredVec& operator=(const MeteredVec&) = delete;

    T* data() { return v_.data(); }
    const T* data() const { return v_.data(); }

private:
    AllocationMeter* meter_;
    std::size_t bytes_;
    std::vector<T> v_;
};

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapMat = Eigen::Map<RowMat<T>>;
template <typename T>
using CMapMat = Eigen::Map<const RowMat<T>>;

template <typename T>
void check_views(const std::vector<BasicFeatureGrid<T>>& grids, const BasicEvaParams<T>& params) {
    params.validate();
    if (grids.size() < 2)
        throw Error(errc::kFewerThanTwoViews,
                    std::to_string(grids.size()) + " views; cross-view attention needs >= 2");
    for (const auto& g : grids) {
        if (g.height != params.height || g.width != params.width || g.channels != params.channels)
            throw Error(errc::kShapeMismatch, "feature grid shape does not match the parameters");
        if (g.data.size() != static_cast<std::size_t>(g.height) * g.width * g.channels)
            throw Error(errc::kShapeMismatch, "feature grid storage does not match its shape");
    }
}

/// Copies the span's rows (cyclic in x) of a row-major HW x C buffer into
/// a contiguous len x C block.
template <typename T>
void gather_span(const T* src, int width, int channels, int y, const WindowSpan& sp, T* dst) {
    for (int k = 0; k < sp.length; ++k) {
        const int x = (sp.start + k) % width;
        const T* row = src + (static_cast<std::size_t>(y) * width + x) * channels;
        std::copy(row, row + channels, dst + static_cast<std::size_t>(k) * channels);
    }
}

template <typename T>
void scatter_span(const T* src, int width, int channels, int y, const WindowSpan& sp, T* dst) {
    for (int k = 0; k < sp.length; ++k) {
        const int x = (sp.start + k) % width;
        T* row = dst + (static_cast<std::size_t>(y) * width + x) * channels;
        std::copy(src + static_cast<std::size_t>(k) * channels,
                  src + static_cast<std::size_t>(k + 1) * channels, row);
    }
}

/// Row softmax in place, numerically stabilized by the row max.
template <typename T>
void softmax_rows(T* scores, int rows, int cols, SoftmaxProbe* probe) {
    for (int r = 0; r < rows; ++r) {
        T* row = scores + static_cast<std::size_t>(r) * cols;
        T m = row[0];
        for (int c = 1; c < cols; ++c) m = std::max(m, row[c]);
        T denom = T(0);
        for (int c = 0; c < cols; ++c) {
            row[c] = std::exp(row[c] - m);
            denom += row[c];
        }
        const T inv = T(1) / denom;
        for (int c = 0; c < cols; ++c) row[c] *= inv;
        if (probe) {
            T s = T(0);
            for (int c = 0; c < cols; ++c) s += row[c];
            probe->max_row_sum_error =
                std::max(probe->max_row_sum_error, std::abs(static_cast<double>(s) - 1.0));
        }
    }
}

/// One window's multi-head attention: q (len x C), k/v (lkv x C), output
/// (len x C). `scores` must hold len x lkv scalars.
template <typename T>
void window_attention(const T* q, const T* k, const T* v, int len, int lkv, int channels,
                      int heads, T* scores, T* out, SoftmaxProbe* probe) {
    const int dh = channels / heads;
    const T scale = T(1) / std::sqrt(static_cast<T>(dh));
    CMapMat<T> qm(q, len, channels), km(k, lkv, channels), vm(v, lkv, channels);
    MapMat<T> sm(scores, len, lkv), om(out, len, channels);
    for (int h = 0; h < heads; ++h) {
        sm.noalias() = qm.middleCols(h * dh, dh) * km.middleCols(h * dh, dh).transpose() * scale;
        softmax_rows(scores, len, lkv, probe);
        om.middleCols(h * dh, dh).noalias() = sm * vm.middleCols(h * dh, dh);
    }
}

}  // namespace

// ---------------------------------------------------------------------------
// EvaParams

template <typename T>
void BasicEvaParams<T>::validate() const {
    if (height <= 0 || width <= 0 || channels <= 0)
        throw Error(errc::kShapeMismatch, "parameter dimensions must be positive");
    if (heads <= 0 || channels % heads != 0)
        throw Error(errc::kShapeMismatch, "channels must be divisible by heads");
    if (window != 16 && window != 32 && window != 64)
        throw Error(errc::kShapeMismatch, "window size must be one of 16, 32, 64");
    if (num_iterations < 1)
        throw Error(errc::kShapeMismatch, "num_iterations must be >= 1");
    const std::size_t hw = static_cast<std::size_t>(height) * width * channels;
    const std::size_t cc = static_cast<std::size_t>(channels) * channels;
    if (gamma.size() != hw || wq.size() != cc || wk.size() != cc || wv.size() != cc ||
        wo.size() != cc)
        throw Error(errc::kShapeMismatch, "parameter storage does not match its dimensions");
}

template <typename T>
BasicEvaParams<T> BasicEvaParams<T>::seeded(std::uint64_t seed, int height, int width,
                                            int channels, int heads, int window,
                                            int num_iterations) {
    BasicEvaParams<T> p = zeros(height, width, channels, heads, window, num_iterations);
    Rng rng(seed);
    for (auto& g : p.gamma) g = static_cast<T>(rng.uniform(-0.02, 0.02));
    const double a = 1.0 / std::sqrt(static_cast<double>(channels));
    for (auto* w : {&p.wq, &p.wk, &p.wv, &p.wo})
        for (auto& x : *w) x = static_cast<T>(rng.uniform(-a, a));
    return p;
}

template <typename T>
BasicEvaParams<T> BasicEvaParams<T>::zeros(int height, int width, int channels, int heads,
                                           int window, int num_iterations) {
    BasicEvaParams<T> p;
    p.height = height;
    p.width = width;
    p.channels = channels;
    p.heads = heads;
    p.window = window;
    p.num_iterations = num_iterations;
    p.gamma.assign(static_cast<std::size_t>(height) * width * channels, T(0));
    const std::size_t cc = static_cast<std::size_t>(channels) * channels;
    p.wq.assign(cc, T(0));
    p.wk.assign(cc, T(0));
    p.wv.assign(cc, T(0));
    p.wo.assign(cc, T(0));
    return p;
}

template struct BasicEvaParams<float>;
template struct BasicEvaParams<double>;

// ---------------------------------------------------------------------------
// Window partition

WindowLayout window_partition(int width, int window, int shift) {
    if (window <= 0 || width <= 0)
        throw Error(errc::kShapeMismatch, "width and window must be positive");
    if (window > width)
        throw Error(errc::kWindowWiderThanImage, "window " + std::to_string(window) +
                                                     " exceeds row width " + std::to_string(width));
    if (shift < 0 || shift >= window)
        throw Error(errc::kShapeMismatch, "shift must satisfy 0 <= shift < window");

    WindowLayout layout;
    layout.width = width;
    layout.window = window;
    layout.shift = shift;
    const int count = (width + window - 1) / window;
    layout.spans.reserve(static_cast<std::size_t>(count));
    for (int k = 0; k < count; ++k) {
        WindowSpan sp;
        sp.start = (shift + k * window) % width;
        sp.length = std::min(window, width - k * window);
        layout.spans.push_back(sp);
    }
    return layout;
}

// ---------------------------------------------------------------------------
// EVA forward

template <typename T>
std::vector<BasicFeatureGrid<T>> eva_forward(const std::vector<BasicFeatureGrid<T>>& grids,
                                             const BasicEvaParams<T>& params,
                                             AllocationMeter* meter, SoftmaxProbe* probe) {
    check_views(grids, params);
    const int n = static_cast<int>(grids.size());
    const int hgt = params.height, wid = params.width, chn = params.channels;
    const std::size_t plane = static_cast<std::size_t>(hgt) * wid * chn;

    std::vector<BasicFeatureGrid<T>> cur = grids;

    CMapMat<T> wq(params.wq.data(), chn, chn), wk(params.wk.data(), chn, chn),
        wv(params.wv.data(), chn, chn), wo(params.wo.data(), chn, chn);
    CMapMat<T> gam(params.gamma.data(), static_cast<std::size_t>(hgt) * wid, chn);

    for (int iter = 0; iter < params.num_iterations; ++iter) {
        const int shift = (iter % 2) * (params.window / 2);
        const WindowLayout layout = window_partition(wid, params.window, shift);

        // Whole-grid projections; one buffer set per view, alive through the
        // iteration.
        std::vector<std::unique_ptr<MeteredVec<T>>> xg, qb, kb, vb, ob;
        for (int i = 0; i < n; ++i) {
            xg.push_back(std::make_unique<MeteredVec<T>>(meter, plane));
            qb.push_back(std::make_unique<MeteredVec<T>>(meter, plane));
            kb.push_back(std::make_unique<MeteredVec<T>>(meter, plane));
            vb.push_back(std::make_unique<MeteredVec<T>>(meter, plane));
            ob.push_back(std::make_unique<MeteredVec<T>>(meter, plane));
        }
        for (int i = 0; i < n; ++i) {
            CMapMat<T> x(cur[i].data.data(), static_cast<std::size_t>(hgt) * wid, chn);
            MapMat<T> xgm(xg[i]->data(), static_cast<std::size_t>(hgt) * wid, chn);
            xgm = x + gam;
            MapMat<T>(qb[i]->data(), xgm.rows(), chn).noalias() = xgm * wq;
            MapMat<T>(kb[i]->data(), xgm.rows(), chn).noalias() = xgm * wk;
            MapMat<T>(vb[i]->data(), xgm.rows(), chn).noalias() = xgm * wv;
        }

        // Span scratch at maximal sizes, reused for every window.
        const int lkv_max = (n - 1) * params.window;
        MeteredVec<T> qspan(meter, static_cast<std::size_t>(params.window) * chn);
        MeteredVec<T> kcat(meter, static_cast<std::size_t>(lkv_max) * chn);
        MeteredVec<T> vcat(meter, static_cast<std::size_t>(lkv_max) * chn);
        MeteredVec<T> scores(meter, static_cast<std::size_t>(params.window) * lkv_max);
        MeteredVec<T> ospan(meter, static_cast<std::size_t>(params.window) * chn);

        for (int i = 0; i < n; ++i) {
            for (int y = 0; y < hgt; ++y) {
                for (const WindowSpan& sp : layout.spans) {
                    gather_span(qb[i]->data(), wid, chn, y, sp, qspan.data());
                    int off = 0;
                    for (int j = 0; j < n; ++j) {
                        if (j == i) continue;
                        gather_span(kb[j]->data(), wid, chn, y, sp,
                                    kcat.data() + static_cast<std::size_t>(off) * chn);
                        gather_span(vb[j]->data(), wid, chn, y, sp,
                                    vcat.data() + static_cast<std::size_t>(off) * chn);
                        off += sp.length;
                    }
                    window_attention(qspan.data(), kcat.data(), vcat.data(), sp.length, off, chn,
                                     params.heads, scores.data(), ospan.data(), probe);
                    scatter_span(ospan.data(), wid, chn, y, sp, ob[i]->data());
                }
            }
        }

        // Residual update, synchronous across views.
        for (int i = 0; i < n; ++i) {
            MapMat<T> x(cur[i].data.data(), static_cast<std::size_t>(hgt) * wid, chn);
            CMapMat<T> o(ob[i]->data(), x.rows(), chn);
            x.noalias() += o * wo;
        }
    }
    return cur;
}

template std::vector<BasicFeatureGrid<float>> eva_forward(
    const std::vector<BasicFeatureGrid<float>>&, const BasicEvaParams<float>&, AllocationMeter*,
    SoftmaxProbe*);
template std::vector<BasicFeatureGrid<double>> eva_forward(
    const std::vector<BasicFeatureGrid<double>>&, const BasicEvaParams<double>&, AllocationMeter*,
    SoftmaxProbe*);

// ---------------------------------------------------------------------------
// Full cross-view forward (CVA comparator)

template <typename T>
std::vector<BasicFeatureGrid<T>> full_cross_view_forward(
    const std::vector<BasicFeatureGrid<T>>& grids, const BasicEvaParams<T>& params,
    AllocationMeter* meter, SoftmaxProbe* probe) {
    check_views(grids, params);
    const int n = static_cast<int>(grids.size());
    const int hgt = params.height, wid = params.width, chn = params.channels;
    const std::size_t px = static_cast<std::size_t>(hgt) * wid;
    const std::size_t plane = px * chn;

    std::vector<BasicFeatureGrid<T>> out = grids;

    CMapMat<T> wq(params.wq.data(), chn, chn), wk(params.wk.data(), chn, chn),
        wv(params.wv.data(), chn, chn), wo(params.wo.data(), chn, chn);
    CMapMat<T> gam(params.gamma.data(), px, chn);

    std::vector<std::unique_ptr<MeteredVec<T>>> xg, kb, vb;
    for (int i = 0; i < n; ++i) {
        xg.push_back(std::make_unique<MeteredVec<T>>(meter, plane));
        kb.push_back(std::make_unique<MeteredVec<T>>(meter, plane));
        vb.push_back(std::make_unique<MeteredVec<T>>(meter, plane));
    }
    for (int i = 0; i < n; ++i) {
        CMapMat<T> x(grids[i].data.data(), px, chn);
        MapMat<T> xgm(xg[i]->data(), px, chn);
        xgm = x + gam;
        MapMat<T>(kb[i]->data(), px, chn).noalias() = xgm * wk;
        MapMat<T>(vb[i]->data(), px, chn).noalias() = xgm * wv;
    }

    const std::size_t lkv = static_cast<std::size_t>(n - 1) * px;
    MeteredVec<T> qbuf(meter, plane);
    MeteredVec<T> kcat(meter, lkv * chn);
    MeteredVec<T> vcat(meter, lkv * chn);
    MeteredVec<T> scores(meter, px * lkv);  // the quadratic buffer
    MeteredVec<T> obuf(meter, plane);

    for (int i = 0; i < n; ++i) {
        MapMat<T>(qbuf.data(), px, chn).noalias() =
            CMapMat<T>(xg[i]->data(), px, chn) * wq;
        std::size_t off = 0;
        for (int j = 0; j < n; ++j) {
            if (j == i) continue;
            std::copy(kb[j]->data(), kb[j]->data() + plane, kcat.data() + off * chn);
            std::copy(vb[j]->data(), vb[j]->data() + plane, vcat.data() + off * chn);
            off += px;
        }
        window_attention(qbuf.data(), kcat.data(), vcat.data(), static_cast<int>(px),
                         static_cast<int>(lkv), chn, params.heads, scores.data(), obuf.data(),
                         probe);
        MapMat<T> x(out[i].data.data(), px, chn);
        x.noalias() += CMapMat<T>(obuf.data(), px, chn) * wo;
    }
    return out;
}

template std::vector<BasicFeatureGrid<float>> full_cross_view_forward(
    const std::vector<BasicFeatureGrid<float>>&, const BasicEvaParams<float>&, AllocationMeter*,
    SoftmaxProbe*);
template std::vector<BasicFeatureGrid<double>> full_cross_view_forward(
    const std::vector<BasicFeatureGrid<double>>&, const BasicEvaParams<double>&, AllocationMeter*,
    SoftmaxProbe*);

}  // namespace evasplat
