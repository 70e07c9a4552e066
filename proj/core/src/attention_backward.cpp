#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "evasplat/attention.hpp"

namespace evasplat {

namespace {

using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Map = Eigen::Map<Mat>;
using CMap = Eigen::Map<const Mat>;

void gather_rows(const Mat& src, int width, int y, const WindowSpan& sp, Mat& dst) {
    for (int k = 0; k < sp.length; ++k)
        dst.row(k) = src.row(static_cast<Eigen::Index>(y) * width + (sp.start + k) % width);
}

void scatter_add_rows(const Mat& src, int width, int y, const WindowSpan& sp, Mat& dst) {
    for (int k = 0; k < sp.length; ++k)
        dst.row(static_cast<Eigen::Index>(y) * width + (sp.start + k) % width) += src.row(k);
}

struct IterationState {
    std::vector<Mat> xg, q, k, v, attn;  // per view; attn is the pre-Wo output
};

}  // namespace

EvaGradients eva_backward(const std::vector<FeatureGridD>& grids, const EvaParamsD& params,
                          const std::vector<std::vector<double>>& d_out) {
    params.validate();
    if (grids.size() < 2)
        throw Error(errc::kFewerThanTwoViews, "cross-view attention needs >= 2 views");
    if (d_out.size() != grids.size())
        throw Error(errc::kShapeMismatch, "one adjoint array per view required");

    const int n = static_cast<int>(grids.size());
    const int hgt = params.height, wid = params.width, chn = params.channels;
    const int heads = params.heads, dh = chn / heads;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
    const Eigen::Index px = static_cast<Eigen::Index>(hgt) * wid;

    for (const auto& g : grids)
        if (g.height != hgt || g.width != wid || g.channels != chn)
            throw Error(errc::kShapeMismatch, "feature grid shape does not match the parameters");
    for (const auto& d : d_out)
        if (d.size() != static_cast<std::size_t>(px) * chn)
            throw Error(errc::kShapeMismatch, "adjoint array size does not match the grid shape");

    CMap wq(params.wq.data(), chn, chn), wk(params.wk.data(), chn, chn),
        wv(params.wv.data(), chn, chn), wo(params.wo.data(), chn, chn);
    CMap gam(params.gamma.data(), px, chn);

    // Forward replay, storing per-iteration inputs and attention internals.
    std::vector<std::vector<Mat>> inputs(static_cast<std::size_t>(params.num_iterations));
    std::vector<Mat> cur(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) cur[i] = CMap(grids[i].data.data(), px, chn);

    std::vector<IterationState> states(static_cast<std::size_t>(params.num_iterations));
    for (int iter = 0; iter < params.num_iterations; ++iter) {
        inputs[iter] = cur;
        IterationState& st = states[iter];
        st.xg.resize(n);
        st.q.resize(n);
        st.k.resize(n);
        st.v.resize(n);
        st.attn.assign(n, Mat::Zero(px, chn));
        for (int i = 0; i < n; ++i) {
            st.xg[i] = cur[i] + gam;
            st.q[i].noalias() = st.xg[i] * wq;
            st.k[i].noalias() = st.xg[i] * wk;
            st.v[i].noalias() = st.xg[i] * wv;
        }

        const int shift = (iter % 2) * (params.window / 2);
        const WindowLayout layout = window_partition(wid, params.window, shift);
        const int lkv_max = (n - 1) * params.window;
        Mat qspan(params.window, chn), kcat(lkv_max, chn), vcat(lkv_max, chn);
        Mat ospan(params.window, chn);

        for (int i = 0; i < n; ++i) {
            for (int y = 0; y < hgt; ++y) {
                for (const WindowSpan& sp : layout.spans) {
                    const int len = sp.length;
                    const int lkv = (n - 1) * len;
                    gather_rows(st.q[i], wid, y, sp, qspan);
                    int off = 0;
                    for (int j = 0; j < n; ++j) {
                        if (j == i) continue;
                        Mat block(len, chn);
                        gather_rows(st.k[j], wid, y, sp, block);
                        kcat.middleRows(off, len) = block.topRows(len);
                        gather_rows(st.v[j], wid, y, sp, block);
                        vcat.middleRows(off, len) = block.topRows(len);
                        off += len;
                    }
                    for (int h = 0; h < heads; ++h) {
                        Mat s = qspan.topRows(len).middleCols(h * dh, dh) *
                                kcat.topRows(lkv).middleCols(h * dh, dh).transpose() * scale;
                        for (int r = 0; r < len; ++r) {
                            const double m = s.row(r).maxCoeff();
                            s.row(r) = (s.row(r).array() - m).exp();
                            s.row(r) /= s.row(r).sum();
                        }
                        ospan.topRows(len).middleCols(h * dh, dh).noalias() =
                            s * vcat.topRows(lkv).middleCols(h * dh, dh);
                    }
                    for (int k2 = 0; k2 < len; ++k2)
                        st.attn[i].row(static_cast<Eigen::Index>(y) * wid +
                                       (sp.start + k2) % wid) = ospan.row(k2);
                }
            }
        }
        for (int i = 0; i < n; ++i) cur[i].noalias() += st.attn[i] * wo;
    }

    // Backward sweep.
    EvaGradients grad;
    grad.d_grids.assign(n, std::vector<double>(static_cast<std::size_t>(px) * chn, 0.0));
    grad.d_gamma.assign(params.gamma.size(), 0.0);
    grad.d_wq.assign(params.wq.size(), 0.0);
    grad.d_wk.assign(params.wk.size(), 0.0);
    grad.d_wv.assign(params.wv.size(), 0.0);
    grad.d_wo.assign(params.wo.size(), 0.0);
    Map dwq(grad.d_wq.data(), chn, chn), dwk(grad.d_wk.data(), chn, chn),
        dwv(grad.d_wv.data(), chn, chn), dwo(grad.d_wo.data(), chn, chn);
    Map dgam(grad.d_gamma.data(), px, chn);

    std::vector<Mat> dx(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) dx[i] = CMap(d_out[i].data(), px, chn);

    for (int iter = params.num_iterations - 1; iter >= 0; --iter) {
        const IterationState& st = states[iter];
        const int shift = (iter % 2) * (params.window / 2);
        const WindowLayout layout = window_partition(wid, params.window, shift);

        std::vector<Mat> dq(n, Mat::Zero(px, chn)), dk(n, Mat::Zero(px, chn)),
            dv(n, Mat::Zero(px, chn));

        for (int i = 0; i < n; ++i) {
            // X_next = X + attn * Wo
            const Mat dattn = dx[i] * wo.transpose();
            dwo.noalias() += st.attn[i].transpose() * dx[i];

            for (int y = 0; y < hgt; ++y) {
                for (const WindowSpan& sp : layout.spans) {
                    const int len = sp.length;
                    const int lkv = (n - 1) * len;
                    Mat qspan(len, chn), kcat(lkv, chn), vcat(lkv, chn), dospan(len, chn);
                    gather_rows(st.q[i], wid, y, sp, qspan);
                    gather_rows(dattn, wid, y, sp, dospan);
                    int off = 0;
                    for (int j = 0; j < n; ++j) {
                        if (j == i) continue;
                        Mat block(len, chn);
                        gather_rows(st.k[j], wid, y, sp, block);
                        kcat.middleRows(off, len) = block;
                        gather_rows(st.v[j], wid, y, sp, block);
                        vcat.middleRows(off, len) = block;
                        off += len;
                    }

                    Mat dqspan = Mat::Zero(len, chn), dkcat = Mat::Zero(lkv, chn),
                        dvcat = Mat::Zero(lkv, chn);
                    for (int h = 0; h < heads; ++h) {
                        const auto qh = qspan.middleCols(h * dh, dh);
                        const auto kh = kcat.middleCols(h * dh, dh);
                        const auto vh = vcat.middleCols(h * dh, dh);
                        Mat p = qh * kh.transpose() * scale;
                        for (int r = 0; r < len; ++r) {
                            const double m = p.row(r).maxCoeff();
                            p.row(r) = (p.row(r).array() - m).exp();
                            p.row(r) /= p.row(r).sum();
                        }
                        const auto doh = dospan.middleCols(h * dh, dh);
                        Mat dp = doh * vh.transpose();
                        dvcat.middleCols(h * dh, dh).noalias() += p.transpose() * doh;
                        // softmax adjoint: ds = p .* (dp - rowsum(dp .* p))
                        Mat ds = p;
                        for (int r = 0; r < len; ++r) {
                            const double dot = dp.row(r).cwiseProduct(p.row(r)).sum();
                            ds.row(r).array() = p.row(r).array() * (dp.row(r).array() - dot);
                        }
                        dqspan.middleCols(h * dh, dh).noalias() += ds * kh * scale;
                        dkcat.middleCols(h * dh, dh).noalias() += ds.transpose() * qh * scale;
                    }

                    scatter_add_rows(dqspan, wid, y, sp, dq[i]);
                    int off2 = 0;
                    for (int j = 0; j < n; ++j) {
                        if (j == i) continue;
                        Mat blk = dkcat.middleRows(off2, len);
                        scatter_add_rows(blk, wid, y, sp, dk[j]);
                        blk = dvcat.middleRows(off2, len);
                        scatter_add_rows(blk, wid, y, sp, dv[j]);
                        off2 += len;
                    }
                }
            }
        }

        for (int i = 0; i < n; ++i) {
            Mat dxg = dq[i] * wq.transpose();
            dxg.noalias() += dk[i] * wk.transpose();
            dxg.noalias() += dv[i] * wv.transpose();
            dwq.noalias() += st.xg[i].transpose() * dq[i];
            dwk.noalias() += st.xg[i].transpose() * dk[i];
            dwv.noalias() += st.xg[i].transpose() * dv[i];
            dgam += dxg;
            dx[i] += dxg;  // residual path already carries dx[i]
        }
    }

    for (int i = 0; i < n; ++i)
        Map(grad.d_grids[static_cast<std::size_t>(i)].data(), px, chn) = dx[i];
    return grad;
}

}  // namespace evasplat
