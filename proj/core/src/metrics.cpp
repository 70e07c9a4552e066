#include "evasplat/metrics.hpp"

#include <array>
#include <cmath>

namespace evasplat {

double mse(const Image& a, const Image& b) {
    require_same_shape(a, b);
    double acc = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i) {
        const double d = static_cast<double>(a.data[i]) - b.data[i];
        acc += d * d;
    }
    return a.data.empty() ? 0.0 : acc / static_cast<double>(a.data.size());
}

double psnr(const Image& a, const Image& b) {
    const double err = mse(a, b);
    if (err < 1e-10) return 100.0;
    return 10.0 * std::log10(1.0 / err);
}

namespace {

std::array<double, kSsimWindow> gaussian_kernel() {
    std::array<double, kSsimWindow> k{};
    const int half = kSsimWindow / 2;
    double sum = 0.0;
    for (int i = 0; i < kSsimWindow; ++i) {
        const double d = i - half;
        k[i] = std::exp(-d * d / (2.0 * kSsimSigma * kSsimSigma));
        sum += k[i];
    }
    for (auto& v : k) v /= sum;
    return k;
}

/// Valid-region separable correlation of an H x W plane with the Gaussian
/// window; output is (H-10) x (W-10).
void conv_valid(const std::vector<double>& src, int h, int w,
                const std::array<double, kSsimWindow>& k, std::vector<double>& tmp,
                std::vector<double>& dst) {
    const int ow = w - kSsimWindow + 1;
    const int oh = h - kSsimWindow + 1;
    tmp.assign(static_cast<std::size_t>(h) * ow, 0.0);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < ow; ++x) {
            double acc = 0.0;
            for (int i = 0; i < kSsimWindow; ++i)
                acc += k[i] * src[static_cast<std::size_t>(y) * w + x + i];
            tmp[static_cast<std::size_t>(y) * ow + x] = acc;
        }
    dst.assign(static_cast<std::size_t>(oh) * ow, 0.0);
    for (int y = 0; y < oh; ++y)
        for (int x = 0; x < ow; ++x) {
            double acc = 0.0;
            for (int i = 0; i < kSsimWindow; ++i)
                acc += k[i] * tmp[static_cast<std::size_t>(y + i) * ow + x];
            dst[static_cast<std::size_t>(y) * ow + x] = acc;
        }
}

/// Adjoint of conv_valid: scatters the (H-10)x(W-10) coefficients back onto
/// the full H x W plane.
void conv_transpose(const std::vector<double>& coef, int h, int w,
                    const std::array<double, kSsimWindow>& k, std::vector<double>& tmp,
                    std::vector<double>& dst) {
    const int ow = w - kSsimWindow + 1;
    const int oh = h - kSsimWindow + 1;
    tmp.assign(static_cast<std::size_t>(h) * ow, 0.0);
    for (int y = 0; y < oh; ++y)
        for (int x = 0; x < ow; ++x) {
            const double c = coef[static_cast<std::size_t>(y) * ow + x];
            if (c == 0.0) continue;
            for (int i = 0; i < kSsimWindow; ++i)
                tmp[static_cast<std::size_t>(y + i) * ow + x] += k[i] * c;
        }
    dst.assign(static_cast<std::size_t>(h) * w, 0.0);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < ow; ++x) {
            const double c = tmp[static_cast<std::size_t>(y) * ow + x];
            if (c == 0.0) continue;
            for (int i = 0; i < kSsimWindow; ++i)
                dst[static_cast<std::size_t>(y) * w + x + i] += k[i] * c;
        }
}

struct ChannelPlanes {
    std::vector<double> x, y, mx, my, x2, y2, xy;
};

void check_ssim_inputs(const Image& a, const Image& b) {
    require_same_shape(a, b);
    if (a.height < kSsimWindow || a.width < kSsimWindow)
        throw Error(errc::kShapeMismatch, "images smaller than the 11x11 SSIM window");
}

}  // namespace

double ssim(const Image& a, const Image& b) {
    check_ssim_inputs(a, b);
    const auto kern = gaussian_kernel();
    const int h = a.height, w = a.width;
    const int oh = h - kSsimWindow + 1, ow = w - kSsimWindow + 1;

    std::vector<double> x(static_cast<std::size_t>(h) * w), y(x.size()), prod(x.size());
    std::vector<double> tmp, mx, my, sxx, syy, sxy;
    double total = 0.0;
    for (int c = 0; c < a.channels; ++c) {
        for (int p = 0; p < h * w; ++p) {
            x[p] = a.data[static_cast<std::size_t>(p) * a.channels + c];
            y[p] = b.data[static_cast<std::size_t>(p) * a.channels + c];
        }
        conv_valid(x, h, w, kern, tmp, mx);
        conv_valid(y, h, w, kern, tmp, my);
        for (std::size_t p = 0; p < prod.size(); ++p) prod[p] = x[p] * x[p];
        conv_valid(prod, h, w, kern, tmp, sxx);
        for (std::size_t p = 0; p < prod.size(); ++p) prod[p] = y[p] * y[p];
        conv_valid(prod, h, w, kern, tmp, syy);
        for (std::size_t p = 0; p < prod.size(); ++p) prod[p] = x[p] * y[p];
        conv_valid(prod, h, w, kern, tmp, sxy);

        for (int p = 0; p < oh * ow; ++p) {
            const double mux = mx[p], muy = my[p];
            const double vx = sxx[p] - mux * mux;
            const double vy = syy[p] - muy * muy;
            const double cxy = sxy[p] - mux * muy;
            const double a1 = 2.0 * mux * muy + kSsimC1;
            const double a2 = 2.0 * cxy + kSsimC2;
            const double b1 = mux * mux + muy * muy + kSsimC1;
            const double b2 = vx + vy + kSsimC2;
            total += (a1 * a2) / (b1 * b2);
        }
    }
    return total / (static_cast<double>(oh) * ow * a.channels);
}

SsimResult ssim_with_gradient(const Image& a, const Image& b) {
    check_ssim_inputs(a, b);
    const auto kern = gaussian_kernel();
    const int h = a.height, w = a.width;
    const int oh = h - kSsimWindow + 1, ow = w - kSsimWindow + 1;
    const double inv_count = 1.0 / (static_cast<double>(oh) * ow * a.channels);

    SsimResult out;
    out.d_a.assign(a.data.size(), 0.0);

    std::vector<double> x(static_cast<std::size_t>(h) * w), y(x.size()), prod(x.size());
    std::vector<double> tmp, mx, my, sxx, syy, sxy;
    std::vector<double> c_mu(static_cast<std::size_t>(oh) * ow), c_x2(c_mu.size()),
        c_xy(c_mu.size());
    std::vector<double> t_mu, t_x2, t_xy;

    for (int c = 0; c < a.channels; ++c) {
        for (int p = 0; p < h * w; ++p) {
            x[p] = a.data[static_cast<std::size_t>(p) * a.channels + c];
            y[p] = b.data[static_cast<std::size_t>(p) * a.channels + c];
        }
        conv_valid(x, h, w, kern, tmp, mx);
        conv_valid(y, h, w, kern, tmp, my);
        for (std::size_t p = 0; p < prod.size(); ++p) prod[p] = x[p] * x[p];
        conv_valid(prod, h, w, kern, tmp, sxx);
        for (std::size_t p = 0; p < prod.size(); ++p) prod[p] = y[p] * y[p];
        conv_valid(prod, h, w, kern, tmp, syy);
        for (std::size_t p = 0; p < prod.size(); ++p) prod[p] = x[p] * y[p];
        conv_valid(prod, h, w, kern, tmp, sxy);

        for (int p = 0; p < oh * ow; ++p) {
            const double mux = mx[p], muy = my[p];
            const double vx = sxx[p] - mux * mux;
            const double vy = syy[p] - muy * muy;
            const double cxy = sxy[p] - mux * muy;
            const double a1 = 2.0 * mux * muy + kSsimC1;
            const double a2 = 2.0 * cxy + kSsimC2;
            const double b1 = mux * mux + muy * muy + kSsimC1;
            const double b2 = vx + vy + kSsimC2;
            const double s = (a1 * a2) / (b1 * b2);
            out.value += s;

            // d s / d {mu_x, sxx, sxy} with the variance chain folded in.
            const double ds_dx2 = -s / b2;
            const double ds_dxy = 2.0 * a1 / (b1 * b2);
            const double ds_dmu = 2.0 * muy * a2 / (b1 * b2) - 2.0 * mux * s / b1 -
                                  ds_dx2 * 2.0 * mux - ds_dxy * muy;
            c_mu[p] = ds_dmu;
            c_x2[p] = ds_dx2;
            c_xy[p] = ds_dxy;
        }

        conv_transpose(c_mu, h, w, kern, tmp, t_mu);
        conv_transpose(c_x2, h, w, kern, tmp, t_x2);
        conv_transpose(c_xy, h, w, kern, tmp, t_xy);
        for (int p = 0; p < h * w; ++p)
            out.d_a[static_cast<std::size_t>(p) * a.channels + c] =
                inv_count * (t_mu[p] + 2.0 * x[p] * t_x2[p] + y[p] * t_xy[p]);
    }
    out.value *= inv_count;
    return out;
}

}  // namespace evasplat
