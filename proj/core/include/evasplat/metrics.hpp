#pragma once

#include <vector>

#include "evasplat/image.hpp"

namespace evasplat {

/// Mean squared error over all entries.
double mse(const Image& a, const Image& b);

/// 10*log10(1/MSE) for [0,1] images, capped at 100 dB when MSE < 1e-10.
double psnr(const Image& a, const Image& b);

inline constexpr int kSsimWindow = 11;
inline constexpr double kSsimSigma = 1.5;
inline constexpr double kSsimC1 = 0.01 * 0.01;  // (K1*L)^2, L = 1
inline constexpr double kSsimC2 = 0.03 * 0.03;  // (K2*L)^2

/// Mean local SSIM with an 11x11 Gaussian window (sigma 1.5), averaged over
/// the valid interior and all channels. Images must be at least 11x11.
double ssim(const Image& a, const Image& b);

/// ssim plus its gradient with respect to the first image, one entry per
/// element of `a`.
struct SsimResult {
    double value = 0.0;
    std::vector<double> d_a;
};
SsimResult ssim_with_gradient(const Image& a, const Image& b);

}  // namespace evasplat
