#pragma once

#include <span>

#include "nerv/model.hpp"

namespace nerv {

/// Canonical SSIM parameters: 11x11 Gaussian window, sigma 1.5, constants
/// (0.01 R)^2 and (0.03 R)^2 with dynamic range R = 1. Statistics are taken
/// over windows lying fully inside the image ("valid" filtering).
inline constexpr int kSsimWindow = 11;
inline constexpr double kSsimSigma = 1.5;
inline constexpr double kSsimC1 = 0.01 * 0.01;
inline constexpr double kSsimC2 = 0.03 * 0.03;

/// Multi-scale SSIM weights for the five dyadic scales, finest first.
inline constexpr double kMsSsimWeights[5] = {0.0448, 0.2856, 0.3001, 0.2363, 0.1333};

double mse(const Image& a, const Image& b);

/// 10 log10(1 / MSE), capped at 100 dB (the value for identical images).
double psnr(const Image& a, const Image& b);
double psnr_from_mse(double mse);

/// Mean SSIM over channels and window positions. Throws ShapeError on shape
/// mismatch or images smaller than the window.
double ssim(const Image& a, const Image& b);

/// Number of scales ms_ssim uses for an h x w image: the largest count
/// (at most `max_scales`) whose coarsest level still fits the window.
int ms_ssim_scales(int height, int width, int max_scales = 5);

/// Multi-scale SSIM with 2x2 average-pool downsampling. When the image is too
/// small for `max_scales` levels the coarsest levels are dropped, the weights
/// of the remaining ones renormalized, and a warning logged once. With one
/// scale the result equals ssim().
double ms_ssim(const Image& a, const Image& b, int max_scales = 5);

/// SSIM of planar images (c, h, w) and, when `grad_x` is non-empty, its
/// gradient with respect to `x`.
template <typename T>
double ssim_with_grad(std::span<const T> x, std::span<const T> y, int c, int h, int w,
                      std::span<T> grad_x);

}  // namespace nerv
