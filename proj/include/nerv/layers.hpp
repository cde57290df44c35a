#pragma once

#include <cstddef>
#include <span>

#include "nerv/config.hpp"
#include "nerv/tensor.hpp"

// Forward/backward kernels of the building blocks. All kernels take flat
// row-major buffers; images are planar (channels, height, width). Backward
// kernels accumulate parameter gradients (+=) and overwrite input gradients.
namespace nerv::ops {

/// y (n x out) = x (n x in) * w^T + b, with w laid out (out x in).
template <typename T>
void linear_forward(std::span<const T> x, int n, int in, std::span<const T> w,
                    std::span<const T> b, int out, std::span<T> y);

/// dx may be empty to skip the input gradient.
template <typename T>
void linear_backward(std::span<const T> x, int n, int in, std::span<const T> w,
                     int out, std::span<const T> dy, std::span<T> dx,
                     std::span<T> dw, std::span<T> db);

/// Stride-1 convolution with zero padding that preserves the spatial size.
/// x: (cin, h, w); weight: (cout, cin, k, k); y: (cout, h, w).
/// `col` is scratch of size cin*k*k*h*w (unused when k == 1).
template <typename T>
void conv2d_forward(std::span<const T> x, int cin, int h, int w,
                    std::span<const T> weight, std::span<const T> bias,
                    int cout, int k, std::span<T> y, std::span<T> col);

/// `col` and `dcol` are scratch of size cin*k*k*h*w; dx may be empty.
template <typename T>
void conv2d_backward(std::span<const T> x, int cin, int h, int w,
                     std::span<const T> weight, int cout, int k,
                     std::span<const T> dy, std::span<T> dx, std::span<T> dw,
                     std::span<T> db, std::span<T> col, std::span<T> dcol);

/// Sub-pixel rearrangement (c*s*s, h, w) -> (c, s*h, s*w) with
/// out(c, s*i+a, s*j+d) = in(c*s*s + a*s + d, i, j).
template <typename T>
void pixel_shuffle(std::span<const T> x, int c, int h, int w, int s,
                   std::span<T> y);

/// Adjoint (and inverse) of pixel_shuffle.
template <typename T>
void pixel_unshuffle(std::span<const T> y, int c, int h, int w, int s,
                     std::span<T> x);

/// Bilinear upsampling by an integer factor with half-pixel centres.
/// x: (c, h, w) -> y: (c, s*h, s*w).
template <typename T>
void bilinear_upsample(std::span<const T> x, int c, int h, int w, int s,
                       std::span<T> y);

template <typename T>
void bilinear_upsample_backward(std::span<const T> dy, int c, int h, int w,
                                int s, std::span<T> dx);

template <typename T>
void activation_forward(Activation a, std::span<const T> x, std::span<T> y);

/// dx = dy * act'(x), with x the pre-activation input.
template <typename T>
void activation_backward(Activation a, std::span<const T> x,
                         std::span<const T> dy, std::span<T> dx);

template <typename T>
T sigmoid(T x);

/// Per-channel normalization statistics saved by the forward pass.
template <typename T>
struct NormCache {
  std::vector<T> mean;     // per group
  std::vector<T> inv_std;  // per group
  std::vector<T> xhat;     // normalized input
};

inline constexpr double kNormEps = 1e-5;
inline constexpr double kBatchNormMomentum = 0.1;

/// Instance norm over x: (n, c, hw) with affine gamma/beta (c).
template <typename T>
void instance_norm_forward(std::span<const T> x, int n, int c, int hw,
                           std::span<const T> gamma, std::span<const T> beta,
                           std::span<T> y, NormCache<T>* cache);

template <typename T>
void instance_norm_backward(const NormCache<T>& cache, int n, int c, int hw,
                            std::span<const T> gamma, std::span<const T> dy,
                            std::span<T> dx, std::span<T> dgamma,
                            std::span<T> dbeta);

/// Batch norm over x: (n, c, hw). In training mode statistics come from the
/// batch and the running estimates are updated in place; otherwise the
/// running estimates are used.
template <typename T>
void batch_norm_forward(std::span<const T> x, int n, int c, int hw,
                        std::span<const T> gamma, std::span<const T> beta,
                        std::span<T> running_mean, std::span<T> running_var,
                        bool training, std::span<T> y, NormCache<T>* cache);

template <typename T>
void batch_norm_backward(const NormCache<T>& cache, int n, int c, int hw,
                         std::span<const T> gamma, std::span<const T> dy,
                         std::span<T> dx, std::span<T> dgamma,
                         std::span<T> dbeta);

}  // namespace nerv::ops

namespace nerv {

/// Public single-image pixel shuffle: (C*S^2, h, w) -> (C, S*h, S*w).
/// Throws ShapeError when the channel count is not divisible by S^2.
Tensor pixel_shuffle(const Tensor& x, int s);

}  // namespace nerv
