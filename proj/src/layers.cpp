#include "nerv/layers.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numbers>

#include "nerv/error.hpp"

namespace nerv::ops {
namespace {

template <typename T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapM = Eigen::Map<Mat<T>>;
template <typename T>
using CMapM = Eigen::Map<const Mat<T>>;
template <typename T>
using CMapV = Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>>;
template <typename T>
using MapV = Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, 1>>;

template <typename T>
void im2col(const T* x, int cin, int h, int w, int k, T* col) {
  const int pad = k / 2;
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  for (int c = 0; c < cin; ++c) {
    const T* src = x + c * plane;
    for (int ki = 0; ki < k; ++ki) {
      for (int kj = 0; kj < k; ++kj) {
        T* dst = col + (static_cast<std::size_t>(c) * k * k + ki * k + kj) * plane;
        const int dx = kj - pad;
        const int x0 = std::max(0, -dx);
        const int x1 = std::min(w, w - dx);
        for (int y = 0; y < h; ++y) {
          const int sy = y + ki - pad;
          T* row = dst + static_cast<std::size_t>(y) * w;
          if (sy < 0 || sy >= h || x0 >= x1) {
            std::fill(row, row + w, T{0});
            continue;
          }
          std::fill(row, row + x0, T{0});
          std::copy(src + static_cast<std::size_t>(sy) * w + x0 + dx,
                    src + static_cast<std::size_t>(sy) * w + x1 + dx, row + x0);
          std::fill(row + x1, row + w, T{0});
        }
      }
    }
  }
}

template <typename T>
void col2im(const T* col, int cin, int h, int w, int k, T* x) {
  const int pad = k / 2;
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  std::fill(x, x + cin * plane, T{0});
  for (int c = 0; c < cin; ++c) {
    T* dst = x + c * plane;
    for (int ki = 0; ki < k; ++ki) {
      for (int kj = 0; kj < k; ++kj) {
        const T* src = col + (static_cast<std::size_t>(c) * k * k + ki * k + kj) * plane;
        const int dx = kj - pad;
        const int x0 = std::max(0, -dx);
        const int x1 = std::min(w, w - dx);
        for (int y = 0; y < h; ++y) {
          const int sy = y + ki - pad;
          if (sy < 0 || sy >= h) continue;
          const T* row = src + static_cast<std::size_t>(y) * w;
          T* out = dst + static_cast<std::size_t>(sy) * w + dx;
          for (int xx = x0; xx < x1; ++xx) out[xx] += row[xx];
        }
      }
    }
  }
}

}  // namespace

template <typename T>
void linear_forward(std::span<const T> x, int n, int in, std::span<const T> w,
                    std::span<const T> b, int out, std::span<T> y) {
  CMapM<T> X(x.data(), n, in);
  CMapM<T> W(w.data(), out, in);
  MapM<T> Y(y.data(), n, out);
  // Row by row, so a sample's output does not depend on the batch size.
  for (int i = 0; i < n; ++i) {
    Y.row(i).noalias() = X.row(i) * W.transpose();
    Y.row(i) += CMapV<T>(b.data(), out).transpose();
  }
}

template <typename T>
void linear_backward(std::span<const T> x, int n, int in, std::span<const T> w,
                     int out, std::span<const T> dy, std::span<T> dx,
                     std::span<T> dw, std::span<T> db) {
  CMapM<T> X(x.data(), n, in);
  CMapM<T> W(w.data(), out, in);
  CMapM<T> dY(dy.data(), n, out);
  MapM<T>(dw.data(), out, in).noalias() += dY.transpose() * X;
  // Plain loops for the bias sums: Eigen's reductions peel to the first
  // aligned element, so their rounding would depend on heap addresses.
  for (int i = 0; i < n; ++i)
    for (int o = 0; o < out; ++o) db[o] += dy[static_cast<std::size_t>(i) * out + o];
  if (!dx.empty()) MapM<T>(dx.data(), n, in).noalias() = dY * W;
}

template <typename T>
void conv2d_forward(std::span<const T> x, int cin, int h, int w,
                    std::span<const T> weight, std::span<const T> bias,
                    int cout, int k, std::span<T> y, std::span<T> col) {
  const int hw = h * w;
  const int ckk = cin * k * k;
  const T* cols = x.data();
  if (k != 1) {
    im2col(x.data(), cin, h, w, k, col.data());
    cols = col.data();
  }
  MapM<T> Y(y.data(), cout, hw);
  Y.noalias() = CMapM<T>(weight.data(), cout, ckk) * CMapM<T>(cols, ckk, hw);
  Y.colwise() += CMapV<T>(bias.data(), cout);
}

template <typename T>
void conv2d_backward(std::span<const T> x, int cin, int h, int w,
                     std::span<const T> weight, int cout, int k,
                     std::span<const T> dy, std::span<T> dx, std::span<T> dw,
                     std::span<T> db, std::span<T> col, std::span<T> dcol) {
  const int hw = h * w;
  const int ckk = cin * k * k;
  const T* cols = x.data();
  if (k != 1) {
    im2col(x.data(), cin, h, w, k, col.data());
    cols = col.data();
  }
  CMapM<T> dY(dy.data(), cout, hw);
  MapM<T>(dw.data(), cout, ckk).noalias() += dY * CMapM<T>(cols, ckk, hw).transpose();
  for (int o = 0; o < cout; ++o) {
    const T* row = dy.data() + static_cast<std::size_t>(o) * hw;
    T acc{0};
    for (int p = 0; p < hw; ++p) acc += row[p];
    db[o] += acc;
  }
  if (dx.empty()) return;
  CMapM<T> W(weight.data(), cout, ckk);
  if (k == 1) {
    MapM<T>(dx.data(), ckk, hw).noalias() = W.transpose() * dY;
    return;
  }
  MapM<T>(dcol.data(), ckk, hw).noalias() = W.transpose() * dY;
  col2im(dcol.data(), cin, h, w, k, dx.data());
}

template <typename T>
void pixel_shuffle(std::span<const T> x, int c, int h, int w, int s,
                   std::span<T> y) {
  const int H = h * s, W = w * s;
  for (int ch = 0; ch < c; ++ch)
    for (int a = 0; a < s; ++a)
      for (int d = 0; d < s; ++d) {
        const T* src = x.data() + (static_cast<std::size_t>(ch) * s * s + a * s + d) * h * w;
        for (int i = 0; i < h; ++i) {
          T* dst = y.data() + (static_cast<std::size_t>(ch) * H + s * i + a) * W + d;
          const T* row = src + static_cast<std::size_t>(i) * w;
          for (int j = 0; j < w; ++j) dst[s * j] = row[j];
        }
      }
}

template <typename T>
void pixel_unshuffle(std::span<const T> y, int c, int h, int w, int s,
                     std::span<T> x) {
  const int H = h * s, W = w * s;
  for (int ch = 0; ch < c; ++ch)
    for (int a = 0; a < s; ++a)
      for (int d = 0; d < s; ++d) {
        T* dst = x.data() + (static_cast<std::size_t>(ch) * s * s + a * s + d) * h * w;
        for (int i = 0; i < h; ++i) {
          const T* src = y.data() + (static_cast<std::size_t>(ch) * H + s * i + a) * W + d;
          T* row = dst + static_cast<std::size_t>(i) * w;
          for (int j = 0; j < w; ++j) row[j] = src[s * j];
        }
      }
}

namespace {

struct Tap {
  int i0, i1;
  double frac;
};

// Source taps for output coordinate o at scale s (half-pixel centres,
// edge-clamped).
Tap bilinear_tap(int o, int n, int s) {
  double src = (o + 0.5) / s - 0.5;
  if (src < 0.0) src = 0.0;
  int i0 = static_cast<int>(src);
  if (i0 > n - 1) i0 = n - 1;
  const int i1 = std::min(i0 + 1, n - 1);
  return {i0, i1, src - i0};
}

}  // namespace

template <typename T>
void bilinear_upsample(std::span<const T> x, int c, int h, int w, int s,
                       std::span<T> y) {
  const int H = h * s, W = w * s;
  std::vector<Tap> ty(H), tx(W);
  for (int i = 0; i < H; ++i) ty[i] = bilinear_tap(i, h, s);
  for (int j = 0; j < W; ++j) tx[j] = bilinear_tap(j, w, s);
  for (int ch = 0; ch < c; ++ch) {
    const T* src = x.data() + static_cast<std::size_t>(ch) * h * w;
    T* dst = y.data() + static_cast<std::size_t>(ch) * H * W;
    for (int i = 0; i < H; ++i) {
      const T fy = static_cast<T>(ty[i].frac);
      const T* r0 = src + static_cast<std::size_t>(ty[i].i0) * w;
      const T* r1 = src + static_cast<std::size_t>(ty[i].i1) * w;
      for (int j = 0; j < W; ++j) {
        const T fx = static_cast<T>(tx[j].frac);
        const T top = r0[tx[j].i0] * (1 - fx) + r0[tx[j].i1] * fx;
        const T bot = r1[tx[j].i0] * (1 - fx) + r1[tx[j].i1] * fx;
        dst[static_cast<std::size_t>(i) * W + j] = top * (1 - fy) + bot * fy;
      }
    }
  }
}

template <typename T>
void bilinear_upsample_backward(std::span<const T> dy, int c, int h, int w,
                                int s, std::span<T> dx) {
  const int H = h * s, W = w * s;
  std::vector<Tap> ty(H), tx(W);
  for (int i = 0; i < H; ++i) ty[i] = bilinear_tap(i, h, s);
  for (int j = 0; j < W; ++j) tx[j] = bilinear_tap(j, w, s);
  std::fill(dx.begin(), dx.end(), T{0});
  for (int ch = 0; ch < c; ++ch) {
    const T* g = dy.data() + static_cast<std::size_t>(ch) * H * W;
    T* dst = dx.data() + static_cast<std::size_t>(ch) * h * w;
    for (int i = 0; i < H; ++i) {
      const T fy = static_cast<T>(ty[i].frac);
      T* r0 = dst + static_cast<std::size_t>(ty[i].i0) * w;
      T* r1 = dst + static_cast<std::size_t>(ty[i].i1) * w;
      for (int j = 0; j < W; ++j) {
        const T fx = static_cast<T>(tx[j].frac);
        const T v = g[static_cast<std::size_t>(i) * W + j];
        r0[tx[j].i0] += v * (1 - fy) * (1 - fx);
        r0[tx[j].i1] += v * (1 - fy) * fx;
        r1[tx[j].i0] += v * fy * (1 - fx);
        r1[tx[j].i1] += v * fy * fx;
      }
    }
  }
}

template <typename T>
T sigmoid(T x) {
  return T{1} / (T{1} + std::exp(-x));
}

namespace {

constexpr double kLeakySlope = 0.01;

template <typename T>
T gelu_cdf(T x) {
  return T{0.5} * (T{1} + std::erf(x * static_cast<T>(std::numbers::sqrt2 / 2)));
}

template <typename T>
T gelu_pdf(T x) {
  return static_cast<T>(0.5 * std::numbers::inv_sqrtpi * std::numbers::sqrt2) *
         std::exp(-T{0.5} * x * x);
}

}  // namespace

template <typename T>
void activation_forward(Activation a, std::span<const T> x, std::span<T> y) {
  const std::size_t n = x.size();
  switch (a) {
    case Activation::relu:
      for (std::size_t i = 0; i < n; ++i) y[i] = x[i] > 0 ? x[i] : T{0};
      break;
    case Activation::leaky_relu:
      for (std::size_t i = 0; i < n; ++i)
        y[i] = x[i] > 0 ? x[i] : static_cast<T>(kLeakySlope) * x[i];
      break;
    case Activation::swish:
      for (std::size_t i = 0; i < n; ++i) y[i] = x[i] * sigmoid(x[i]);
      break;
    case Activation::gelu:
      for (std::size_t i = 0; i < n; ++i) y[i] = x[i] * gelu_cdf(x[i]);
      break;
  }
}

template <typename T>
void activation_backward(Activation a, std::span<const T> x,
                         std::span<const T> dy, std::span<T> dx) {
  const std::size_t n = x.size();
  switch (a) {
    case Activation::relu:
      for (std::size_t i = 0; i < n; ++i) dx[i] = x[i] > 0 ? dy[i] : T{0};
      break;
    case Activation::leaky_relu:
      for (std::size_t i = 0; i < n; ++i)
        dx[i] = x[i] > 0 ? dy[i] : static_cast<T>(kLeakySlope) * dy[i];
      break;
    case Activation::swish:
      for (std::size_t i = 0; i < n; ++i) {
        const T s = sigmoid(x[i]);
        dx[i] = dy[i] * (s + x[i] * s * (1 - s));
      }
      break;
    case Activation::gelu:
      for (std::size_t i = 0; i < n; ++i)
        dx[i] = dy[i] * (gelu_cdf(x[i]) + x[i] * gelu_pdf(x[i]));
      break;
  }
}

namespace {

// Shared affine backward for a normalization whose groups are given by
// `group_of(ni, ci)`; `count` elements per group.
template <typename T, typename GroupFn>
void norm_backward(const NormCache<T>& cache, int n, int c, int hw,
                   std::span<const T> gamma, std::span<const T> dy,
                   std::span<T> dx, std::span<T> dgamma, std::span<T> dbeta,
                   std::size_t groups, double count, GroupFn group_of) {
  std::vector<double> sum_dxhat(groups, 0.0), sum_dxhat_xhat(groups, 0.0);
  for (int ni = 0; ni < n; ++ni)
    for (int ci = 0; ci < c; ++ci) {
      const std::size_t base = (static_cast<std::size_t>(ni) * c + ci) * hw;
      const std::size_t g = group_of(ni, ci);
      double sg = 0.0, sgx = 0.0;
      for (int p = 0; p < hw; ++p) {
        sg += dy[base + p];
        sgx += static_cast<double>(dy[base + p]) * cache.xhat[base + p];
      }
      dbeta[ci] += static_cast<T>(sg);
      dgamma[ci] += static_cast<T>(sgx);
      sum_dxhat[g] += sg * gamma[ci];
      sum_dxhat_xhat[g] += sgx * gamma[ci];
    }
  for (int ni = 0; ni < n; ++ni)
    for (int ci = 0; ci < c; ++ci) {
      const std::size_t base = (static_cast<std::size_t>(ni) * c + ci) * hw;
      const std::size_t g = group_of(ni, ci);
      const double m1 = sum_dxhat[g] / count;
      const double m2 = sum_dxhat_xhat[g] / count;
      const double inv = cache.inv_std[g];
      for (int p = 0; p < hw; ++p) {
        const double dxhat = static_cast<double>(dy[base + p]) * gamma[ci];
        dx[base + p] = static_cast<T>(inv * (dxhat - m1 - cache.xhat[base + p] * m2));
      }
    }
}

}  // namespace

template <typename T>
void instance_norm_forward(std::span<const T> x, int n, int c, int hw,
                           std::span<const T> gamma, std::span<const T> beta,
                           std::span<T> y, NormCache<T>* cache) {
  if (cache) {
    cache->mean.assign(static_cast<std::size_t>(n) * c, T{0});
    cache->inv_std.assign(static_cast<std::size_t>(n) * c, T{0});
    cache->xhat.resize(x.size());
  }
  for (int ni = 0; ni < n; ++ni)
    for (int ci = 0; ci < c; ++ci) {
      const std::size_t base = (static_cast<std::size_t>(ni) * c + ci) * hw;
      double mean = 0.0;
      for (int p = 0; p < hw; ++p) mean += x[base + p];
      mean /= hw;
      double var = 0.0;
      for (int p = 0; p < hw; ++p) {
        const double d = x[base + p] - mean;
        var += d * d;
      }
      var /= hw;
      const double inv = 1.0 / std::sqrt(var + kNormEps);
      for (int p = 0; p < hw; ++p) {
        const double xh = (x[base + p] - mean) * inv;
        if (cache) cache->xhat[base + p] = static_cast<T>(xh);
        y[base + p] = static_cast<T>(gamma[ci] * xh + beta[ci]);
      }
      if (cache) {
        cache->mean[ni * c + ci] = static_cast<T>(mean);
        cache->inv_std[ni * c + ci] = static_cast<T>(inv);
      }
    }
}

template <typename T>
void instance_norm_backward(const NormCache<T>& cache, int n, int c, int hw,
                            std::span<const T> gamma, std::span<const T> dy,
                            std::span<T> dx, std::span<T> dgamma,
                            std::span<T> dbeta) {
  norm_backward(cache, n, c, hw, gamma, dy, dx, dgamma, dbeta,
                static_cast<std::size_t>(n) * c, static_cast<double>(hw),
                [c](int ni, int ci) { return static_cast<std::size_t>(ni) * c + ci; });
}

template <typename T>
void batch_norm_forward(std::span<const T> x, int n, int c, int hw,
                        std::span<const T> gamma, std::span<const T> beta,
                        std::span<T> running_mean, std::span<T> running_var,
                        bool training, std::span<T> y, NormCache<T>* cache) {
  std::vector<double> mean(c, 0.0), inv(c, 0.0);
  const double count = static_cast<double>(n) * hw;
  for (int ci = 0; ci < c; ++ci) {
    if (training) {
      double m = 0.0;
      for (int ni = 0; ni < n; ++ni) {
        const std::size_t base = (static_cast<std::size_t>(ni) * c + ci) * hw;
        for (int p = 0; p < hw; ++p) m += x[base + p];
      }
      m /= count;
      double v = 0.0;
      for (int ni = 0; ni < n; ++ni) {
        const std::size_t base = (static_cast<std::size_t>(ni) * c + ci) * hw;
        for (int p = 0; p < hw; ++p) {
          const double d = x[base + p] - m;
          v += d * d;
        }
      }
      v /= count;
      mean[ci] = m;
      inv[ci] = 1.0 / std::sqrt(v + kNormEps);
      const double unbiased = count > 1 ? v * count / (count - 1) : v;
      running_mean[ci] = static_cast<T>((1 - kBatchNormMomentum) * running_mean[ci] +
                                        kBatchNormMomentum * m);
      running_var[ci] = static_cast<T>((1 - kBatchNormMomentum) * running_var[ci] +
                                       kBatchNormMomentum * unbiased);
    } else {
      mean[ci] = running_mean[ci];
      inv[ci] = 1.0 / std::sqrt(static_cast<double>(running_var[ci]) + kNormEps);
    }
  }
  if (cache) {
    cache->mean.assign(mean.begin(), mean.end());
    cache->inv_std.assign(inv.begin(), inv.end());
    cache->xhat.resize(x.size());
  }
  for (int ni = 0; ni < n; ++ni)
    for (int ci = 0; ci < c; ++ci) {
      const std::size_t base = (static_cast<std::size_t>(ni) * c + ci) * hw;
      for (int p = 0; p < hw; ++p) {
        const double xh = (x[base + p] - mean[ci]) * inv[ci];
        if (cache) cache->xhat[base + p] = static_cast<T>(xh);
        y[base + p] = static_cast<T>(gamma[ci] * xh + beta[ci]);
      }
    }
}

template <typename T>
void batch_norm_backward(const NormCache<T>& cache, int n, int c, int hw,
                         std::span<const T> gamma, std::span<const T> dy,
                         std::span<T> dx, std::span<T> dgamma,
                         std::span<T> dbeta) {
  norm_backward(cache, n, c, hw, gamma, dy, dx, dgamma, dbeta,
                static_cast<std::size_t>(c), static_cast<double>(n) * hw,
                [](int, int ci) { return static_cast<std::size_t>(ci); });
}

#define NERV_INSTANTIATE(T)                                                    \
  template void linear_forward<T>(std::span<const T>, int, int,                \
                                  std::span<const T>, std::span<const T>, int, \
                                  std::span<T>);                               \
  template void linear_backward<T>(std::span<const T>, int, int,               \
                                   std::span<const T>, int, std::span<const T>, \
                                   std::span<T>, std::span<T>, std::span<T>);  \
  template void conv2d_forward<T>(std::span<const T>, int, int, int,           \
                                  std::span<const T>, std::span<const T>, int, \
                                  int, std::span<T>, std::span<T>);            \
  template void conv2d_backward<T>(std::span<const T>, int, int, int,          \
                                   std::span<const T>, int, int,               \
                                   std::span<const T>, std::span<T>,           \
                                   std::span<T>, std::span<T>, std::span<T>,   \
                                   std::span<T>);                              \
  template void pixel_shuffle<T>(std::span<const T>, int, int, int, int,       \
                                 std::span<T>);                                \
  template void pixel_unshuffle<T>(std::span<const T>, int, int, int, int,     \
                                   std::span<T>);                              \
  template void bilinear_upsample<T>(std::span<const T>, int, int, int, int,   \
                                     std::span<T>);                            \
  template void bilinear_upsample_backward<T>(std::span<const T>, int, int,    \
                                              int, int, std::span<T>);         \
  template void activation_forward<T>(Activation, std::span<const T>,         \
                                      std::span<T>);                           \
  template void activation_backward<T>(Activation, std::span<const T>,        \
                                       std::span<const T>, std::span<T>);      \
  template T sigmoid<T>(T);                                                    \
  template void instance_norm_forward<T>(                                      \
      std::span<const T>, int, int, int, std::span<const T>,                   \
      std::span<const T>, std::span<T>, NormCache<T>*);                        \
  template void instance_norm_backward<T>(                                     \
      const NormCache<T>&, int, int, int, std::span<const T>,                  \
      std::span<const T>, std::span<T>, std::span<T>, std::span<T>);           \
  template void batch_norm_forward<T>(                                         \
      std::span<const T>, int, int, int, std::span<const T>,                   \
      std::span<const T>, std::span<T>, std::span<T>, bool, std::span<T>,      \
      NormCache<T>*);                                                          \
  template void batch_norm_backward<T>(                                        \
      const NormCache<T>&, int, int, int, std::span<const T>,                  \
      std::span<const T>, std::span<T>, std::span<T>, std::span<T>);

NERV_INSTANTIATE(float)
NERV_INSTANTIATE(double)
#undef NERV_INSTANTIATE

}  // namespace nerv::ops

namespace nerv {

std::string shape_string(const Shape& shape) {
  std::string s = "(";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ", ";
    s += std::to_string(shape[i]);
  }
  return s + ")";
}

Tensor pixel_shuffle(const Tensor& x, int s) {
  if (x.rank() != 3 || s < 1) throw ShapeError("pixel_shuffle expects (C*S^2, h, w) and S >= 1");
  const std::size_t s2 = static_cast<std::size_t>(s) * s;
  if (x.dim(0) % s2 != 0) {
    throw ShapeError("pixel_shuffle: channel count " + std::to_string(x.dim(0)) +
                     " not divisible by " + std::to_string(s2));
  }
  const int c = static_cast<int>(x.dim(0) / s2);
  const int h = static_cast<int>(x.dim(1)), w = static_cast<int>(x.dim(2));
  Tensor y({static_cast<std::size_t>(c), x.dim(1) * s, x.dim(2) * s});
  ops::pixel_shuffle<float>(x.span(), c, h, w, s, y.span());
  return y;
}

}  // namespace nerv
