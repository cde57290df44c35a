#include "nerv/metrics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "nerv/error.hpp"
#include "nerv/logging.hpp"

namespace nerv {
namespace {

const std::array<double, kSsimWindow>& gaussian_window() {
  static const std::array<double, kSsimWindow> window = [] {
    std::array<double, kSsimWindow> g{};
    double sum = 0.0;
    for (int i = 0; i < kSsimWindow; ++i) {
      const double d = i - kSsimWindow / 2;
      g[i] = std::exp(-d * d / (2 * kSsimSigma * kSsimSigma));
      sum += g[i];
    }
    for (auto& v : g) v /= sum;
    return g;
  }();
  return window;
}

// Separable valid-mode Gaussian filtering of an h x w plane.
void filter_valid(const double* src, int h, int w, double* dst, std::vector<double>& tmp) {
  const auto& g = gaussian_window();
  const int K = kSsimWindow;
  const int wo = w - K + 1, ho = h - K + 1;
  tmp.resize(static_cast<std::size_t>(h) * wo);
  for (int i = 0; i < h; ++i) {
    const double* row = src + static_cast<std::size_t>(i) * w;
    double* out = tmp.data() + static_cast<std::size_t>(i) * wo;
    for (int j = 0; j < wo; ++j) {
      double acc = 0.0;
      for (int k = 0; k < K; ++k) acc += g[k] * row[j + k];
      out[j] = acc;
    }
  }
  for (int i = 0; i < ho; ++i) {
    double* out = dst + static_cast<std::size_t>(i) * wo;
    std::fill(out, out + wo, 0.0);
    for (int k = 0; k < K; ++k) {
      const double* row = tmp.data() + static_cast<std::size_t>(i + k) * wo;
      for (int j = 0; j < wo; ++j) out[j] += g[k] * row[j];
    }
  }
}

// Adjoint of filter_valid: scatters a (h-K+1) x (w-K+1) map onto h x w.
void filter_valid_adjoint(const double* src, int h, int w, double* dst, std::vector<double>& tmp) {
  const auto& g = gaussian_window();
  const int K = kSsimWindow;
  const int wo = w - K + 1, ho = h - K + 1;
  tmp.assign(static_cast<std::size_t>(h) * wo, 0.0);
  for (int i = 0; i < ho; ++i) {
    const double* row = src + static_cast<std::size_t>(i) * wo;
    for (int k = 0; k < K; ++k) {
      double* t = tmp.data() + static_cast<std::size_t>(i + k) * wo;
      for (int j = 0; j < wo; ++j) t[j] += g[k] * row[j];
    }
  }
  std::fill(dst, dst + static_cast<std::size_t>(h) * w, 0.0);
  for (int i = 0; i < h; ++i) {
    const double* row = tmp.data() + static_cast<std::size_t>(i) * wo;
    double* out = dst + static_cast<std::size_t>(i) * w;
    for (int j = 0; j < wo; ++j)
      for (int k = 0; k < K; ++k) out[j + k] += g[k] * row[j];
  }
}

struct ChannelSsim {
  double ssim = 0.0;
  double cs = 0.0;
};

// SSIM and contrast-structure means of one channel. When grad is non-null it
// receives d(mean SSIM)/dx.
ChannelSsim channel_ssim(const double* x, const double* y, int h, int w, double* grad) {
  const int K = kSsimWindow;
  const int ho = h - K + 1, wo = w - K + 1;
  const std::size_t n = static_cast<std::size_t>(h) * w;
  const std::size_t m = static_cast<std::size_t>(ho) * wo;
  std::vector<double> xx(n), yy(n), xy(n), tmp;
  for (std::size_t i = 0; i < n; ++i) {
    xx[i] = x[i] * x[i];
    yy[i] = y[i] * y[i];
    xy[i] = x[i] * y[i];
  }
  std::vector<double> mx(m), my(m), exx(m), eyy(m), exy(m);
  filter_valid(x, h, w, mx.data(), tmp);
  filter_valid(y, h, w, my.data(), tmp);
  filter_valid(xx.data(), h, w, exx.data(), tmp);
  filter_valid(yy.data(), h, w, eyy.data(), tmp);
  filter_valid(xy.data(), h, w, exy.data(), tmp);

  ChannelSsim out;
  std::vector<double> g_mu, g_xx, g_xy;
  if (grad) {
    g_mu.resize(m);
    g_xx.resize(m);
    g_xy.resize(m);
  }
  for (std::size_t p = 0; p < m; ++p) {
    const double ux = mx[p], uy = my[p];
    const double vx = exx[p] - ux * ux;
    const double vy = eyy[p] - uy * uy;
    const double cxy = exy[p] - ux * uy;
    const double a1 = 2 * ux * uy + kSsimC1;
    const double a2 = 2 * cxy + kSsimC2;
    const double b1 = ux * ux + uy * uy + kSsimC1;
    const double b2 = vx + vy + kSsimC2;
    const double cs = a2 / b2;
    const double s = (a1 * a2) / (b1 * b2);
    out.ssim += s;
    out.cs += cs;
    if (grad) {
      const double d = b1 * b2;
      const double dn_dmu = 2 * uy * (a2 - a1);
      const double dd_dmu = 2 * ux * (b2 - b1);
      g_mu[p] = (dn_dmu - s * dd_dmu) / d / static_cast<double>(m);
      g_xx[p] = -s / b2 / static_cast<double>(m);
      g_xy[p] = 2 * a1 / d / static_cast<double>(m);
    }
  }
  out.ssim /= static_cast<double>(m);
  out.cs /= static_cast<double>(m);
  if (grad) {
    std::vector<double> a_mu(n), a_xx(n), a_xy(n);
    filter_valid_adjoint(g_mu.data(), h, w, a_mu.data(), tmp);
    filter_valid_adjoint(g_xx.data(), h, w, a_xx.data(), tmp);
    filter_valid_adjoint(g_xy.data(), h, w, a_xy.data(), tmp);
    for (std::size_t i = 0; i < n; ++i) grad[i] = a_mu[i] + 2 * x[i] * a_xx[i] + y[i] * a_xy[i];
  }
  return out;
}

void check_pair(const Image& a, const Image& b) {
  if (a.shape != b.shape) {
    throw ShapeError("image shapes differ: " + shape_string(a.shape) + " vs " + shape_string(b.shape));
  }
  if (a.rank() != 3) throw ShapeError("expected a (channels, height, width) image");
}

void check_window(int h, int w) {
  if (h < kSsimWindow || w < kSsimWindow) {
    throw ShapeError("image " + std::to_string(h) + "x" + std::to_string(w) +
                     " smaller than the SSIM window");
  }
}

// 2x2 average pooling; an odd trailing row/column is dropped.
std::vector<double> downsample(const std::vector<double>& src, int c, int h, int w) {
  const int ho = h / 2, wo = w / 2;
  std::vector<double> out(static_cast<std::size_t>(c) * ho * wo);
  for (int ch = 0; ch < c; ++ch)
    for (int i = 0; i < ho; ++i)
      for (int j = 0; j < wo; ++j) {
        const double* p = src.data() + (static_cast<std::size_t>(ch) * h + 2 * i) * w + 2 * j;
        out[(static_cast<std::size_t>(ch) * ho + i) * wo + j] = 0.25 * (p[0] + p[1] + p[w] + p[w + 1]);
      }
  return out;
}

}  // namespace

double mse(const Image& a, const Image& b) {
  if (a.shape != b.shape) {
    throw ShapeError("image shapes differ: " + shape_string(a.shape) + " vs " + shape_string(b.shape));
  }
  if (a.numel() == 0) return 0.0;
  double acc = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i) {
    const double d = static_cast<double>(a[i]) - b[i];
    acc += d * d;
  }
  return acc / static_cast<double>(a.numel());
}

double psnr_from_mse(double m) {
  if (m <= 0.0) return 100.0;
  return std::min(100.0, 10.0 * std::log10(1.0 / m));
}

double psnr(const Image& a, const Image& b) { return psnr_from_mse(mse(a, b)); }

template <typename T>
double ssim_with_grad(std::span<const T> x, std::span<const T> y, int c, int h, int w,
                      std::span<T> grad_x) {
  check_window(h, w);
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  std::vector<double> xd(plane), yd(plane), g(grad_x.empty() ? 0 : plane);
  double total = 0.0;
  for (int ch = 0; ch < c; ++ch) {
    const std::size_t off = ch * plane;
    for (std::size_t i = 0; i < plane; ++i) {
      xd[i] = x[off + i];
      yd[i] = y[off + i];
    }
    total += channel_ssim(xd.data(), yd.data(), h, w, g.empty() ? nullptr : g.data()).ssim;
    if (!grad_x.empty()) {
      for (std::size_t i = 0; i < plane; ++i) grad_x[off + i] = static_cast<T>(g[i] / c);
    }
  }
  return total / c;
}

template double ssim_with_grad<float>(std::span<const float>, std::span<const float>, int, int,
                                      int, std::span<float>);
template double ssim_with_grad<double>(std::span<const double>, std::span<const double>, int,
                                       int, int, std::span<double>);

double ssim(const Image& a, const Image& b) {
  check_pair(a, b);
  return ssim_with_grad<float>(a.span(), b.span(), static_cast<int>(a.dim(0)),
                               static_cast<int>(a.dim(1)), static_cast<int>(a.dim(2)), {});
}

int ms_ssim_scales(int height, int width, int max_scales) {
  int scales = 0;
  int h = height, w = width;
  while (scales < max_scales && h >= kSsimWindow && w >= kSsimWindow) {
    ++scales;
    h /= 2;
    w /= 2;
  }
  return scales;
}

double ms_ssim(const Image& a, const Image& b, int max_scales) {
  check_pair(a, b);
  const int c = static_cast<int>(a.dim(0));
  int h = static_cast<int>(a.dim(1)), w = static_cast<int>(a.dim(2));
  check_window(h, w);
  max_scales = std::clamp(max_scales, 1, 5);
  const int scales = ms_ssim_scales(h, w, max_scales);
  if (scales < max_scales) {
    warn_once("ms_ssim: " + std::to_string(h) + "x" + std::to_string(w) + " image supports " +
              std::to_string(scales) + " of " + std::to_string(max_scales) +
              " scales; using renormalized weights");
  }
  // The published weights sum to 1.0001; they are used verbatim at five scales
  // and renormalized only when scales are dropped.
  double weight_sum = 1.0;
  if (scales < 5) {
    weight_sum = 0.0;
    for (int s = 0; s < scales; ++s) weight_sum += kMsSsimWeights[s];
  }

  std::vector<double> x(a.data.begin(), a.data.end()), y(b.data.begin(), b.data.end());
  std::vector<double> per_channel(c, 1.0);
  for (int s = 0; s < scales; ++s) {
    const double weight = kMsSsimWeights[s] / weight_sum;
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    for (int ch = 0; ch < c; ++ch) {
      const auto r = channel_ssim(x.data() + ch * plane, y.data() + ch * plane, h, w, nullptr);
      const double v = std::max(0.0, s == scales - 1 ? r.ssim : r.cs);
      per_channel[ch] *= std::pow(v, weight);
    }
    if (s + 1 < scales) {
      x = downsample(x, c, h, w);
      y = downsample(y, c, h, w);
      h /= 2;
      w /= 2;
    }
  }
  double total = 0.0;
  for (double v : per_channel) total += v;
  return total / c;
}

}  // namespace nerv
