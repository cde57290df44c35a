#include "nerv/filters.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "nerv/error.hpp"

namespace nerv {

std::string_view to_string(FilterKind k) {
  switch (k) {
    case FilterKind::gaussian: return "gaussian";
    case FilterKind::uniform: return "uniform";
    case FilterKind::median: return "median";
    case FilterKind::minimum: return "minimum";
    case FilterKind::maximum: return "maximum";
  }
  return "?";
}

FilterKind parse_filter_kind(std::string_view s) {
  if (s == "gaussian") return FilterKind::gaussian;
  if (s == "uniform") return FilterKind::uniform;
  if (s == "median") return FilterKind::median;
  if (s == "minimum") return FilterKind::minimum;
  if (s == "maximum") return FilterKind::maximum;
  throw InvalidConfig("unknown filter '" + std::string(s) + "'");
}

namespace {

int reflect(int i, int n) {
  const int period = 2 * n;
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - 1 - i;
}

std::vector<double> linear_taps(FilterKind kind, int window) {
  const int r = window / 2;
  std::vector<double> taps(window, 1.0);
  if (kind == FilterKind::gaussian) {
    const double sigma = (window - 1) / 2.0;
    for (int k = -r; k <= r; ++k) taps[k + r] = std::exp(-0.5 * k * k / (sigma * sigma));
  }
  double sum = 0.0;
  for (double t : taps) sum += t;
  for (double& t : taps) t /= sum;
  return taps;
}

}  // namespace

Image filter_image(const Image& image, FilterKind kind, int window) {
  if (window < 3 || window % 2 == 0) {
    throw InvalidConfig("filter window must be odd and >= 3, got " + std::to_string(window));
  }
  if (image.rank() != 3) throw ShapeError("expected a (C, H, W) image");
  const int c = static_cast<int>(image.dim(0)), h = static_cast<int>(image.dim(1)),
            w = static_cast<int>(image.dim(2));
  const int r = window / 2;
  Image out(image.shape);

  if (kind == FilterKind::gaussian || kind == FilterKind::uniform) {
    const auto taps = linear_taps(kind, window);
    std::vector<double> tmp(static_cast<std::size_t>(h) * w);
    for (int ch = 0; ch < c; ++ch) {
      const float* src = image.data.data() + static_cast<std::size_t>(ch) * h * w;
      float* dst = out.data.data() + static_cast<std::size_t>(ch) * h * w;
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
          double s = 0.0;
          for (int k = -r; k <= r; ++k) s += taps[k + r] * src[y * w + reflect(x + k, w)];
          tmp[y * w + x] = s;
        }
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
          double s = 0.0;
          for (int k = -r; k <= r; ++k) s += taps[k + r] * tmp[reflect(y + k, h) * w + x];
          dst[y * w + x] = static_cast<float>(s);
        }
    }
    return out;
  }

  std::vector<float> win(static_cast<std::size_t>(window) * window);
  for (int ch = 0; ch < c; ++ch) {
    const float* src = image.data.data() + static_cast<std::size_t>(ch) * h * w;
    float* dst = out.data.data() + static_cast<std::size_t>(ch) * h * w;
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        std::size_t n = 0;
        for (int dy = -r; dy <= r; ++dy)
          for (int dx = -r; dx <= r; ++dx) win[n++] = src[reflect(y + dy, h) * w + reflect(x + dx, w)];
        float v;
        if (kind == FilterKind::median) {
          std::nth_element(win.begin(), win.begin() + n / 2, win.end());
          v = win[n / 2];
        } else if (kind == FilterKind::minimum) {
          v = *std::min_element(win.begin(), win.end());
        } else {
          v = *std::max_element(win.begin(), win.end());
        }
        dst[y * w + x] = v;
      }
  }
  return out;
}

VideoTensor filter_baseline(const VideoTensor& video, FilterKind kind, int window) {
  std::vector<Image> frames;
  frames.reserve(video.frames.size());
  for (const auto& f : video.frames) frames.push_back(filter_image(f, kind, window));
  return make_video(std::move(frames), video.filenames);
}

}  // namespace nerv
