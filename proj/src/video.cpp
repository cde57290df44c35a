#include "nerv/video.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <numbers>

#include "nerv/error.hpp"
#include "nerv/random.hpp"

namespace nerv {
namespace {

constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ull;
constexpr std::uint64_t kFnvPrime = 0x100000001b3ull;

void fnv_bytes(std::uint64_t& h, const void* data, std::size_t n) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= kFnvPrime;
  }
}

Image blank(int h, int w) {
  return Image({3, static_cast<std::size_t>(h), static_cast<std::size_t>(w)});
}

float& px(Image& im, int c, int i, int j) {
  return im.data[(static_cast<std::size_t>(c) * im.dim(1) + i) * im.dim(2) + j];
}

}  // namespace

std::uint64_t content_fingerprint(const std::vector<Image>& frames) {
  std::uint64_t h = kFnvOffset;
  for (const auto& f : frames) {
    for (auto d : f.shape) {
      const std::uint64_t d64 = d;
      fnv_bytes(h, &d64, sizeof d64);
    }
    fnv_bytes(h, f.data.data(), f.data.size() * sizeof(float));
  }
  return h;
}

std::string fingerprint_hex(std::uint64_t fp) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fp));
  return buf;
}

VideoTensor make_video(std::vector<Image> frames, std::vector<std::string> filenames) {
  if (frames.empty()) throw DataError("video has no frames");
  const Shape& shape = frames[0].shape;
  if (shape.size() != 3 || shape[0] != 3 || shape[1] == 0 || shape[2] == 0)
    throw DataError("frames must be (3, H, W) images, got " + shape_string(shape));
  for (std::size_t i = 0; i < frames.size(); ++i) {
    if (frames[i].shape != shape) {
      throw DataError("frame " + std::to_string(i) + " has shape " + shape_string(frames[i].shape) +
                      ", expected " + shape_string(shape));
    }
    for (auto& v : frames[i].data) {
      if (!std::isfinite(v)) throw DataError("frame " + std::to_string(i) + " has non-finite values");
      v = std::clamp(v, 0.0f, 1.0f);
    }
  }
  VideoTensor video;
  video.fingerprint = content_fingerprint(frames);
  video.frames = std::move(frames);
  video.filenames = std::move(filenames);
  return video;
}

VideoTensor synth_translating_gradient(int T, int H, int W) {
  constexpr double two_pi = 2 * std::numbers::pi;
  // Fixed random-phase texture: wavelengths log-uniform in [3, 40] px with
  // amplitude proportional to wavelength (a 1/f spectrum, as in natural images).
  struct Wave {
    double kx, ky, phase, amp, rgb[3];
  };
  constexpr int kWaves = 32;
  Rng rng(0x5EEDu);
  std::vector<Wave> waves(kWaves);
  double power = 0.0;
  for (auto& w : waves) {
    const double lambda = 3.0 * std::pow(40.0 / 3.0, rng.uniform());
    const double angle = rng.uniform(0.0, two_pi);
    w.kx = std::cos(angle) / lambda;
    w.ky = std::sin(angle) / lambda;
    w.phase = rng.uniform(0.0, two_pi);
    w.amp = lambda;
    for (double& c : w.rgb) c = rng.uniform(0.6, 1.0);
    power += 0.5 * w.amp * w.amp;
  }
  const double norm = 0.08 / std::sqrt(power);  // texture std of about 0.08
  for (auto& w : waves) w.amp *= norm;

  std::vector<Image> frames;
  for (int t = 0; t < T; ++t) {
    Image im = blank(H, W);
    const double shift = 2.0 * t / W;  // colour field drifts 2 px per frame
    const double tx = -1.5 * t, ty = 0.5 * t;  // texture offset in px
    for (int i = 0; i < H; ++i)
      for (int j = 0; j < W; ++j) {
        const double x = static_cast<double>(j) / W, y = static_cast<double>(i) / H;
        double tex[3] = {0.0, 0.0, 0.0};
        for (const auto& w : waves) {
          const double v = w.amp * std::sin(two_pi * (w.kx * (j - tx) + w.ky * (i - ty)) + w.phase);
          for (int c = 0; c < 3; ++c) tex[c] += w.rgb[c] * v;
        }
        const double r = 0.5 + 0.25 * std::sin(two_pi * (x + shift) + 0.4) + tex[0];
        const double g = 0.5 + 0.25 * std::cos(two_pi * (0.7 * y + 0.5 * x + shift)) + tex[1];
        const double b = 0.45 + 0.2 * std::sin(two_pi * (x - y + 0.5 * shift)) + tex[2];
        px(im, 0, i, j) = static_cast<float>(r);
        px(im, 1, i, j) = static_cast<float>(g);
        px(im, 2, i, j) = static_cast<float>(b);
      }
    frames.push_back(std::move(im));
  }
  return make_video(std::move(frames));
}

VideoTensor synth_moving_disc(int T, int H, int W, double pixels_per_frame) {
  std::vector<Image> frames;
  const double radius = std::min(H, W) / 6.0;
  for (int t = 0; t < T; ++t) {
    Image im = blank(H, W);
    const double cx = W / 3.0 + pixels_per_frame * t;
    const double cy = H / 2.0;
    for (int i = 0; i < H; ++i)
      for (int j = 0; j < W; ++j) {
        const double x = static_cast<double>(j) / W, y = static_cast<double>(i) / H;
        const double d = std::hypot(j + 0.5 - cx, i + 0.5 - cy);
        // soft edge over ~2 px
        const double a = 1.0 / (1.0 + std::exp((d - radius) / 0.8));
        const double bg[3] = {0.2 + 0.5 * x, 0.3 + 0.4 * y, 0.6 - 0.3 * x};
        const double fg[3] = {0.9, 0.75, 0.2};
        for (int c = 0; c < 3; ++c) px(im, c, i, j) = static_cast<float>(a * fg[c] + (1 - a) * bg[c]);
      }
    frames.push_back(std::move(im));
  }
  return make_video(std::move(frames));
}

VideoTensor synth_static(int T, int H, int W) {
  VideoTensor first = synth_translating_gradient(1, H, W);
  std::vector<Image> frames(T, first.frames[0]);
  return make_video(std::move(frames));
}

}  // namespace nerv
