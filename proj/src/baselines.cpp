#include "nerv/baselines.hpp"

#include <chrono>
#include <cmath>

#include <Eigen/Core>

#include "nerv/encoding.hpp"
#include "nerv/error.hpp"
#include "nerv/metrics.hpp"
#include "nerv/optim.hpp"
#include "nerv/random.hpp"

namespace nerv {

using Mat = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<Mat>;
using CMapMat = Eigen::Map<const Mat>;
using CMapVec = Eigen::Map<const Eigen::RowVectorXf>;

std::string_view to_string(PixelwiseVariant v) {
  return v == PixelwiseVariant::sine_mlp ? "sine_mlp" : "pe_relu_mlp";
}

PixelwiseVariant parse_pixelwise_variant(std::string_view s) {
  if (s == "sine_mlp") return PixelwiseVariant::sine_mlp;
  if (s == "pe_relu_mlp") return PixelwiseVariant::pe_relu_mlp;
  throw InvalidConfig("unknown pixel-wise variant '" + std::string(s) + "'");
}

int PixelwiseConfig::input_dim() const {
  return variant == PixelwiseVariant::sine_mlp ? 3 : 6 * embed_length;
}

void validate(const PixelwiseConfig& c) {
  if (c.depth < 2) throw InvalidConfig("pixel-wise depth must be >= 2");
  if (c.hidden < 1) throw InvalidConfig("pixel-wise hidden width must be >= 1");
  if (!(c.omega0 > 0.0)) throw InvalidConfig("omega0 must be positive");
  if (!(c.embed_base > 0.0) || c.embed_length < 1) {
    throw InvalidConfig("embedding needs base > 0 and length >= 1");
  }
  if (c.height < 1 || c.width < 1 || c.frame_count < 1) {
    throw InvalidConfig("video dimensions must be positive");
  }
}

namespace {

std::vector<int> layer_dims(const PixelwiseConfig& c) {
  std::vector<int> d{c.input_dim()};
  for (int i = 0; i + 1 < c.depth; ++i) d.push_back(c.hidden);
  d.push_back(3);
  return d;
}

std::string wname(int i) { return "layers." + std::to_string(i) + ".weight"; }
std::string bname(int i) { return "layers." + std::to_string(i) + ".bias"; }

void check_coordinate(PixelwiseVariant v, double c) {
  const bool ok = v == PixelwiseVariant::sine_mlp ? (c >= -1.0 && c <= 1.0) : (c > 0.0 && c <= 1.0);
  if (!ok) {
    throw DomainError("coordinate " + std::to_string(c) + " outside the range of " +
                      std::string(to_string(v)));
  }
}

// Input features for n coordinate triples.
Mat features(const PixelwiseConfig& c, std::span<const double> coords) {
  const int n = static_cast<int>(coords.size() / 3);
  Mat x(n, c.input_dim());
  for (int i = 0; i < n; ++i) {
    for (int a = 0; a < 3; ++a) {
      const double v = coords[3 * i + a];
      check_coordinate(c.variant, v);
      if (c.variant == PixelwiseVariant::sine_mlp) {
        x(i, a) = static_cast<float>(v);
      } else {
        const auto e = positional_encode(v, c.embed_base, c.embed_length);
        for (int k = 0; k < 2 * c.embed_length; ++k) {
          x(i, a * 2 * c.embed_length + k) = static_cast<float>(e[k]);
        }
      }
    }
  }
  return x;
}

struct Pass {
  std::vector<Mat> inputs;  // input of each layer
  std::vector<Mat> pre;     // pre-activation of each layer
  Mat out;
};

void run_layers(const PixelwiseModel& m, Mat x, Pass* keep, Mat& out) {
  const auto& c = m.config;
  const float w0 = static_cast<float>(c.omega0);
  for (int l = 0; l < c.depth; ++l) {
    const auto& W = m.params.at(wname(l));
    const auto& b = m.params.at(bname(l));
    const CMapMat Wm(W.data.data(), W.dim(0), W.dim(1));
    const CMapVec bv(b.data.data(), b.numel());
    Mat z = x * Wm.transpose();
    z.rowwise() += bv;
    if (keep) {
      keep->inputs.push_back(std::move(x));
      keep->pre.push_back(z);
    }
    if (l + 1 < c.depth) {
      if (c.variant == PixelwiseVariant::sine_mlp) {
        x = (z * w0).array().sin().matrix();
      } else {
        x = z.cwiseMax(0.0f);
      }
    } else {
      out = (1.0f / (1.0f + (-z.array()).exp())).matrix();
    }
  }
}

}  // namespace

std::size_t count_params(const PixelwiseConfig& c) {
  const auto d = layer_dims(c);
  std::size_t n = 0;
  for (std::size_t i = 0; i + 1 < d.size(); ++i) {
    n += static_cast<std::size_t>(d[i]) * d[i + 1] + d[i + 1];
  }
  return n;
}

std::size_t count_params(const PixelwiseModel& model) { return count_params(model.params); }

PixelwiseConfig match_pixelwise_budget(PixelwiseConfig cfg, std::size_t target) {
  validate(cfg);
  int best = 1;
  std::size_t best_err = SIZE_MAX;
  for (int h = 1; h <= 8192; ++h) {
    cfg.hidden = h;
    const std::size_t n = count_params(cfg);
    const std::size_t err = n > target ? n - target : target - n;
    if (err < best_err) {
      best_err = err;
      best = h;
    }
    if (n > target) break;
  }
  cfg.hidden = best;
  return cfg;
}

PixelwiseModel build_pixelwise(const PixelwiseConfig& cfg, std::uint64_t seed) {
  validate(cfg);
  PixelwiseModel m;
  m.config = cfg;
  Rng rng(seed);
  const auto d = layer_dims(cfg);
  for (int l = 0; l + 1 < static_cast<int>(d.size()); ++l) {
    const int in = d[l], out = d[l + 1];
    double wb = 1.0 / std::sqrt(static_cast<double>(in));
    if (cfg.variant == PixelwiseVariant::sine_mlp) {
      wb = l == 0 ? 1.0 / in : std::sqrt(6.0 / in) / cfg.omega0;
    }
    const double bb = 1.0 / std::sqrt(static_cast<double>(in));
    Tensor w({static_cast<std::size_t>(out), static_cast<std::size_t>(in)});
    for (auto& v : w.data) v = static_cast<float>(rng.uniform(-wb, wb));
    Tensor b({static_cast<std::size_t>(out)});
    for (auto& v : b.data) v = static_cast<float>(rng.uniform(-bb, bb));
    m.params.emplace(wname(l), std::move(w));
    m.params.emplace(bname(l), std::move(b));
  }
  return m;
}

double pixel_coordinate(PixelwiseVariant v, int index, int n) {
  if (index < 0 || index >= n) throw DomainError("coordinate index out of range");
  if (v == PixelwiseVariant::sine_mlp) return 2.0 * (index + 0.5) / n - 1.0;
  return static_cast<double>(index + 1) / n;
}

void pixelwise_forward_batch(const PixelwiseModel& model, std::span<const double> coords,
                             std::span<float> rgb) {
  if (coords.size() % 3 != 0 || rgb.size() != coords.size()) {
    throw ShapeError("coordinate and colour buffers must hold matching triples");
  }
  constexpr std::size_t kChunk = 4096;
  const std::size_t n = coords.size() / 3;
  Mat out;
  for (std::size_t lo = 0; lo < n; lo += kChunk) {
    const std::size_t cnt = std::min(kChunk, n - lo);
    run_layers(model, features(model.config, coords.subspan(3 * lo, 3 * cnt)), nullptr, out);
    std::copy(out.data(), out.data() + 3 * cnt, rgb.begin() + 3 * lo);
  }
}

std::array<float, 3> pixelwise_forward(const PixelwiseModel& model, double x, double y, double t) {
  const double c[3] = {x, y, t};
  std::array<float, 3> rgb{};
  pixelwise_forward_batch(model, c, rgb);
  return rgb;
}

Image pixelwise_render(const PixelwiseModel& model, int index) {
  const auto& c = model.config;
  const double t = pixel_coordinate(c.variant, index, c.frame_count);
  std::vector<double> coords;
  coords.reserve(static_cast<std::size_t>(3) * c.height * c.width);
  for (int i = 0; i < c.height; ++i) {
    for (int j = 0; j < c.width; ++j) {
      coords.push_back(pixel_coordinate(c.variant, j, c.width));
      coords.push_back(pixel_coordinate(c.variant, i, c.height));
      coords.push_back(t);
    }
  }
  std::vector<float> rgb(coords.size());
  pixelwise_forward_batch(model, coords, rgb);
  const std::size_t hw = static_cast<std::size_t>(c.height) * c.width;
  Image img({3, static_cast<std::size_t>(c.height), static_cast<std::size_t>(c.width)});
  for (std::size_t p = 0; p < hw; ++p)
    for (int ch = 0; ch < 3; ++ch) img.data[ch * hw + p] = rgb[3 * p + ch];
  return img;
}

TrainHistory train_pixelwise(PixelwiseModel& model, const VideoTensor& video,
                             const TrainConfig& cfg, int pixel_batch) {
  validate(cfg);
  const auto& pc = model.config;
  if (video.height() != pc.height || video.width() != pc.width ||
      video.num_frames() != pc.frame_count) {
    throw InvalidConfig("video dimensions do not match the pixel-wise model");
  }
  if (pixel_batch < 1) throw InvalidConfig("pixel_batch must be >= 1");
  const std::size_t hw = static_cast<std::size_t>(pc.height) * pc.width;
  const std::size_t total = hw * pc.frame_count;
  const std::size_t steps = (total + pixel_batch - 1) / pixel_batch;
  const float w0 = static_cast<float>(pc.omega0);

  AdamState opt;
  ParamMap grads;
  for (const auto& [name, t] : model.params) grads.emplace(name, Tensor(t.shape));
  std::vector<std::uint32_t> order(total);
  TrainHistory history;
  std::vector<double> coords;
  Mat target;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    for (std::size_t i = 0; i < total; ++i) order[i] = static_cast<std::uint32_t>(i);
    Rng rng(mix_seed(cfg.seed, static_cast<std::uint64_t>(epoch) + 1));
    rng.shuffle(order);
    double sq_sum = 0.0;
    for (std::size_t step = 0; step < steps; ++step) {
      const std::size_t lo = step * pixel_batch;
      const int n = static_cast<int>(std::min<std::size_t>(pixel_batch, total - lo));
      coords.resize(3 * static_cast<std::size_t>(n));
      target.resize(n, 3);
      for (int r = 0; r < n; ++r) {
        const std::uint32_t id = order[lo + r];
        const int f = static_cast<int>(id / hw);
        const int p = static_cast<int>(id % hw);
        const int i = p / pc.width, j = p % pc.width;
        coords[3 * r] = pixel_coordinate(pc.variant, j, pc.width);
        coords[3 * r + 1] = pixel_coordinate(pc.variant, i, pc.height);
        coords[3 * r + 2] = pixel_coordinate(pc.variant, f, pc.frame_count);
        for (int ch = 0; ch < 3; ++ch) target(r, ch) = video.frames[f].data[ch * hw + p];
      }
      Pass pass;
      run_layers(model, features(pc, coords), &pass, pass.out);
      const Mat diff = pass.out - target;
      const double sq = static_cast<double>(diff.squaredNorm());
      if (!std::isfinite(sq)) {
        throw TrainingError("non-finite loss at epoch " + std::to_string(epoch + 1));
      }
      sq_sum += sq;
      // d(mean squared error)/d(pre-sigmoid)
      Mat delta = (diff * (2.0f / (3.0f * n))).cwiseProduct(
          pass.out.cwiseProduct((1.0f - pass.out.array()).matrix()));
      for (int l = pc.depth - 1; l >= 0; --l) {
        auto& gw = grads.at(wname(l));
        auto& gb = grads.at(bname(l));
        MapMat(gw.data.data(), gw.dim(0), gw.dim(1)).noalias() =
            delta.transpose() * pass.inputs[l];
        Eigen::Map<Eigen::RowVectorXf>(gb.data.data(), gb.numel()) = delta.colwise().sum();
        if (l == 0) break;
        const auto& W = model.params.at(wname(l));
        Mat da = delta * CMapMat(W.data.data(), W.dim(0), W.dim(1));
        const Mat& z = pass.pre[l - 1];
        if (pc.variant == PixelwiseVariant::sine_mlp) {
          delta = da.cwiseProduct(((z * w0).array().cos() * w0).matrix());
        } else {
          delta = da.cwiseProduct((z.array() > 0.0f).cast<float>().matrix());
        }
      }
      adam_step(model.params, grads, opt,
                lr_at(epoch + static_cast<double>(step) / steps, cfg));
    }
    EpochRecord rec;
    rec.epoch = epoch + 1;
    rec.loss = sq_sum / (3.0 * total);
    rec.psnr = psnr_from_mse(rec.loss);
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    history.records.push_back(rec);
  }
  return history;
}

std::uint64_t sampling_cost(int frames, int height, int width, Representation r) {
  if (frames < 1 || height < 1 || width < 1) throw DomainError("dimensions must be positive");
  if (r == Representation::image_wise) return static_cast<std::uint64_t>(frames);
  return static_cast<std::uint64_t>(frames) * height * width;
}

}  // namespace nerv
