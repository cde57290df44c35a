#include "nerv/model.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <cstdlib>

#include "nerv/encoding.hpp"
#include "nerv/error.hpp"
#include "nerv/random.hpp"

namespace nerv {
namespace {

std::string block_key(int k, std::string_view suffix) {
  return "blocks." + std::to_string(k) + "." + std::string(suffix);
}

bool ends_with(std::string_view s, std::string_view suffix) {
  return s.size() >= suffix.size() &&
         s.substr(s.size() - suffix.size()) == suffix;
}

// Inputs feeding each output of the layer owning `weight_name`.
std::size_t fan_in(const NervConfig& c, std::string_view weight_name, const Shape& shape) {
  if (c.upscale_mode == UpscaleMode::transpose_conv && weight_name.starts_with("blocks.")) {
    return shape[0];  // (cin, cout, s, s)
  }
  return shape_numel(shape) / shape[0];
}

template <typename T>
T round_half(T v) {
  return static_cast<T>(static_cast<float>(Eigen::half(static_cast<float>(v))));
}

template <typename T>
void round_half(std::vector<T>& v) {
  for (auto& x : v) x = round_half(x);
}

}  // namespace

std::map<std::string, Shape> parameter_shapes(const NervConfig& c) {
  validate(c);
  using sz = std::size_t;
  std::map<std::string, Shape> shapes;
  const sz hidden = c.mlp_hidden;
  const sz stem_out = static_cast<sz>(c.stem_channels) * c.stem_height() * c.stem_width();
  shapes["stem.0.weight"] = {hidden, static_cast<sz>(c.embedding_dim())};
  shapes["stem.0.bias"] = {hidden};
  shapes["stem.1.weight"] = {stem_out, hidden};
  shapes["stem.1.bias"] = {stem_out};
  const sz k = c.conv_kernel;
  for (int b = 0; b < c.num_blocks(); ++b) {
    const sz cin = c.block_in_channels(b), cout = c.block_out_channels(b);
    const sz s = c.upscale_factors[b];
    switch (c.upscale_mode) {
      case UpscaleMode::pixelshuffle:
        shapes[block_key(b, "conv.weight")] = {cout * s * s, cin, k, k};
        shapes[block_key(b, "conv.bias")] = {cout * s * s};
        break;
      case UpscaleMode::transpose_conv:
        shapes[block_key(b, "conv.weight")] = {cin, cout, s, s};
        shapes[block_key(b, "conv.bias")] = {cout};
        break;
      case UpscaleMode::bilinear_conv:
        shapes[block_key(b, "conv.weight")] = {cout, cin, k, k};
        shapes[block_key(b, "conv.bias")] = {cout};
        break;
    }
    if (c.norm != Norm::none) {
      shapes[block_key(b, "norm.weight")] = {cout};
      shapes[block_key(b, "norm.bias")] = {cout};
    }
    if (c.norm == Norm::batch) {
      shapes[block_key(b, "norm.running_mean")] = {cout};
      shapes[block_key(b, "norm.running_var")] = {cout};
    }
  }
  shapes["head.weight"] = {3, static_cast<sz>(c.last_channels()), k, k};
  shapes["head.bias"] = {3};
  return shapes;
}

bool is_buffer(std::string_view name) {
  return ends_with(name, ".running_mean") || ends_with(name, ".running_var");
}

bool is_prunable(std::string_view name, const Shape& shape) {
  return shape.size() >= 2 && !is_buffer(name);
}

NervModel build_model(const NervConfig& config, std::uint64_t seed) {
  const auto shapes = parameter_shapes(config);
  NervModel model{config, {}};
  Rng rng(seed);
  for (const auto& [name, shape] : shapes) {
    Tensor t(shape);
    if (ends_with(name, "norm.weight") || ends_with(name, "running_var")) {
      std::fill(t.data.begin(), t.data.end(), 1.0f);
    } else if (ends_with(name, "norm.bias") || ends_with(name, "running_mean")) {
      // zeros
    } else {
      // Biases share the fan-in of their weight.
      const std::string weight_name =
          ends_with(name, ".bias") ? name.substr(0, name.size() - 4) + "weight" : name;
      const Shape& ws = shapes.at(weight_name);
      const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in(config, weight_name, ws)));
      for (auto& v : t.data) v = static_cast<float>(rng.uniform(-bound, bound));
    }
    model.params.emplace(name, std::move(t));
  }
  return model;
}

std::size_t count_params(const ParamMap& params) {
  std::size_t n = 0;
  for (const auto& [name, t] : params)
    if (!is_buffer(name)) n += t.numel();
  return n;
}

std::size_t count_params(const NervModel& model) { return count_params(model.params); }

std::size_t count_params(const NervConfig& config) {
  std::size_t n = 0;
  for (const auto& [name, shape] : parameter_shapes(config))
    if (!is_buffer(name)) n += shape_numel(shape);
  return n;
}

NervConfig match_param_budget(NervConfig config, std::size_t target) {
  NervConfig best = config;
  double best_err = -1.0;
  for (int c2 = 1; c2 <= 4096; ++c2) {
    config.block_channels = c2;
    const double n = static_cast<double>(count_params(config));
    const double err = std::abs(n - static_cast<double>(target));
    if (best_err < 0 || err < best_err) {
      best_err = err;
      best = config;
    }
    if (n > 2.0 * target) break;
  }
  return best;
}

// ---------------------------------------------------------------------------

template <typename T>
struct NervNetwork<T>::State {
  struct Block {
    const BasicTensor<T>* weight = nullptr;
    const BasicTensor<T>* bias = nullptr;
    const BasicTensor<T>* gamma = nullptr;
    const BasicTensor<T>* beta = nullptr;
    int cin = 0, cout = 0, s = 1, h = 0, w = 0;  // h, w: input spatial size
    std::string prefix;
  };

  NervConfig cfg;
  const BasicParamMap<T>* params;
  const BasicTensor<T>*stem0_w, *stem0_b, *stem1_w, *stem1_b, *head_w, *head_b;
  std::vector<Block> blocks;

  int n = 0;
  bool have_cache = false;
  std::vector<T> emb, z1, a1, z2;
  std::vector<std::vector<T>> block_in;  // B+1 entries, last = head input
  std::vector<std::vector<T>> block_up;  // bilinear: upsampled inputs
  std::vector<std::vector<T>> act_in;    // pre-activation values
  std::vector<ops::NormCache<T>> norm_cache;
  std::vector<T> out;
  std::vector<T> col, dcol, tmp, tmp2;

  const BasicTensor<T>* get(const std::string& name) const {
    auto it = params->find(name);
    if (it == params->end()) throw ShapeError("missing parameter '" + name + "'");
    return &it->second;
  }
};

template <typename T>
NervNetwork<T>::NervNetwork(const NervConfig& config, const BasicParamMap<T>& params)
    : state_(std::make_unique<State>()) {
  auto& st = *state_;
  st.cfg = config;
  st.params = &params;
  const auto shapes = parameter_shapes(config);
  for (const auto& [name, shape] : shapes) {
    auto it = params.find(name);
    if (it == params.end()) throw ShapeError("missing parameter '" + name + "'");
    if (it->second.shape != shape) {
      throw ShapeError("parameter '" + name + "' has shape " + shape_string(it->second.shape) +
                       ", expected " + shape_string(shape));
    }
  }
  st.stem0_w = st.get("stem.0.weight");
  st.stem0_b = st.get("stem.0.bias");
  st.stem1_w = st.get("stem.1.weight");
  st.stem1_b = st.get("stem.1.bias");
  st.head_w = st.get("head.weight");
  st.head_b = st.get("head.bias");
  int h = config.stem_height(), w = config.stem_width();
  for (int b = 0; b < config.num_blocks(); ++b) {
    typename State::Block blk;
    blk.prefix = "blocks." + std::to_string(b) + ".";
    blk.weight = st.get(blk.prefix + "conv.weight");
    blk.bias = st.get(blk.prefix + "conv.bias");
    if (config.norm != Norm::none) {
      blk.gamma = st.get(blk.prefix + "norm.weight");
      blk.beta = st.get(blk.prefix + "norm.bias");
    }
    blk.cin = config.block_in_channels(b);
    blk.cout = config.block_out_channels(b);
    blk.s = config.upscale_factors[b];
    blk.h = h;
    blk.w = w;
    st.blocks.push_back(blk);
    h *= blk.s;
    w *= blk.s;
  }
}

template <typename T>
NervNetwork<T>::~NervNetwork() = default;
template <typename T>
NervNetwork<T>::NervNetwork(NervNetwork&&) noexcept = default;
template <typename T>
NervNetwork<T>& NervNetwork<T>::operator=(NervNetwork&&) noexcept = default;

template <typename T>
void NervNetwork<T>::forward(std::span<const double> timestamps, bool training,
                             std::vector<T>& out, BasicParamMap<T>* stats_out,
                             const ForwardOptions& options) {
  auto& st = *state_;
  const auto& cfg = st.cfg;
  const int n = static_cast<int>(timestamps.size());
  const int nb = cfg.num_blocks();
  const bool half = options.half_precision;
  st.n = n;
  st.have_cache = training;

  const int dim = cfg.embedding_dim();
  st.emb.resize(static_cast<std::size_t>(n) * dim);
  for (int i = 0; i < n; ++i) {
    const auto e = embed_timestamp(cfg, timestamps[i]);
    for (int j = 0; j < dim; ++j) st.emb[i * dim + j] = static_cast<T>(e[j]);
  }
  if (half) round_half(st.emb);

  const int hidden = cfg.mlp_hidden;
  const int stem_out = static_cast<int>(st.stem1_w->dim(0));
  st.z1.resize(static_cast<std::size_t>(n) * hidden);
  st.a1.resize(st.z1.size());
  ops::linear_forward<T>(st.emb, n, dim, st.stem0_w->span(), st.stem0_b->span(), hidden, st.z1);
  ops::activation_forward<T>(cfg.activation, st.z1, st.a1);
  if (half) round_half(st.a1);
  st.z2.resize(static_cast<std::size_t>(n) * stem_out);
  ops::linear_forward<T>(st.a1, n, hidden, st.stem1_w->span(), st.stem1_b->span(), stem_out, st.z2);

  st.block_in.resize(nb + 1);
  st.block_up.resize(nb);
  st.act_in.resize(nb);
  st.norm_cache.resize(nb);
  st.block_in[0].resize(st.z2.size());
  ops::activation_forward<T>(cfg.activation, st.z2, st.block_in[0]);
  if (half) round_half(st.block_in[0]);

  for (int b = 0; b < nb; ++b) {
    const auto& blk = st.blocks[b];
    const int s = blk.s, h = blk.h, w = blk.w;
    const int H = h * s, W = w * s;
    const std::size_t in_sz = static_cast<std::size_t>(blk.cin) * h * w;
    const std::size_t out_sz = static_cast<std::size_t>(blk.cout) * H * W;
    const int k = cfg.conv_kernel;
    auto& pre = st.act_in[b];
    pre.resize(static_cast<std::size_t>(n) * out_sz);
    const auto& x = st.block_in[b];

    for (int i = 0; i < n; ++i) {
      std::span<const T> xi(x.data() + i * in_sz, in_sz);
      std::span<T> yi(pre.data() + i * out_sz, out_sz);
      switch (cfg.upscale_mode) {
        case UpscaleMode::pixelshuffle: {
          st.tmp.resize(out_sz);
          st.col.resize(static_cast<std::size_t>(blk.cin) * k * k * h * w);
          ops::conv2d_forward<T>(xi, blk.cin, h, w, blk.weight->span(), blk.bias->span(),
                                 blk.cout * s * s, k, st.tmp, st.col);
          ops::pixel_shuffle<T>(st.tmp, blk.cout, h, w, s, yi);
          break;
        }
        case UpscaleMode::transpose_conv: {
          using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
          st.tmp.resize(out_sz);
          const int cs2 = blk.cout * s * s;
          Eigen::Map<Mat>(st.tmp.data(), cs2, h * w).noalias() =
              Eigen::Map<const Mat>(blk.weight->data.data(), blk.cin, cs2).transpose() *
              Eigen::Map<const Mat>(xi.data(), blk.cin, h * w);
          ops::pixel_shuffle<T>(st.tmp, blk.cout, h, w, s, yi);
          for (int c = 0; c < blk.cout; ++c) {
            const T bc = blk.bias->data[c];
            T* plane = yi.data() + static_cast<std::size_t>(c) * H * W;
            for (int p = 0; p < H * W; ++p) plane[p] += bc;
          }
          break;
        }
        case UpscaleMode::bilinear_conv: {
          auto& up = st.block_up[b];
          const std::size_t up_sz = static_cast<std::size_t>(blk.cin) * H * W;
          up.resize(static_cast<std::size_t>(n) * up_sz);
          std::span<T> ui(up.data() + i * up_sz, up_sz);
          ops::bilinear_upsample<T>(xi, blk.cin, h, w, s, ui);
          st.col.resize(static_cast<std::size_t>(blk.cin) * k * k * H * W);
          ops::conv2d_forward<T>(ui, blk.cin, H, W, blk.weight->span(), blk.bias->span(),
                                 blk.cout, k, yi, st.col);
          break;
        }
      }
    }

    if (cfg.norm != Norm::none) {
      std::vector<T> normed(pre.size());
      ops::NormCache<T>* cache = training ? &st.norm_cache[b] : nullptr;
      if (cfg.norm == Norm::instance) {
        ops::instance_norm_forward<T>(pre, n, blk.cout, H * W, blk.gamma->span(),
                                      blk.beta->span(), normed, cache);
      } else {
        const auto& rm = st.params->at(blk.prefix + "norm.running_mean");
        const auto& rv = st.params->at(blk.prefix + "norm.running_var");
        std::vector<T> mean(rm.data), var(rv.data);
        ops::batch_norm_forward<T>(pre, n, blk.cout, H * W, blk.gamma->span(), blk.beta->span(),
                                   mean, var, training, normed, cache);
        if (training && stats_out) {
          (*stats_out)[blk.prefix + "norm.running_mean"].data = mean;
          (*stats_out)[blk.prefix + "norm.running_var"].data = var;
        }
      }
      pre.swap(normed);
    }
    if (half) round_half(pre);
    st.block_in[b + 1].resize(pre.size());
    ops::activation_forward<T>(cfg.activation, pre, st.block_in[b + 1]);
    if (half) round_half(st.block_in[b + 1]);
  }

  const int H = cfg.height, W = cfg.width, k = cfg.conv_kernel;
  const int cl = cfg.last_channels();
  const std::size_t in_sz = static_cast<std::size_t>(cl) * H * W;
  const std::size_t frame = static_cast<std::size_t>(3) * H * W;
  out.resize(static_cast<std::size_t>(n) * frame);
  st.col.resize(static_cast<std::size_t>(cl) * k * k * H * W);
  const auto& x = st.block_in[nb];
  for (int i = 0; i < n; ++i) {
    std::span<const T> xi(x.data() + i * in_sz, in_sz);
    std::span<T> yi(out.data() + i * frame, frame);
    ops::conv2d_forward<T>(xi, cl, H, W, st.head_w->span(), st.head_b->span(), 3, k, yi, st.col);
  }
  for (auto& v : out) v = ops::sigmoid(v);
  if (half) round_half(out);
  if (training) st.out = out;
}

template <typename T>
void NervNetwork<T>::backward(std::span<const T> dout, BasicParamMap<T>& grads) {
  auto& st = *state_;
  if (!st.have_cache) throw Error("backward() requires a preceding training forward()");
  const auto& cfg = st.cfg;
  const int n = st.n;
  const int nb = cfg.num_blocks();
  const int k = cfg.conv_kernel;

  auto grad = [&](const std::string& name) -> std::span<T> {
    auto it = grads.find(name);
    if (it == grads.end()) {
      it = grads.emplace(name, BasicTensor<T>(st.params->at(name).shape)).first;
    }
    return it->second.span();
  };

  const int H = cfg.height, W = cfg.width, cl = cfg.last_channels();
  const std::size_t frame = static_cast<std::size_t>(3) * H * W;
  std::vector<T> dz(dout.size());
  for (std::size_t i = 0; i < dz.size(); ++i) dz[i] = dout[i] * st.out[i] * (T{1} - st.out[i]);

  std::vector<T> din(st.block_in[nb].size());
  {
    const std::size_t in_sz = static_cast<std::size_t>(cl) * H * W;
    const std::size_t col_sz = static_cast<std::size_t>(cl) * k * k * H * W;
    st.col.resize(col_sz);
    st.dcol.resize(col_sz);
    auto gw = grad("head.weight");
    auto gb = grad("head.bias");
    for (int i = 0; i < n; ++i) {
      ops::conv2d_backward<T>(
          std::span<const T>(st.block_in[nb].data() + i * in_sz, in_sz), cl, H, W,
          st.head_w->span(), 3, k, std::span<const T>(dz.data() + i * frame, frame),
          std::span<T>(din.data() + i * in_sz, in_sz), gw, gb, st.col, st.dcol);
    }
  }

  for (int b = nb - 1; b >= 0; --b) {
    const auto& blk = st.blocks[b];
    const int s = blk.s, h = blk.h, w = blk.w;
    const int Hb = h * s, Wb = w * s;
    const std::size_t in_sz = static_cast<std::size_t>(blk.cin) * h * w;
    const std::size_t out_sz = static_cast<std::size_t>(blk.cout) * Hb * Wb;

    std::vector<T> dpre(din.size());
    ops::activation_backward<T>(cfg.activation, st.act_in[b], din, dpre);
    if (cfg.norm != Norm::none) {
      std::vector<T> dx(dpre.size());
      auto gg = grad(blk.prefix + "norm.weight");
      auto gbeta = grad(blk.prefix + "norm.bias");
      if (cfg.norm == Norm::instance) {
        ops::instance_norm_backward<T>(st.norm_cache[b], n, blk.cout, Hb * Wb, blk.gamma->span(),
                                       dpre, dx, gg, gbeta);
      } else {
        ops::batch_norm_backward<T>(st.norm_cache[b], n, blk.cout, Hb * Wb, blk.gamma->span(),
                                    dpre, dx, gg, gbeta);
      }
      dpre.swap(dx);
    }

    std::vector<T> dx(static_cast<std::size_t>(n) * in_sz);
    auto gw = grad(blk.prefix + "conv.weight");
    auto gb = grad(blk.prefix + "conv.bias");
    const auto& x = st.block_in[b];
    for (int i = 0; i < n; ++i) {
      std::span<const T> xi(x.data() + i * in_sz, in_sz);
      std::span<const T> dyi(dpre.data() + i * out_sz, out_sz);
      std::span<T> dxi(dx.data() + i * in_sz, in_sz);
      switch (cfg.upscale_mode) {
        case UpscaleMode::pixelshuffle: {
          st.tmp.resize(out_sz);
          ops::pixel_unshuffle<T>(dyi, blk.cout, h, w, s, st.tmp);
          const std::size_t col_sz = static_cast<std::size_t>(blk.cin) * k * k * h * w;
          st.col.resize(col_sz);
          st.dcol.resize(col_sz);
          ops::conv2d_backward<T>(xi, blk.cin, h, w, blk.weight->span(), blk.cout * s * s, k,
                                  st.tmp, dxi, gw, gb, st.col, st.dcol);
          break;
        }
        case UpscaleMode::transpose_conv: {
          using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
          const int cs2 = blk.cout * s * s;
          st.tmp.resize(out_sz);
          ops::pixel_unshuffle<T>(dyi, blk.cout, h, w, s, st.tmp);
          for (int c = 0; c < blk.cout; ++c) {
            const T* plane = dyi.data() + static_cast<std::size_t>(c) * Hb * Wb;
            T acc{0};
            for (int p = 0; p < Hb * Wb; ++p) acc += plane[p];
            gb[c] += acc;
          }
          Eigen::Map<const Mat> X(xi.data(), blk.cin, h * w);
          Eigen::Map<const Mat> dZ(st.tmp.data(), cs2, h * w);
          Eigen::Map<Mat>(gw.data(), blk.cin, cs2).noalias() += X * dZ.transpose();
          Eigen::Map<Mat>(dxi.data(), blk.cin, h * w).noalias() =
              Eigen::Map<const Mat>(blk.weight->data.data(), blk.cin, cs2) * dZ;
          break;
        }
        case UpscaleMode::bilinear_conv: {
          const std::size_t up_sz = static_cast<std::size_t>(blk.cin) * Hb * Wb;
          std::span<const T> ui(st.block_up[b].data() + i * up_sz, up_sz);
          st.tmp.resize(up_sz);
          const std::size_t col_sz = static_cast<std::size_t>(blk.cin) * k * k * Hb * Wb;
          st.col.resize(col_sz);
          st.dcol.resize(col_sz);
          ops::conv2d_backward<T>(ui, blk.cin, Hb, Wb, blk.weight->span(), blk.cout, k, dyi,
                                  st.tmp, gw, gb, st.col, st.dcol);
          ops::bilinear_upsample_backward<T>(st.tmp, blk.cin, h, w, s, dxi);
          break;
        }
      }
    }
    din.swap(dx);
  }

  const int dim = cfg.embedding_dim();
  const int hidden = cfg.mlp_hidden;
  const int stem_out = static_cast<int>(st.stem1_w->dim(0));
  std::vector<T> dz2(st.z2.size());
  ops::activation_backward<T>(cfg.activation, st.z2, din, dz2);
  std::vector<T> da1(st.a1.size());
  ops::linear_backward<T>(st.a1, n, hidden, st.stem1_w->span(), stem_out, dz2, da1,
                          grad("stem.1.weight"), grad("stem.1.bias"));
  std::vector<T> dz1(st.z1.size());
  ops::activation_backward<T>(cfg.activation, st.z1, da1, dz1);
  ops::linear_backward<T>(st.emb, n, dim, st.stem0_w->span(), hidden, dz1, {},
                          grad("stem.0.weight"), grad("stem.0.bias"));
}

template class NervNetwork<float>;
template class NervNetwork<double>;

// ---------------------------------------------------------------------------

std::vector<Image> forward_batch(const NervModel& model, std::span<const double> timestamps) {
  for (double t : timestamps) {
    if (!(t > 0.0 && t <= 1.0)) throw DomainError("timestamp " + std::to_string(t) + " outside (0, 1]");
  }
  NervNetwork<float> net(model.config, model.params);
  std::vector<float> out;
  net.forward(timestamps, false, out);
  const std::size_t frame = static_cast<std::size_t>(3) * model.config.height * model.config.width;
  std::vector<Image> frames;
  frames.reserve(timestamps.size());
  const Shape shape{3, static_cast<std::size_t>(model.config.height),
                    static_cast<std::size_t>(model.config.width)};
  for (std::size_t i = 0; i < timestamps.size(); ++i) {
    frames.emplace_back(shape, std::vector<float>(out.begin() + i * frame, out.begin() + (i + 1) * frame));
  }
  return frames;
}

Image forward(const NervModel& model, double t) {
  const double ts[1] = {t};
  return std::move(forward_batch(model, ts).front());
}

Image decode_frame(const NervModel& model, int index) {
  return forward(model, frame_timestamp(index, model.config.frame_count));
}

}  // namespace nerv
