#include "nerv/tasks.hpp"

#include <chrono>
#include <cstdio>
#include <ostream>

#include "nerv/bitstream.hpp"
#include "nerv/decoder.hpp"
#include "nerv/error.hpp"
#include "nerv/metrics.hpp"

namespace nerv {

void write_eval_csv(std::ostream& os, const std::vector<EvalRecord>& records, bool include_timing) {
  os << "label,params,bpp,psnr,ms_ssim,encode_seconds,decode_fps\n";
  char line[256];
  for (const auto& r : records) {
    std::snprintf(line, sizeof line, "%s,%zu,%.8f,%.6f,%.6f,%.3f,%.3f\n", r.label.c_str(),
                  r.params, r.bpp, r.psnr, r.ms_ssim, include_timing ? r.encode_seconds : 0.0,
                  include_timing ? r.decode_fps : 0.0);
    os << line;
  }
}

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

NervConfig fit_to_video(NervConfig cfg, const VideoTensor& video) {
  cfg.height = video.height();
  cfg.width = video.width();
  cfg.frame_count = video.num_frames();
  validate(cfg);
  return cfg;
}

EvalRecord fit_and_score(const std::string& label, const VideoTensor& train_video,
                         const VideoTensor& reference, const NervConfig& model_cfg,
                         const TrainConfig& train_cfg, std::uint64_t model_seed) {
  const auto t0 = Clock::now();
  NervModel model = build_model(model_cfg, model_seed);
  train(model, train_video, train_cfg);
  EvalRecord rec;
  rec.label = label;
  rec.encode_seconds = seconds_since(t0);
  rec.params = count_params(model);
  const auto q = evaluate(model, reference);
  rec.psnr = q.psnr;
  rec.ms_ssim = q.ms_ssim;
  rec.decode_fps = benchmark_fps(model, reference.num_frames()).fps;
  return rec;
}

}  // namespace

DenoiseResult denoise_eval(const VideoTensor& clean, const NoiseSpec& noise,
                           const NervConfig& model_cfg, const TrainConfig& train_cfg,
                           std::uint64_t model_seed, int filter_window) {
  const VideoTensor noisy = add_noise(clean, noise);
  DenoiseResult r;
  r.noisy_psnr = compare_videos(noisy.frames, clean.frames, false).psnr;
  for (auto kind : {FilterKind::gaussian, FilterKind::uniform, FilterKind::median,
                    FilterKind::minimum, FilterKind::maximum}) {
    const auto filtered = filter_baseline(noisy, kind, filter_window);
    r.filter_psnr.emplace_back(kind, compare_videos(filtered.frames, clean.frames, false).psnr);
  }
  r.nerv = fit_and_score("nerv_" + std::string(to_string(noise.pattern)), noisy, clean,
                         fit_to_video(model_cfg, clean), train_cfg, model_seed);
  return r;
}

InterpolationResult interpolation_eval(const VideoTensor& video, int stride,
                                       const NervConfig& model_cfg, const TrainConfig& train_cfg,
                                       std::uint64_t model_seed) {
  if (stride < 2) throw InvalidConfig("interpolation stride must be >= 2");
  InterpolationResult r;
  for (int i = 0; i < video.num_frames(); ++i) {
    (i % stride == 0 ? r.train_frames : r.heldout_frames).push_back(i);
  }
  if (r.train_frames.size() < 2) throw InvalidConfig("interpolation needs at least two training frames");
  const auto cfg = fit_to_video(model_cfg, video);
  const auto t0 = Clock::now();
  NervModel model = build_model(cfg, model_seed);
  TrainHooks hooks;
  hooks.frame_subset = r.train_frames;
  train(model, video, train_cfg, hooks);
  r.heldout.label = "heldout_stride" + std::to_string(stride);
  r.heldout.encode_seconds = seconds_since(t0);
  r.heldout.params = count_params(model);
  r.train_psnr = evaluate(model, video, r.train_frames, false).psnr;
  if (!r.heldout_frames.empty()) {
    const auto q = evaluate(model, video, r.heldout_frames, true);
    r.heldout_psnr = q.psnr;
    r.heldout.psnr = q.psnr;
    r.heldout.ms_ssim = q.ms_ssim;
  }
  r.heldout.decode_fps = benchmark_fps(model, video.num_frames()).fps;
  return r;
}

std::string_view to_string(AblationAxis a) {
  switch (a) {
    case AblationAxis::embedding: return "embedding";
    case AblationAxis::upscale: return "upscale";
    case AblationAxis::norm: return "norm";
    case AblationAxis::activation: return "activation";
    case AblationAxis::loss: return "loss";
  }
  return "?";
}

AblationAxis parse_ablation_axis(std::string_view s) {
  if (s == "embedding") return AblationAxis::embedding;
  if (s == "upscale") return AblationAxis::upscale;
  if (s == "norm") return AblationAxis::norm;
  if (s == "activation") return AblationAxis::activation;
  if (s == "loss") return AblationAxis::loss;
  throw InvalidConfig("unknown ablation axis '" + std::string(s) + "'");
}

std::vector<AblationVariant> ablation_variants(AblationAxis axis, const NervConfig& base,
                                               const TrainConfig& train_cfg, std::size_t budget) {
  std::vector<AblationVariant> out;
  auto add = [&](std::string label, NervConfig m, TrainConfig t) {
    out.push_back({std::move(label), match_param_budget(std::move(m), budget), std::move(t)});
  };
  switch (axis) {
    case AblationAxis::embedding:
      for (auto e : {Embedding::none, Embedding::positional}) {
        NervConfig m = base;
        m.embedding = e;
        add(std::string(to_string(e)), m, train_cfg);
      }
      break;
    case AblationAxis::upscale:
      for (auto u : {UpscaleMode::transpose_conv, UpscaleMode::bilinear_conv,
                     UpscaleMode::pixelshuffle}) {
        NervConfig m = base;
        m.upscale_mode = u;
        add(std::string(to_string(u)), m, train_cfg);
      }
      break;
    case AblationAxis::norm:
      for (auto n : {Norm::batch, Norm::instance, Norm::none}) {
        NervConfig m = base;
        m.norm = n;
        add(std::string(to_string(n)), m, train_cfg);
      }
      break;
    case AblationAxis::activation:
      for (auto a : {Activation::relu, Activation::leaky_relu, Activation::swish,
                     Activation::gelu}) {
        NervConfig m = base;
        m.activation = a;
        add(std::string(to_string(a)), m, train_cfg);
      }
      break;
    case AblationAxis::loss:
      for (const char* terms : {"l2", "l1", "ssim", "l2+l1", "l2+ssim", "l1+ssim"}) {
        TrainConfig t = train_cfg;
        t.loss.terms = parse_loss_terms(terms);
        add(terms, base, t);
      }
      break;
  }
  return out;
}

std::vector<EvalRecord> ablation_sweep(const VideoTensor& video, AblationAxis axis,
                                       const NervConfig& base, const TrainConfig& train_cfg,
                                       std::size_t budget, std::uint64_t model_seed) {
  std::vector<EvalRecord> out;
  for (const auto& v : ablation_variants(axis, fit_to_video(base, video), train_cfg, budget)) {
    out.push_back(fit_and_score(v.label, video, video, v.model, v.train, model_seed));
  }
  return out;
}

std::vector<RdPoint> rd_report(const VideoTensor& video, const std::vector<NervConfig>& configs,
                               double q, int bit, const TrainConfig& train_cfg,
                               const TrainConfig& finetune_cfg, std::uint64_t model_seed) {
  if (configs.empty()) throw InvalidConfig("rate-distortion sweep needs at least one configuration");
  std::vector<RdPoint> out;
  for (const auto& c : configs) {
    const auto cfg = fit_to_video(c, video);
    const auto t0 = Clock::now();
    NervModel model = build_model(cfg, model_seed);
    train(model, video, train_cfg);
    CompressOptions opts;
    opts.q = q;
    opts.bit = bit;
    opts.finetune = finetune_cfg;
    const auto result = compress_model(model, opts, &video);
    RdPoint p;
    p.file = serialize(result.artifact);
    p.record.encode_seconds = seconds_since(t0);
    const NervModel decoded = load_model(p.file);
    p.record.label = "C2=" + std::to_string(cfg.block_channels);
    p.record.params = count_params(decoded);
    p.record.bpp = bpp(8 * p.file.size(), video.num_frames(), video.height(), video.width());
    const auto quality = evaluate(decoded, video);
    p.record.psnr = quality.psnr;
    p.record.ms_ssim = quality.ms_ssim;
    p.record.decode_fps = benchmark_fps(decoded, video.num_frames()).fps;
    out.push_back(std::move(p));
  }
  return out;
}

}  // namespace nerv
