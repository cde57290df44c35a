#include "nerv/train.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <ostream>
#include <sstream>

#include "nerv/error.hpp"
#include "nerv/logging.hpp"
#include "nerv/metrics.hpp"
#include "nerv/random.hpp"
#include "nerv/schedule.hpp"

namespace nerv {

void validate(const TrainConfig& cfg) {
  if (cfg.epochs < 1) throw InvalidConfig("epochs must be >= 1");
  if (cfg.warmup_epochs < 0 || cfg.warmup_epochs > cfg.epochs) {
    throw InvalidConfig("warmup_epochs must lie in [0, epochs]");
  }
  if (!(cfg.base_lr > 0.0) || !std::isfinite(cfg.base_lr)) {
    throw InvalidConfig("base_lr must be positive");
  }
  if (cfg.batch_size < 1) throw InvalidConfig("batch_size must be >= 1");
  if (cfg.checkpoint_every < 0) throw InvalidConfig("checkpoint_every must be >= 0");
  if (cfg.checkpoint_every > 0 && cfg.checkpoint_dir.empty()) {
    throw InvalidConfig("checkpoint_every requires checkpoint_dir");
  }
  validate(cfg.loss);
}

double lr_at(double epoch, const TrainConfig& cfg) {
  return warmup_cosine_lr(epoch, cfg.epochs, cfg.warmup_epochs, cfg.base_lr);
}

void write_history_csv(std::ostream& os, const TrainHistory& history, bool include_timing) {
  os << "epoch,loss,psnr,ms_ssim,seconds\n";
  char line[160];
  for (const auto& r : history.records) {
    std::snprintf(line, sizeof line, "%d,%.9g,%.6f,%.6f,%.3f\n", r.epoch, r.loss, r.psnr,
                  r.ms_ssim, include_timing ? r.seconds : 0.0);
    os << line;
  }
}

namespace {

void apply_mask(ParamMap& tensors, const PruneMask& mask) {
  for (const auto& [name, keep] : mask.keep) {
    auto it = tensors.find(name);
    if (it == tensors.end()) continue;
    auto& d = it->second.data;
    for (std::size_t i = 0; i < d.size(); ++i)
      if (!keep[i]) d[i] = 0.0f;
  }
}

void check_mask(const NervModel& model, const PruneMask& mask) {
  for (const auto& [name, keep] : mask.keep) {
    auto it = model.params.find(name);
    if (it == model.params.end() || it->second.numel() != keep.size()) {
      throw ShapeError("prune mask does not match parameter '" + name + "'");
    }
  }
}

std::string checkpoint_path(const std::string& dir, int epoch) {
  char name[32];
  std::snprintf(name, sizeof name, "epoch_%05d.ckpt", epoch);
  return (std::filesystem::path(dir) / name).string();
}

}  // namespace

TrainHistory train(NervModel& model, const VideoTensor& video, const TrainConfig& cfg,
                   const TrainHooks& hooks) {
  validate(cfg);
  validate(model.config);
  const auto& mc = model.config;
  if (video.num_frames() < 1) throw DataError("empty video");
  if (video.height() != mc.height || video.width() != mc.width) {
    throw InvalidConfig("video is " + std::to_string(video.height()) + "x" +
                        std::to_string(video.width()) + " but the model outputs " +
                        std::to_string(mc.height) + "x" + std::to_string(mc.width));
  }
  if (video.num_frames() != mc.frame_count) {
    throw InvalidConfig("video has " + std::to_string(video.num_frames()) +
                        " frames but the model represents " + std::to_string(mc.frame_count));
  }

  std::vector<int> frames = hooks.frame_subset;
  if (frames.empty()) {
    for (int i = 0; i < video.num_frames(); ++i) frames.push_back(i);
  }
  for (int f : frames) {
    if (f < 0 || f >= video.num_frames()) {
      throw DomainError("frame index " + std::to_string(f) + " out of range");
    }
  }

  AdamState opt;
  int start_epoch = 0;
  if (hooks.resume) {
    if (!(hooks.resume->model.config == mc)) {
      throw InvalidConfig("checkpoint configuration differs from the model");
    }
    model.params = hooks.resume->model.params;
    opt = hooks.resume->optimizer;
    start_epoch = hooks.resume->epoch;
    if (start_epoch > cfg.epochs) {
      throw InvalidConfig("checkpoint epoch " + std::to_string(start_epoch) +
                          " exceeds configured epochs");
    }
  }
  if (hooks.mask) {
    check_mask(model, *hooks.mask);
    apply_mask(model.params, *hooks.mask);
  }

  const int c = 3, h = mc.height, w = mc.width;
  const std::size_t frame_size = static_cast<std::size_t>(c) * h * w;
  const int n_frames = static_cast<int>(frames.size());
  const int steps = (n_frames + cfg.batch_size - 1) / cfg.batch_size;

  NervNetwork<float> net(mc, model.params);
  ParamMap grads;
  std::vector<float> pred, target, dpred;
  TrainHistory history;

  for (int epoch = start_epoch; epoch < cfg.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    std::vector<int> order = frames;
    Rng rng(mix_seed(cfg.seed, static_cast<std::uint64_t>(epoch) + 1));
    rng.shuffle(order);

    double loss_sum = 0.0, psnr_sum = 0.0, ms_ssim_sum = 0.0;
    for (int step = 0; step < steps; ++step) {
      const int lo = step * cfg.batch_size;
      const int n = std::min(cfg.batch_size, n_frames - lo);
      std::vector<double> ts(n);
      target.resize(n * frame_size);
      for (int i = 0; i < n; ++i) {
        const int f = order[lo + i];
        ts[i] = frame_timestamp(f, mc.frame_count);
        std::copy(video.frames[f].data.begin(), video.frames[f].data.end(),
                  target.begin() + i * frame_size);
      }
      net.forward(ts, true, pred, &model.params);
      dpred.resize(pred.size());
      const double l = loss_and_grad<float>(pred, target, n, c, h, w, cfg.loss, dpred);
      const double lr = lr_at(epoch + static_cast<double>(step) / steps, cfg);
      if (!std::isfinite(l)) {
        std::ostringstream msg;
        msg << "non-finite loss at epoch " << epoch + 1 << ", step " << step + 1 << " (lr " << lr
            << ")";
        throw TrainingError(msg.str());
      }
      loss_sum += l * n;

      for (int i = 0; i < n; ++i) {
        const Shape shape{3, static_cast<std::size_t>(h), static_cast<std::size_t>(w)};
        Image p(shape, std::vector<float>(pred.begin() + i * frame_size,
                                          pred.begin() + (i + 1) * frame_size));
        const Image& v = video.frames[order[lo + i]];
        psnr_sum += psnr(p, v);
        if (cfg.track_ms_ssim) ms_ssim_sum += ms_ssim(p, v);
      }

      for (auto& [name, g] : grads) std::fill(g.data.begin(), g.data.end(), 0.0f);
      net.backward(dpred, grads);
      if (hooks.mask) apply_mask(grads, *hooks.mask);
      adam_step(model.params, grads, opt, lr);
      if (hooks.mask) apply_mask(model.params, *hooks.mask);
    }

    EpochRecord rec;
    rec.epoch = epoch + 1;
    rec.loss = loss_sum / n_frames;
    rec.psnr = psnr_sum / n_frames;
    rec.ms_ssim = cfg.track_ms_ssim ? ms_ssim_sum / n_frames : 0.0;
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    history.records.push_back(rec);

    if (cfg.checkpoint_every > 0 && rec.epoch % cfg.checkpoint_every == 0) {
      std::filesystem::create_directories(cfg.checkpoint_dir);
      Checkpoint ck{model, opt, rec.epoch, {}};
      ck.metadata.emplace_back("fingerprint", fingerprint_hex(video.fingerprint));
      ck.metadata.emplace_back("seed", std::to_string(cfg.seed));
      save_checkpoint(checkpoint_path(cfg.checkpoint_dir, rec.epoch), ck);
    }
    if (hooks.on_epoch) hooks.on_epoch(model, rec);
  }
  return history;
}

VideoQuality compare_videos(const std::vector<Image>& a, const std::vector<Image>& b,
                            bool with_ms_ssim) {
  if (a.size() != b.size() || a.empty()) {
    throw ShapeError("cannot compare " + std::to_string(a.size()) + " frames with " +
                     std::to_string(b.size()));
  }
  VideoQuality q;
  for (std::size_t i = 0; i < a.size(); ++i) {
    q.frame_psnr.push_back(psnr(a[i], b[i]));
    q.psnr += q.frame_psnr.back();
    if (with_ms_ssim) q.ms_ssim += ms_ssim(a[i], b[i]);
  }
  q.psnr /= static_cast<double>(a.size());
  q.ms_ssim /= static_cast<double>(a.size());
  return q;
}

VideoQuality evaluate(const NervModel& model, const VideoTensor& video, std::span<const int> indices,
                      bool with_ms_ssim) {
  std::vector<int> idx(indices.begin(), indices.end());
  if (idx.empty()) {
    for (int i = 0; i < video.num_frames(); ++i) idx.push_back(i);
  }
  std::vector<Image> decoded, truth;
  for (int i : idx) {
    if (i < 0 || i >= video.num_frames()) {
      throw DomainError("frame index " + std::to_string(i) + " out of range");
    }
    decoded.push_back(decode_frame(model, i));
    truth.push_back(video.frames[i]);
  }
  return compare_videos(decoded, truth, with_ms_ssim);
}

}  // namespace nerv
