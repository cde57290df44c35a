#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "nerv/loss.hpp"
#include "nerv/model.hpp"
#include "nerv/optim.hpp"
#include "nerv/prune_mask.hpp"
#include "nerv/video.hpp"

namespace nerv {

struct TrainConfig {
  int epochs = 150;
  int warmup_epochs = 30;
  double base_lr = 5e-4;
  /// Frames per optimization step.
  int batch_size = 1;
  LossSpec loss;
  std::uint64_t seed = 0;
  /// Write a checkpoint every this many epochs (0 disables).
  int checkpoint_every = 0;
  std::string checkpoint_dir;
  /// Also track MS-SSIM per epoch (PSNR is always tracked).
  bool track_ms_ssim = true;

  bool operator==(const TrainConfig&) const = default;
};

void validate(const TrainConfig& cfg);

/// Learning rate at (possibly fractional) `epoch` of a run.
double lr_at(double epoch, const TrainConfig& cfg);

struct EpochRecord {
  int epoch = 0;  // 1-based count of completed epochs
  double loss = 0.0;
  double psnr = 0.0;
  double ms_ssim = 0.0;
  double seconds = 0.0;
};

/// Per-epoch metrics. Quality numbers come from the predictions made during
/// the epoch's optimization steps (before each step's update).
struct TrainHistory {
  std::vector<EpochRecord> records;
};

/// CSV with header epoch,loss,psnr,ms_ssim,seconds. With `include_timing`
/// false the seconds column is written as 0 so the file is reproducible.
void write_history_csv(std::ostream& os, const TrainHistory& history, bool include_timing = true);

struct Checkpoint;

struct TrainHooks {
  /// Frame indices to fit (empty = all). Timestamps always use the model's
  /// frame_count, so a subset leaves gaps in time.
  std::vector<int> frame_subset;
  /// Pruned weights stay exactly zero.
  const PruneMask* mask = nullptr;
  /// Continue from a saved optimizer state and epoch counter.
  const Checkpoint* resume = nullptr;
  std::function<void(const NervModel&, const EpochRecord&)> on_epoch;
};

/// Fits `model` to `video` with Adam and a warmup-cosine schedule. Frames are
/// shuffled every epoch from a generator seeded by cfg.seed; the run is
/// bit-reproducible for a given (model, video, cfg).
/// Throws InvalidConfig on resolution mismatch and TrainingError when the loss
/// becomes non-finite.
TrainHistory train(NervModel& model, const VideoTensor& video, const TrainConfig& cfg,
                   const TrainHooks& hooks = {});

struct VideoQuality {
  double psnr = 0.0;     // mean of per-frame PSNR
  double ms_ssim = 0.0;  // mean of per-frame MS-SSIM
  std::vector<double> frame_psnr;
};

/// Decodes frames `indices` (all when empty) and compares them to `video`.
VideoQuality evaluate(const NervModel& model, const VideoTensor& video,
                      std::span<const int> indices = {}, bool with_ms_ssim = true);

/// Mean per-frame PSNR / MS-SSIM between two frame sequences.
VideoQuality compare_videos(const std::vector<Image>& a, const std::vector<Image>& b,
                            bool with_ms_ssim = true);

/// Serialized training state.
struct Checkpoint {
  NervModel model;
  AdamState optimizer;
  int epoch = 0;
  /// Free-form provenance (video path, fingerprint, seeds, ...).
  std::vector<std::pair<std::string, std::string>> metadata;
};

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);
std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes);

}  // namespace nerv
