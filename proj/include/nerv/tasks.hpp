#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "nerv/compression.hpp"
#include "nerv/filters.hpp"
#include "nerv/noise.hpp"
#include "nerv/train.hpp"

namespace nerv {

/// One row of an evaluation report.
struct EvalRecord {
  std::string label;
  std::size_t params = 0;
  double bpp = 0.0;
  double psnr = 0.0;
  double ms_ssim = 0.0;
  double encode_seconds = 0.0;
  double decode_fps = 0.0;
};

/// CSV with header label,params,bpp,psnr,ms_ssim,encode_seconds,decode_fps.
/// Without timing the last two columns are written as 0.
void write_eval_csv(std::ostream& os, const std::vector<EvalRecord>& records,
                    bool include_timing = true);

struct DenoiseResult {
  EvalRecord nerv;          // NeRV fitted to the noisy video, scored against the clean one
  double noisy_psnr = 0.0;  // noisy input vs clean
  std::vector<std::pair<FilterKind, double>> filter_psnr;
};

/// Trains on the noisy video only (no noise locations) and compares the
/// decoded frames, the noisy input and every filter baseline to the clean video.
DenoiseResult denoise_eval(const VideoTensor& clean, const NoiseSpec& noise,
                           const NervConfig& model_cfg, const TrainConfig& train_cfg,
                           std::uint64_t model_seed, int filter_window = 3);

struct InterpolationResult {
  EvalRecord heldout;  // quality on frames not seen in training
  double train_psnr = 0.0;
  double heldout_psnr = 0.0;
  std::vector<int> train_frames;
  std::vector<int> heldout_frames;
};

/// Fits frames 0, stride, 2 * stride, ... with timestamps normalized over the
/// whole video and scores the remaining frames. Throws InvalidConfig for
/// stride < 2 or fewer than two training frames.
InterpolationResult interpolation_eval(const VideoTensor& video, int stride,
                                       const NervConfig& model_cfg, const TrainConfig& train_cfg,
                                       std::uint64_t model_seed);

enum class AblationAxis { embedding, upscale, norm, activation, loss };

std::string_view to_string(AblationAxis a);
AblationAxis parse_ablation_axis(std::string_view s);

struct AblationVariant {
  std::string label;
  NervConfig model;
  TrainConfig train;
};

/// Variants along `axis`, each with block_channels re-fitted to `budget`
/// parameters so sizes match.
std::vector<AblationVariant> ablation_variants(AblationAxis axis, const NervConfig& base,
                                               const TrainConfig& train_cfg, std::size_t budget);

/// One training run per variant; PSNR / MS-SSIM of the decoded video.
std::vector<EvalRecord> ablation_sweep(const VideoTensor& video, AblationAxis axis,
                                       const NervConfig& base, const TrainConfig& train_cfg,
                                       std::size_t budget, std::uint64_t model_seed);

struct RdPoint {
  EvalRecord record;
  std::vector<std::uint8_t> file;  // serialized .nrv
};

/// For each configuration: fit, compress (prune q, fine-tune, quantize at
/// `bit`), serialize, decode and score. BPP is computed from the file length.
std::vector<RdPoint> rd_report(const VideoTensor& video, const std::vector<NervConfig>& configs,
                               double q, int bit, const TrainConfig& train_cfg,
                               const TrainConfig& finetune_cfg, std::uint64_t model_seed);

}  // namespace nerv
