#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "nerv/huffman.hpp"
#include "nerv/model.hpp"
#include "nerv/prune_mask.hpp"
#include "nerv/train.hpp"

namespace nerv {

/// Magnitude pruning: zeroes exactly floor(q * N) of the N prunable weights
/// with the smallest |value|, ties resolved by tensor name and then element
/// index. Biases, normalization affines and buffers are never pruned.
/// Throws InvalidConfig unless 0 <= q < 1.
std::pair<NervModel, PruneMask> prune_global(const NervModel& model, double q);

/// Number of weights prune_global() considers.
std::size_t count_prunable(const NervModel& model);

inline constexpr int kFinetuneEpochs = 50;

/// Training configuration used for fine-tuning after pruning.
TrainConfig finetune_config(std::uint64_t seed = 0);

/// Retrains with pruned weights pinned at zero.
TrainHistory finetune(NervModel& model, const PruneMask& mask, const VideoTensor& video,
                      const TrainConfig& cfg = finetune_config());

/// Width that stores raw float32 bit patterns losslessly.
inline constexpr int kBypassBits = 32;

/// Affine-quantized tensor. For bit in [1, 16] element i dequantizes to
/// indices[i] * scale + mu_min. For bit == kBypassBits, `indices` holds the
/// low and high 16-bit halves of each float32 (2 symbols per element) and
/// scale / mu_min are 0.
struct QuantizedTensor {
  Shape shape;
  int bit = 8;
  float scale = 0.0f;
  float mu_min = 0.0f;
  std::vector<std::uint16_t> indices;

  std::size_t symbol_count() const { return indices.size(); }
  bool operator==(const QuantizedTensor&) const = default;
};

/// scale = (max - min) / (2^bit - 1) stored as float32; indices
/// round((x - min) / scale) with ties away from zero, clamped to the level
/// range. A constant tensor gets scale 0 and all indices 0.
/// Throws DataError for non-finite input, InvalidConfig for a bad width.
QuantizedTensor quantize_tensor(const Tensor& x, int bit);
Tensor dequantize_tensor(const QuantizedTensor& q);

/// Dequantized value of `index` computed in double (before float rounding).
double dequantized_value(const QuantizedTensor& q, std::uint32_t index);

/// Everything a decoder needs: architecture, per-tensor quantization records
/// (in parameter-name order) and one entropy code over all index streams.
struct CompressedArtifact {
  NervConfig config;
  std::vector<std::pair<std::string, QuantizedTensor>> tensors;
  HuffmanCode code;
  std::vector<std::uint8_t> payload;
  std::uint64_t payload_bits = 0;

  bool operator==(const CompressedArtifact&) const = default;
};

/// Quantizes every tensor (weights, biases, buffers) at `bit` and entropy
/// codes the concatenated index streams.
CompressedArtifact quantize_model(const NervModel& model, int bit);

/// Weights a decoder reconstructs from the artifact.
NervModel dequantize_model(const CompressedArtifact& artifact);

/// Sizes after each pipeline stage, in bytes. The file_* entries partition
/// the serialized file.
struct StageSizes {
  std::uint64_t raw_fp32 = 0;
  std::uint64_t pruned_fp32_nonzero = 0;
  std::uint64_t quantized_fixed_width = 0;
  std::uint64_t huffman_payload = 0;
  std::uint64_t file_header = 0;
  std::uint64_t file_codebook = 0;
  std::uint64_t file_payload = 0;
  std::uint64_t file_total = 0;
};

StageSizes stage_sizes(const NervModel& dense, const NervModel& pruned,
                       const CompressedArtifact& artifact);

/// CSV with header stage,bytes,bpp.
void write_stage_csv(std::ostream& os, const StageSizes& sizes, int frames, int height, int width);

/// Bits per pixel; 0 bits gives 0. Throws DomainError for non-positive dims.
double bpp(std::uint64_t bits, int frames, int height, int width);

struct CompressOptions {
  double q = 0.0;
  int bit = 8;
  /// Fine-tuning runs only when q > 0 and a video is supplied.
  TrainConfig finetune = finetune_config();
};

struct CompressResult {
  CompressedArtifact artifact;
  /// Pruned (and fine-tuned) float model before quantization.
  NervModel pruned;
  PruneMask mask;
  TrainHistory finetune_history;
  StageSizes sizes;
};

/// prune -> fine-tune -> quantize -> entropy code.
CompressResult compress_model(const NervModel& model, const CompressOptions& options,
                              const VideoTensor* video = nullptr);

}  // namespace nerv
