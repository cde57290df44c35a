#include "nerv/compression.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <ostream>

#include "nerv/bitstream.hpp"
#include "nerv/error.hpp"

namespace nerv {

std::size_t count_prunable(const NervModel& model) {
  std::size_t n = 0;
  for (const auto& [name, t] : model.params)
    if (is_prunable(name, t.shape)) n += t.numel();
  return n;
}

std::pair<NervModel, PruneMask> prune_global(const NervModel& model, double q) {
  if (!(q >= 0.0 && q < 1.0)) {
    throw InvalidConfig("pruning ratio must lie in [0, 1), got " + std::to_string(q));
  }
  struct Entry {
    float mag;
    std::uint32_t tensor;
    std::uint32_t index;
  };
  NervModel out = model;
  PruneMask mask;
  mask.sparsity = q;
  std::vector<std::vector<float>*> tensors;
  std::vector<std::vector<std::uint8_t>*> keeps;
  std::vector<Entry> entries;
  for (auto& [name, t] : out.params) {
    if (!is_prunable(name, t.shape)) continue;
    auto& keep = mask.keep[name];
    keep.assign(t.numel(), 1);
    const auto id = static_cast<std::uint32_t>(tensors.size());
    tensors.push_back(&t.data);
    keeps.push_back(&keep);
    for (std::size_t i = 0; i < t.numel(); ++i) {
      entries.push_back({std::fabs(t.data[i]), id, static_cast<std::uint32_t>(i)});
    }
  }
  const auto k = static_cast<std::size_t>(std::floor(q * static_cast<double>(entries.size())));
  if (k == 0) return {std::move(out), std::move(mask)};
  // Map order is name order, so (mag, tensor, index) realizes the tie-break.
  auto less = [](const Entry& a, const Entry& b) {
    if (a.mag != b.mag) return a.mag < b.mag;
    if (a.tensor != b.tensor) return a.tensor < b.tensor;
    return a.index < b.index;
  };
  std::nth_element(entries.begin(), entries.begin() + (k - 1), entries.end(), less);
  for (std::size_t i = 0; i < k; ++i) {
    (*tensors[entries[i].tensor])[entries[i].index] = 0.0f;
    (*keeps[entries[i].tensor])[entries[i].index] = 0;
  }
  return {std::move(out), std::move(mask)};
}

TrainConfig finetune_config(std::uint64_t seed) {
  TrainConfig cfg;
  cfg.epochs = kFinetuneEpochs;
  cfg.warmup_epochs = 10;
  cfg.seed = seed;
  return cfg;
}

TrainHistory finetune(NervModel& model, const PruneMask& mask, const VideoTensor& video,
                      const TrainConfig& cfg) {
  TrainHooks hooks;
  hooks.mask = &mask;
  return train(model, video, cfg, hooks);
}

QuantizedTensor quantize_tensor(const Tensor& x, int bit) {
  QuantizedTensor q;
  q.shape = x.shape;
  q.bit = bit;
  for (float v : x.data) {
    if (!std::isfinite(v)) throw DataError("cannot quantize non-finite values");
  }
  if (bit == kBypassBits) {
    q.indices.reserve(2 * x.numel());
    for (float v : x.data) {
      const auto u = std::bit_cast<std::uint32_t>(v);
      q.indices.push_back(static_cast<std::uint16_t>(u & 0xFFFFu));
      q.indices.push_back(static_cast<std::uint16_t>(u >> 16));
    }
    return q;
  }
  if (bit < 1 || bit > 16) {
    throw InvalidConfig("quantization width must be 1..16 or 32, got " + std::to_string(bit));
  }
  q.indices.assign(x.numel(), 0);
  if (x.data.empty()) return q;
  const auto [lo, hi] = std::minmax_element(x.data.begin(), x.data.end());
  q.mu_min = *lo;
  if (*hi == *lo) return q;
  const std::uint32_t levels = (std::uint32_t{1} << bit) - 1;
  q.scale = static_cast<float>((static_cast<double>(*hi) - *lo) / levels);
  if (q.scale == 0.0f) return q;
  const double scale = q.scale, mu = q.mu_min;
  for (std::size_t i = 0; i < x.numel(); ++i) {
    // The argument is non-negative, so this is round-half-away-from-zero.
    const double r = std::floor((x.data[i] - mu) / scale + 0.5);
    q.indices[i] = static_cast<std::uint16_t>(std::clamp(r, 0.0, static_cast<double>(levels)));
  }
  return q;
}

double dequantized_value(const QuantizedTensor& q, std::uint32_t index) {
  return static_cast<double>(index) * static_cast<double>(q.scale) + static_cast<double>(q.mu_min);
}

Tensor dequantize_tensor(const QuantizedTensor& q) {
  Tensor t(q.shape);
  if (q.bit == kBypassBits) {
    if (q.indices.size() != 2 * t.numel()) throw ShapeError("bypass stream has wrong length");
    for (std::size_t i = 0; i < t.numel(); ++i) {
      const std::uint32_t u = q.indices[2 * i] | (std::uint32_t{q.indices[2 * i + 1]} << 16);
      t.data[i] = std::bit_cast<float>(u);
    }
    return t;
  }
  if (q.indices.size() != t.numel()) throw ShapeError("index stream has wrong length");
  for (std::size_t i = 0; i < t.numel(); ++i) {
    t.data[i] = static_cast<float>(dequantized_value(q, q.indices[i]));
  }
  return t;
}

CompressedArtifact quantize_model(const NervModel& model, int bit) {
  validate(model.config);
  CompressedArtifact a;
  a.config = model.config;
  std::vector<std::uint16_t> stream;
  for (const auto& [name, t] : model.params) {
    a.tensors.emplace_back(name, quantize_tensor(t, bit));
    const auto& idx = a.tensors.back().second.indices;
    stream.insert(stream.end(), idx.begin(), idx.end());
  }
  auto enc = huffman_encode(stream);
  a.code = std::move(enc.code);
  a.payload = std::move(enc.payload);
  a.payload_bits = enc.bit_count;
  return a;
}

NervModel dequantize_model(const CompressedArtifact& artifact) {
  NervModel m;
  m.config = artifact.config;
  for (const auto& [name, q] : artifact.tensors) m.params.emplace(name, dequantize_tensor(q));
  return m;
}

StageSizes stage_sizes(const NervModel& dense, const NervModel& pruned,
                       const CompressedArtifact& artifact) {
  StageSizes s;
  for (const auto& [name, t] : dense.params) s.raw_fp32 += 4 * t.numel();
  for (const auto& [name, t] : pruned.params)
    for (float v : t.data) s.pruned_fp32_nonzero += v != 0.0f ? 4 : 0;
  std::uint64_t fixed_bits = 0;
  for (const auto& [name, q] : artifact.tensors) {
    fixed_bits += static_cast<std::uint64_t>(shape_numel(q.shape)) * q.bit;
  }
  s.quantized_fixed_width = (fixed_bits + 7) / 8;
  s.huffman_payload = (artifact.payload_bits + 7) / 8;
  const auto layout = artifact_layout(artifact);
  s.file_header = layout.header_bytes;
  s.file_codebook = layout.codebook_bytes;
  s.file_payload = layout.payload_bytes;
  s.file_total = layout.total_bytes;
  return s;
}

double bpp(std::uint64_t bits, int frames, int height, int width) {
  if (frames < 1 || height < 1 || width < 1) throw DomainError("bpp needs positive dimensions");
  return static_cast<double>(bits) /
         (static_cast<double>(frames) * static_cast<double>(height) * static_cast<double>(width));
}

void write_stage_csv(std::ostream& os, const StageSizes& s, int frames, int height, int width) {
  const std::pair<const char*, std::uint64_t> rows[] = {
      {"raw_fp32", s.raw_fp32},
      {"pruned_fp32_nonzero", s.pruned_fp32_nonzero},
      {"quantized_fixed_width", s.quantized_fixed_width},
      {"huffman_payload", s.huffman_payload},
      {"file_header", s.file_header},
      {"file_codebook", s.file_codebook},
      {"file_payload", s.file_payload},
      {"file_total", s.file_total},
  };
  os << "stage,bytes,bpp\n";
  char line[128];
  for (const auto& [name, bytes] : rows) {
    std::snprintf(line, sizeof line, "%s,%llu,%.8f\n", name,
                  static_cast<unsigned long long>(bytes), bpp(8 * bytes, frames, height, width));
    os << line;
  }
}

CompressResult compress_model(const NervModel& model, const CompressOptions& options,
                              const VideoTensor* video) {
  CompressResult r;
  std::tie(r.pruned, r.mask) = prune_global(model, options.q);
  if (options.q > 0.0 && video != nullptr) {
    r.finetune_history = finetune(r.pruned, r.mask, *video, options.finetune);
  }
  r.artifact = quantize_model(r.pruned, options.bit);
  r.sizes = stage_sizes(model, r.pruned, r.artifact);
  return r;
}

}  // namespace nerv
