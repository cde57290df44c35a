#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "nerv/model.hpp"

namespace nerv {

/// Reconstructs the dequantized model stored in a .nrv stream.
NervModel load_model(std::span<const std::uint8_t> bytes);
NervModel load_model_file(const std::string& path);

/// Decodes frames by index. Work is split over `workers` threads by frame;
/// each frame is evaluated on its own, so results do not depend on order or
/// worker count. Throws DomainError for an index outside [0, T - 1].
std::vector<Image> decode_frames(const NervModel& model, std::span<const int> indices,
                                 int workers = 1, const ForwardOptions& options = {});

enum class Precision { full, half };

struct FpsReport {
  double fps = 0.0;
  double seconds = 0.0;
  int frames = 0;
  std::string hardware;
};

/// Times sequential decoding of `n_frames` frames (cycling through the
/// video). Half precision rounds weights and activations to binary16.
FpsReport benchmark_fps(const NervModel& model, int n_frames, Precision precision = Precision::full);

/// CPU model, core count and SIMD width this binary was built for.
std::string hardware_descriptor();

}  // namespace nerv
