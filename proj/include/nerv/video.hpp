#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "nerv/model.hpp"

namespace nerv {

/// A frame sequence with pixel values in [0, 1]. Frames are planar
/// (3, H, W); frame i corresponds to timestamp (i + 1) / T.
struct VideoTensor {
  std::vector<Image> frames;
  /// FNV-1a hash over frame dimensions and pixel bytes.
  std::uint64_t fingerprint = 0;
  std::vector<std::string> filenames;

  int num_frames() const { return static_cast<int>(frames.size()); }
  int height() const { return frames.empty() ? 0 : static_cast<int>(frames[0].dim(1)); }
  int width() const { return frames.empty() ? 0 : static_cast<int>(frames[0].dim(2)); }
};

/// Validates (T >= 1, equal (3, H, W) shapes, finite values), clamps values to
/// [0, 1] and fills in the fingerprint. Throws DataError.
VideoTensor make_video(std::vector<Image> frames, std::vector<std::string> filenames = {});

std::uint64_t content_fingerprint(const std::vector<Image>& frames);
std::string fingerprint_hex(std::uint64_t fingerprint);

/// Smooth colour gradients drifting across the frame under a fixed multi-scale
/// texture (random-phase sinusoids, 3 to 40 px wavelengths, 1/f amplitudes)
/// that translates in the opposite direction.
VideoTensor synth_translating_gradient(int frames, int height, int width);

/// A soft-edged disc moving `pixels_per_frame` to the right over a static
/// gradient background.
VideoTensor synth_moving_disc(int frames, int height, int width, double pixels_per_frame = 1.0);

/// Every frame identical.
VideoTensor synth_static(int frames, int height, int width);

}  // namespace nerv
