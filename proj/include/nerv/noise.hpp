#pragma once

#include <cstdint>
#include <string_view>

#include "nerv/video.hpp"

namespace nerv {

enum class NoisePattern { white, black, salt_pepper, random };

std::string_view to_string(NoisePattern p);
NoisePattern parse_noise_pattern(std::string_view s);

struct NoiseSpec {
  NoisePattern pattern = NoisePattern::salt_pepper;
  double density = 0.05;
  std::uint64_t seed = 0;
};

/// Perturbs exactly floor(density * H * W) distinct pixels of every frame
/// (all three channels): white sets 1, black 0, salt_pepper 0 or 1 with equal
/// probability, random a uniform colour. Locations depend only on the seed
/// and frame index. Throws InvalidConfig for density outside [0, 1].
VideoTensor add_noise(const VideoTensor& video, const NoiseSpec& spec);

}  // namespace nerv
