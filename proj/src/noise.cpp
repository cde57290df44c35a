#include "nerv/noise.hpp"

#include <cmath>
#include <numeric>
#include <string>

#include "nerv/error.hpp"
#include "nerv/random.hpp"

namespace nerv {

std::string_view to_string(NoisePattern p) {
  switch (p) {
    case NoisePattern::white: return "white";
    case NoisePattern::black: return "black";
    case NoisePattern::salt_pepper: return "salt_pepper";
    case NoisePattern::random: return "random";
  }
  return "?";
}

NoisePattern parse_noise_pattern(std::string_view s) {
  if (s == "white") return NoisePattern::white;
  if (s == "black") return NoisePattern::black;
  if (s == "salt_pepper") return NoisePattern::salt_pepper;
  if (s == "random") return NoisePattern::random;
  throw InvalidConfig("unknown noise pattern '" + std::string(s) + "'");
}

VideoTensor add_noise(const VideoTensor& video, const NoiseSpec& spec) {
  if (!(spec.density >= 0.0 && spec.density <= 1.0)) {
    throw InvalidConfig("noise density must lie in [0, 1]");
  }
  std::vector<Image> frames = video.frames;
  const std::size_t hw = static_cast<std::size_t>(video.height()) * video.width();
  const auto count = static_cast<std::size_t>(std::floor(spec.density * static_cast<double>(hw)));
  std::vector<std::uint32_t> pixels(hw);
  for (std::size_t f = 0; f < frames.size(); ++f) {
    Rng rng(mix_seed(spec.seed, f));
    std::iota(pixels.begin(), pixels.end(), 0u);
    // Partial Fisher-Yates: the first `count` entries are a uniform sample.
    for (std::size_t i = 0; i < count; ++i) {
      std::swap(pixels[i], pixels[i + rng.below(hw - i)]);
    }
    auto& d = frames[f].data;
    for (std::size_t i = 0; i < count; ++i) {
      const std::size_t p = pixels[i];
      float rgb[3] = {0.0f, 0.0f, 0.0f};
      switch (spec.pattern) {
        case NoisePattern::white: rgb[0] = rgb[1] = rgb[2] = 1.0f; break;
        case NoisePattern::black: rgb[0] = rgb[1] = rgb[2] = 0.0f; break;
        case NoisePattern::salt_pepper:
          rgb[0] = rgb[1] = rgb[2] = (rng.next() >> 63) ? 1.0f : 0.0f;
          break;
        case NoisePattern::random:
          for (auto& v : rgb) v = static_cast<float>(rng.uniform());
          break;
      }
      for (int c = 0; c < 3; ++c) d[c * hw + p] = rgb[c];
    }
  }
  return make_video(std::move(frames), video.filenames);
}

}  // namespace nerv
