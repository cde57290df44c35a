#include "nerv/config.hpp"

#include <cmath>
#include <string>

#include "nerv/error.hpp"

namespace nerv {

std::string_view to_string(Activation a) {
  switch (a) {
    case Activation::relu: return "relu";
    case Activation::leaky_relu: return "leaky_relu";
    case Activation::swish: return "swish";
    case Activation::gelu: return "gelu";
  }
  return "?";
}

std::string_view to_string(Norm n) {
  switch (n) {
    case Norm::none: return "none";
    case Norm::batch: return "batch";
    case Norm::instance: return "instance";
  }
  return "?";
}

std::string_view to_string(UpscaleMode m) {
  switch (m) {
    case UpscaleMode::pixelshuffle: return "pixelshuffle";
    case UpscaleMode::transpose_conv: return "transpose_conv";
    case UpscaleMode::bilinear_conv: return "bilinear_conv";
  }
  return "?";
}

std::string_view to_string(Embedding e) {
  switch (e) {
    case Embedding::positional: return "pe";
    case Embedding::none: return "none";
  }
  return "?";
}

Activation parse_activation(std::string_view s) {
  if (s == "relu") return Activation::relu;
  if (s == "leaky_relu") return Activation::leaky_relu;
  if (s == "swish") return Activation::swish;
  if (s == "gelu") return Activation::gelu;
  throw InvalidConfig("unknown activation '" + std::string(s) + "'");
}

Norm parse_norm(std::string_view s) {
  if (s == "none") return Norm::none;
  if (s == "batch") return Norm::batch;
  if (s == "instance") return Norm::instance;
  throw InvalidConfig("unknown norm '" + std::string(s) + "'");
}

UpscaleMode parse_upscale_mode(std::string_view s) {
  if (s == "pixelshuffle") return UpscaleMode::pixelshuffle;
  if (s == "transpose_conv") return UpscaleMode::transpose_conv;
  if (s == "bilinear_conv") return UpscaleMode::bilinear_conv;
  throw InvalidConfig("unknown upscale mode '" + std::string(s) + "'");
}

Embedding parse_embedding(std::string_view s) {
  if (s == "pe") return Embedding::positional;
  if (s == "none") return Embedding::none;
  throw InvalidConfig("unknown embedding '" + std::string(s) + "'");
}

int NervConfig::upscale_product() const {
  long long p = 1;
  for (int s : upscale_factors) {
    p *= s;
    if (p > (1 << 20)) return 1 << 20;
  }
  return static_cast<int>(p);
}

int NervConfig::embedding_dim() const {
  return embedding == Embedding::positional ? 2 * embed_length : 1;
}

int NervConfig::block_out_channels(int k) const {
  const double c = std::round(block_channels / std::ldexp(1.0, k));
  return std::max(1, static_cast<int>(c));
}

int NervConfig::block_in_channels(int k) const {
  return k == 0 ? stem_channels : block_out_channels(k - 1);
}

void validate(const NervConfig& c) {
  auto fail = [](const std::string& msg) { throw InvalidConfig(msg); };
  if (!(c.embed_base > 0.0) || !std::isfinite(c.embed_base))
    fail("embed_base must be positive");
  if (c.embed_length < 1) fail("embed_length must be >= 1");
  if (c.upscale_factors.empty()) fail("at least one upscale factor required");
  for (int s : c.upscale_factors)
    if (s < 1 || s > 16) fail("upscale factors must lie in [1, 16]");
  if (c.stem_channels < 1) fail("stem_channels must be positive");
  if (c.block_channels < 1) fail("block_channels must be positive");
  if (c.mlp_hidden < 1) fail("mlp_hidden must be positive");
  if (c.conv_kernel < 1 || c.conv_kernel % 2 == 0 || c.conv_kernel > 15)
    fail("conv_kernel must be an odd integer in [1, 15]");
  if (c.height < 1 || c.width < 1) fail("target resolution must be positive");
  if (c.frame_count < 1) fail("frame_count must be positive");
  const int p = c.upscale_product();
  if (c.height % p != 0 || c.width % p != 0) {
    fail("upscale product " + std::to_string(p) + " does not divide target " +
         std::to_string(c.height) + "x" + std::to_string(c.width) +
         " (non-integral stem)");
  }
}

double frame_timestamp(int index, int frame_count) {
  if (frame_count < 1 || index < 0 || index >= frame_count) {
    throw DomainError("frame index " + std::to_string(index) +
                      " outside [0, " + std::to_string(frame_count - 1) + "]");
  }
  return static_cast<double>(index + 1) / frame_count;
}

}  // namespace nerv
