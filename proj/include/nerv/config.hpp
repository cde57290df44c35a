#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace nerv {

enum class Activation { relu, leaky_relu, swish, gelu };
enum class Norm { none, batch, instance };
enum class UpscaleMode { pixelshuffle, transpose_conv, bilinear_conv };
enum class Embedding { positional, none };

std::string_view to_string(Activation a);
std::string_view to_string(Norm n);
std::string_view to_string(UpscaleMode m);
std::string_view to_string(Embedding e);

Activation parse_activation(std::string_view s);
Norm parse_norm(std::string_view s);
UpscaleMode parse_upscale_mode(std::string_view s);
Embedding parse_embedding(std::string_view s);

/// Architecture hyperparameters of a NeRV network.
///
/// The stem spatial size is not stored: it is derived from the target
/// resolution and the product of the upscale factors, and configurations for
/// which that division is not exact are rejected by validate().
struct NervConfig {
  double embed_base = 1.25;
  int embed_length = 80;
  Embedding embedding = Embedding::positional;
  std::vector<int> upscale_factors{5, 3, 2, 2, 2};
  int stem_channels = 64;
  int block_channels = 512;
  int mlp_hidden = 512;
  Activation activation = Activation::gelu;
  Norm norm = Norm::none;
  UpscaleMode upscale_mode = UpscaleMode::pixelshuffle;
  int conv_kernel = 3;
  int height = 1080;
  int width = 1920;
  /// Number of frames T of the represented video; frame i maps to the
  /// timestamp (i + 1) / T.
  int frame_count = 1;

  int num_blocks() const { return static_cast<int>(upscale_factors.size()); }
  int upscale_product() const;
  int stem_height() const { return height / upscale_product(); }
  int stem_width() const { return width / upscale_product(); }
  /// Width of the network input: 2l for positional encoding, 1 otherwise.
  int embedding_dim() const;
  /// Output channels of block k (0-based): max(round(C2 / 2^k), 1).
  int block_out_channels(int k) const;
  int block_in_channels(int k) const;
  int last_channels() const { return block_out_channels(num_blocks() - 1); }

  bool operator==(const NervConfig&) const = default;
};

/// Throws InvalidConfig when a field violates its contract.
void validate(const NervConfig& config);

/// Timestamp of frame `index` in a video of `frame_count` frames.
double frame_timestamp(int index, int frame_count);

}  // namespace nerv
