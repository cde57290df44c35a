#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "nerv/model.hpp"
#include "nerv/train.hpp"
#include "nerv/video.hpp"

namespace nerv {

/// Coordinate networks mapping one (x, y, t) sample to one RGB value.
enum class PixelwiseVariant {
  /// Sine activations with frequency omega0; inputs in [-1, 1].
  sine_mlp,
  /// Sinusoidal encoding of each coordinate followed by a ReLU MLP; inputs in (0, 1].
  pe_relu_mlp,
};

std::string_view to_string(PixelwiseVariant v);
PixelwiseVariant parse_pixelwise_variant(std::string_view s);

struct PixelwiseConfig {
  PixelwiseVariant variant = PixelwiseVariant::sine_mlp;
  /// Number of linear layers, including the output layer.
  int depth = 3;
  int hidden = 256;
  double omega0 = 30.0;
  double embed_base = 2.0;
  int embed_length = 8;
  int height = 128;
  int width = 128;
  int frame_count = 1;

  int input_dim() const;
  bool operator==(const PixelwiseConfig&) const = default;
};

void validate(const PixelwiseConfig& cfg);

struct PixelwiseModel {
  PixelwiseConfig config;
  /// layers.{i}.weight (out, in) and layers.{i}.bias (out).
  ParamMap params;
};

PixelwiseModel build_pixelwise(const PixelwiseConfig& cfg, std::uint64_t seed);
std::size_t count_params(const PixelwiseModel& model);
std::size_t count_params(const PixelwiseConfig& cfg);

/// Hidden width whose parameter count is closest to `target`.
PixelwiseConfig match_pixelwise_budget(PixelwiseConfig cfg, std::size_t target);

/// Normalized coordinate of pixel/frame `index` along an axis of length n:
/// pixel centres spanning [-1, 1] for sine_mlp, (index + 1) / n for pe_relu_mlp.
double pixel_coordinate(PixelwiseVariant v, int index, int n);

/// RGB in [0, 1] at one coordinate. Throws DomainError for coordinates
/// outside the variant's range.
std::array<float, 3> pixelwise_forward(const PixelwiseModel& model, double x, double y, double t);

/// Batched evaluation: `coords` holds n (x, y, t) triples, `rgb` receives n
/// triples. Matches n pixelwise_forward() calls up to float rounding
/// (the batch goes through matrix products).
void pixelwise_forward_batch(const PixelwiseModel& model, std::span<const double> coords,
                             std::span<float> rgb);

/// Frame `index` rendered with H * W coordinate evaluations.
Image pixelwise_render(const PixelwiseModel& model, int index);

/// Fits with Adam on random pixel minibatches under an MSE objective. An epoch
/// is one pass over all T * H * W pixels in shuffled order.
TrainHistory train_pixelwise(PixelwiseModel& model, const VideoTensor& video,
                             const TrainConfig& cfg, int pixel_batch = 4096);

enum class Representation { pixel_wise, image_wise };

/// Network evaluations needed to reconstruct a T x H x W video.
std::uint64_t sampling_cost(int frames, int height, int width, Representation r);

}  // namespace nerv
