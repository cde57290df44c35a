#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "nerv/model.hpp"

namespace nerv {

enum class LossTerm { l2, l1, ssim };

/// Reconstruction objective. With the default {l1, ssim} and alpha 0.7 this is
///   alpha * mean|pred - target| + (1 - alpha) * (1 - SSIM(pred, target)).
/// Other subsets reuse alpha as the weight split: a single term has weight 1,
/// two terms get (alpha, 1 - alpha) in the order l2, l1, ssim, and all three
/// get (alpha/2, alpha/2, 1 - alpha).
struct LossSpec {
  double alpha = 0.7;
  std::vector<LossTerm> terms{LossTerm::l1, LossTerm::ssim};

  bool operator==(const LossSpec&) const = default;
};

/// Parses "l1+ssim", "l2", "l2+l1", ... Throws InvalidConfig.
std::vector<LossTerm> parse_loss_terms(std::string_view s);
std::string to_string(const std::vector<LossTerm>& terms);

/// Throws InvalidConfig for an empty term set or alpha outside [0, 1].
void validate(const LossSpec& spec);

/// Per-term weights in canonical (l2, l1, ssim) order.
struct LossWeights {
  double l2 = 0.0, l1 = 0.0, ssim = 0.0;
};
LossWeights loss_weights(const LossSpec& spec);

double loss(const Image& pred, const Image& target, const LossSpec& spec);

/// Mean loss over a batch of frames.
double loss(std::span<const Image> pred, std::span<const Image> target, const LossSpec& spec);

/// Batch loss over n planar frames of shape (c, h, w) laid out contiguously,
/// writing dLoss/dpred into `grad` when non-empty.
template <typename T>
double loss_and_grad(std::span<const T> pred, std::span<const T> target, int n, int c, int h,
                     int w, const LossSpec& spec, std::span<T> grad);

}  // namespace nerv
