#include "nerv/schedule.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "nerv/error.hpp"

namespace nerv {

double warmup_cosine_lr(double epoch, int epochs, int warmup, double base_lr) {
  if (!(epoch >= 0.0 && epoch <= epochs)) {
    throw DomainError("epoch " + std::to_string(epoch) + " outside [0, " + std::to_string(epochs) + "]");
  }
  if (warmup > 0 && epoch < warmup) return base_lr * epoch / warmup;
  const int span = epochs - warmup;
  if (span <= 0) return base_lr;
  const double progress = (epoch - warmup) / span;
  return 0.5 * base_lr * (1.0 + std::cos(std::numbers::pi * progress));
}

}  // namespace nerv
