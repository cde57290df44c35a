#pragma once

namespace nerv {

/// Linear warmup from 0 to base_lr over `warmup` epochs, then cosine decay to
/// 0 at `epochs`. `epoch` may be fractional. Throws DomainError for epoch
/// outside [0, epochs].
double warmup_cosine_lr(double epoch, int epochs, int warmup, double base_lr);

}  // namespace nerv
