#pragma once

#include <vector>

#include "nerv/config.hpp"

namespace nerv {

/// Sinusoidal timestamp embedding:
///   out[2k] = sin(b^k * pi * t), out[2k+1] = cos(b^k * pi * t), k < l.
/// Throws InvalidConfig for l < 1 or b <= 0.
std::vector<double> positional_encode(double t, double b, int l);

/// Network input for timestamp t under the configured embedding. Throws
/// DomainError unless t lies in (0, 1].
std::vector<double> embed_timestamp(const NervConfig& config, double t);

/// Largest embedding length l whose top frequency b^(l-1) stays below
/// `rate`, the Nyquist limit for timestamps spaced 1/rate apart. Higher
/// frequencies alias between training frames and make the output at unseen
/// timestamps arbitrary. Returns at least 1; throws InvalidConfig for b <= 1
/// or rate <= 0.
int nyquist_embed_length(double b, double rate);

}  // namespace nerv
