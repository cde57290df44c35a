#include "nerv/encoding.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "nerv/error.hpp"

namespace nerv {

std::vector<double> positional_encode(double t, double b, int l) {
  if (l < 1) throw InvalidConfig("embedding length must be >= 1");
  if (!(b > 0.0)) throw InvalidConfig("embedding base must be positive");
  std::vector<double> out(2 * static_cast<std::size_t>(l));
  for (int k = 0; k < l; ++k) {
    const double phase = std::pow(b, k) * std::numbers::pi * t;
    out[2 * k] = std::sin(phase);
    out[2 * k + 1] = std::cos(phase);
  }
  return out;
}

std::vector<double> embed_timestamp(const NervConfig& config, double t) {
  if (!(t > 0.0 && t <= 1.0)) {
    throw DomainError("timestamp " + std::to_string(t) + " outside (0, 1]");
  }
  if (config.embedding == Embedding::none) return {t};
  return positional_encode(t, config.embed_base, config.embed_length);
}

int nyquist_embed_length(double b, double rate) {
  if (!(b > 1.0) || !(rate > 0.0)) throw InvalidConfig("need b > 1 and a positive rate");
  int l = 1;
  while (l < 4096 && std::pow(b, l) < rate) ++l;
  return l;
}

}  // namespace nerv
