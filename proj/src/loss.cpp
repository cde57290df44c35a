#include "nerv/loss.hpp"

#include <algorithm>
#include <cmath>

#include "nerv/error.hpp"
#include "nerv/metrics.hpp"

namespace nerv {

std::vector<LossTerm> parse_loss_terms(std::string_view s) {
  std::vector<LossTerm> terms;
  std::size_t pos = 0;
  while (pos <= s.size() && !s.empty()) {
    const std::size_t next = s.find('+', pos);
    const std::string_view tok = s.substr(pos, next == std::string_view::npos ? s.npos : next - pos);
    LossTerm t;
    if (tok == "l2") t = LossTerm::l2;
    else if (tok == "l1") t = LossTerm::l1;
    else if (tok == "ssim") t = LossTerm::ssim;
    else throw InvalidConfig("unknown loss term '" + std::string(tok) + "'");
    if (std::find(terms.begin(), terms.end(), t) != terms.end())
      throw InvalidConfig("duplicate loss term '" + std::string(tok) + "'");
    terms.push_back(t);
    if (next == std::string_view::npos) break;
    pos = next + 1;
  }
  if (terms.empty()) throw InvalidConfig("empty loss term set");
  std::sort(terms.begin(), terms.end());
  return terms;
}

std::string to_string(const std::vector<LossTerm>& terms) {
  std::string s;
  for (auto t : terms) {
    if (!s.empty()) s += "+";
    s += t == LossTerm::l2 ? "l2" : t == LossTerm::l1 ? "l1" : "ssim";
  }
  return s;
}

void validate(const LossSpec& spec) {
  if (spec.terms.empty()) throw InvalidConfig("empty loss term set");
  if (!(spec.alpha >= 0.0 && spec.alpha <= 1.0)) throw InvalidConfig("loss alpha must lie in [0, 1]");
}

LossWeights loss_weights(const LossSpec& spec) {
  validate(spec);
  std::vector<LossTerm> terms = spec.terms;
  std::sort(terms.begin(), terms.end());
  terms.erase(std::unique(terms.begin(), terms.end()), terms.end());
  std::vector<double> w;
  if (terms.size() == 1) w = {1.0};
  else if (terms.size() == 2) w = {spec.alpha, 1.0 - spec.alpha};
  else w = {spec.alpha / 2, spec.alpha / 2, 1.0 - spec.alpha};
  LossWeights out;
  for (std::size_t i = 0; i < terms.size(); ++i) {
    switch (terms[i]) {
      case LossTerm::l2: out.l2 = w[i]; break;
      case LossTerm::l1: out.l1 = w[i]; break;
      case LossTerm::ssim: out.ssim = w[i]; break;
    }
  }
  return out;
}

template <typename T>
double loss_and_grad(std::span<const T> pred, std::span<const T> target, int n, int c, int h,
                     int w, const LossSpec& spec, std::span<T> grad) {
  const LossWeights lw = loss_weights(spec);
  const std::size_t frame = static_cast<std::size_t>(c) * h * w;
  if (pred.size() != frame * n || target.size() != frame * n)
    throw ShapeError("loss: prediction/target sizes do not match the batch shape");
  const bool want_grad = !grad.empty();
  std::vector<T> gssim(want_grad && lw.ssim > 0 ? frame : 0);
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    const T* p = pred.data() + i * frame;
    const T* t = target.data() + i * frame;
    T* g = want_grad ? grad.data() + i * frame : nullptr;
    double l1 = 0.0, l2 = 0.0;
    for (std::size_t j = 0; j < frame; ++j) {
      const double d = static_cast<double>(p[j]) - t[j];
      l1 += std::abs(d);
      l2 += d * d;
      if (g) {
        const double sign = d > 0 ? 1.0 : (d < 0 ? -1.0 : 0.0);
        g[j] = static_cast<T>((lw.l1 * sign + lw.l2 * 2 * d) / static_cast<double>(frame) / n);
      }
    }
    double frame_loss = lw.l1 * l1 / frame + lw.l2 * l2 / frame;
    if (lw.ssim > 0) {
      const double s = ssim_with_grad<T>(std::span<const T>(p, frame), std::span<const T>(t, frame),
                                         c, h, w, std::span<T>(gssim));
      frame_loss += lw.ssim * (1.0 - s);
      if (g) {
        for (std::size_t j = 0; j < frame; ++j) g[j] -= static_cast<T>(lw.ssim * gssim[j] / n);
      }
    }
    total += frame_loss;
  }
  return total / n;
}

template double loss_and_grad<float>(std::span<const float>, std::span<const float>, int, int,
                                     int, int, const LossSpec&, std::span<float>);
template double loss_and_grad<double>(std::span<const double>, std::span<const double>, int,
                                      int, int, int, const LossSpec&, std::span<double>);

double loss(const Image& pred, const Image& target, const LossSpec& spec) {
  if (pred.shape != target.shape || pred.rank() != 3)
    throw ShapeError("loss: shapes differ: " + shape_string(pred.shape) + " vs " + shape_string(target.shape));
  return loss_and_grad<float>(pred.span(), target.span(), 1, static_cast<int>(pred.dim(0)),
                              static_cast<int>(pred.dim(1)), static_cast<int>(pred.dim(2)), spec, {});
}

double loss(std::span<const Image> pred, std::span<const Image> target, const LossSpec& spec) {
  if (pred.size() != target.size() || pred.empty())
    throw ShapeError("loss: batch sizes differ or batch is empty");
  double total = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) total += loss(pred[i], target[i], spec);
  return total / static_cast<double>(pred.size());
}

}  // namespace nerv
