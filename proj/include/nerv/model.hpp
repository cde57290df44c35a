#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "nerv/config.hpp"
#include "nerv/layers.hpp"
#include "nerv/tensor.hpp"

namespace nerv {

/// Planar RGB image, shape (3, H, W), values in [0, 1].
using Image = Tensor;

/// A video represented as network weights.
struct NervModel {
  NervConfig config;
  /// Trainable tensors plus normalization running statistics (buffers).
  ParamMap params;
};

/// Every tensor a network with this configuration owns, by name.
std::map<std::string, Shape> parameter_shapes(const NervConfig& config);

/// Running statistics of batch norm; stored alongside parameters but neither
/// trained nor counted as parameters.
bool is_buffer(std::string_view name);

/// Weight tensors (rank >= 2) take part in magnitude pruning; biases,
/// normalization affines and buffers do not.
bool is_prunable(std::string_view name, const Shape& shape);

/// Deterministic construction with fan-in scaled uniform initialization.
NervModel build_model(const NervConfig& config, std::uint64_t seed);

/// Exact number of trainable scalars (buffers excluded).
std::size_t count_params(const ParamMap& params);
std::size_t count_params(const NervModel& model);

/// Parameter count a configuration would have, without allocating it.
std::size_t count_params(const NervConfig& config);

/// Smallest-error block_channels for a parameter budget (other fields fixed).
NervConfig match_param_budget(NervConfig config, std::size_t target_params);

/// Frame for timestamp t in (0, 1]. Pure; safe to call concurrently.
Image forward(const NervModel& model, double t);

/// Frames for a batch of timestamps; equals per-timestamp forward().
std::vector<Image> forward_batch(const NervModel& model,
                                 std::span<const double> timestamps);

/// Frame with index `index` of the represented video.
Image decode_frame(const NervModel& model, int index);

struct ForwardOptions {
  /// Round weights and every intermediate activation to IEEE binary16.
  bool half_precision = false;
};

/// Differentiable evaluator of the architecture. Holds per-call caches, so
/// one instance must not be shared between threads; the parameter map is
/// only read (except batch-norm running statistics in training mode).
template <typename T>
class NervNetwork {
 public:
  NervNetwork(const NervConfig& config, const BasicParamMap<T>& params);
  ~NervNetwork();
  NervNetwork(NervNetwork&&) noexcept;
  NervNetwork& operator=(NervNetwork&&) noexcept;

  /// Evaluates frames for `timestamps`; output laid out (n, 3, H, W).
  /// In training mode intermediate values are kept for backward() and batch
  /// norm uses batch statistics, writing updated running statistics to
  /// `stats_out` when non-null.
  void forward(std::span<const double> timestamps, bool training,
               std::vector<T>& out, BasicParamMap<T>* stats_out = nullptr,
               const ForwardOptions& options = {});

  /// Accumulates dLoss/dParam into `grads` (allocated on demand) given
  /// dLoss/dOutput of the last training forward().
  void backward(std::span<const T> dout, BasicParamMap<T>& grads);

 private:
  struct State;
  std::unique_ptr<State> state_;
};

}  // namespace nerv
