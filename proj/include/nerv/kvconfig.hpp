#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "nerv/config.hpp"
#include "nerv/noise.hpp"
#include "nerv/train.hpp"

namespace nerv {

/// Flat `key = value` text. Blank lines and lines starting with '#' are
/// ignored; a later assignment replaces an earlier one.
class KvConfig {
 public:
  /// Throws InvalidConfig on a line without '=' or an empty key.
  static KvConfig parse(std::string_view text, std::string_view source = "<text>");
  static KvConfig load(const std::string& path);

  void set(const std::string& key, const std::string& value);
  /// Applies a "key=value" override.
  void apply_override(std::string_view assignment);

  bool has(const std::string& key) const { return values_.count(key) != 0; }
  const std::map<std::string, std::string>& values() const { return values_; }

  std::string get_string(const std::string& key, const std::string& fallback) const;
  long long get_int(const std::string& key, long long fallback) const;
  double get_double(const std::string& key, double fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::vector<int> get_int_list(const std::string& key, const std::vector<int>& fallback) const;

  /// Sorted `key = value` lines.
  std::string to_text() const;

 private:
  std::map<std::string, std::string> values_;
};

/// Everything a CLI run needs besides its input paths.
struct RunSettings {
  NervConfig model;
  /// When non-zero, block_channels is chosen to match this parameter count.
  std::size_t param_budget = 0;
  std::uint64_t model_seed = 0;
  TrainConfig train;
  double prune_q = 0.2;
  int quant_bit = 8;
  TrainConfig finetune;
  NoiseSpec noise;
  int filter_window = 3;
  int interp_stride = 2;
  int workers = 1;
};

/// Typed view of a KvConfig. Unknown keys and malformed values throw
/// InvalidConfig. The model resolution comes from the video at run time.
RunSettings resolve_settings(const KvConfig& kv);

/// Every setting as text, suitable for a reproducible snapshot; parsing it
/// back gives the same settings.
KvConfig settings_snapshot(const RunSettings& s);

/// Format of doubles in snapshots (round-trips exactly).
std::string format_double(double v);

}  // namespace nerv
