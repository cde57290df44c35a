#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace nerv {

/// Per-tensor keep masks for pruned weights (1 = kept, 0 = pruned). Tensors
/// absent from the map are not pruned.
struct PruneMask {
  std::map<std::string, std::vector<std::uint8_t>> keep;
  double sparsity = 0.0;

  std::size_t pruned_count() const {
    std::size_t n = 0;
    for (const auto& [name, m] : keep)
      for (auto k : m) n += k == 0;
    return n;
  }
};

}  // namespace nerv
