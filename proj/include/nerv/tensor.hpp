#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <numeric>
#include <span>
#include <string>
#include <vector>

namespace nerv {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

std::string shape_string(const Shape& shape);

/// Dense row-major tensor. Owns its storage.
template <typename T>
struct BasicTensor {
  Shape shape;
  std::vector<T> data;

  BasicTensor() = default;
  explicit BasicTensor(Shape s, T fill = T{})
      : shape(std::move(s)), data(shape_numel(shape), fill) {}
  BasicTensor(Shape s, std::vector<T> values)
      : shape(std::move(s)), data(std::move(values)) {}

  std::size_t numel() const noexcept { return data.size(); }
  std::size_t rank() const noexcept { return shape.size(); }
  std::size_t dim(std::size_t i) const { return shape.at(i); }

  std::span<T> span() noexcept { return data; }
  std::span<const T> span() const noexcept { return data; }

  T& operator[](std::size_t i) noexcept { return data[i]; }
  const T& operator[](std::size_t i) const noexcept { return data[i]; }

  bool operator==(const BasicTensor&) const = default;

  template <typename U>
  BasicTensor<U> cast() const {
    return BasicTensor<U>(shape, std::vector<U>(data.begin(), data.end()));
  }
};

using Tensor = BasicTensor<float>;

/// Named parameter tensors, ordered by name.
template <typename T>
using BasicParamMap = std::map<std::string, BasicTensor<T>>;
using ParamMap = BasicParamMap<float>;

}  // namespace nerv
