#pragma once

#include <cstddef>
#include <numeric>
#include <string>
#include <vector>

namespace sigbench::cnn {

// Per-item shape, e.g. {3,32,32} image planes, {64,336} 1-d feature maps,
// {2048} flat vectors.
using Shape = std::vector<int>;

inline std::size_t shape_size(const Shape& s) {
  std::size_t p = 1;
  for (int d : s) p *= static_cast<std::size_t>(d);
  return p;
}

inline std::string shape_str(const Shape& s) {
  std::string out = "[";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += "x";
    out += std::to_string(s[i]);
  }
  return out + "]";
}

// A batch of n same-shaped items in one contiguous buffer.
template <typename T>
struct Batch {
  std::size_t n = 0;
  Shape dims;
  std::vector<T> data;

  std::size_t item_size() const { return shape_size(dims); }
  T* item(std::size_t i) { return data.data() + i * item_size(); }
  const T* item(std::size_t i) const { return data.data() + i * item_size(); }

  void resize(std::size_t n_, const Shape& dims_) {
    n = n_;
    dims = dims_;
    data.resize(n * shape_size(dims));
  }
  void zero() { std::fill(data.begin(), data.end(), T(0)); }
};

}  // namespace sigbench::cnn
