#pragma once

#include <cmath>
#include <numeric>
#include <vector>

#include "ser/error.hpp"

namespace ser::nn {

// Dense row-major n-d array. grad stays empty except on parameters.
template <class S>
struct Tensor {
  std::vector<int> shape;
  std::vector<S> data;
  std::vector<S> grad;

  Tensor() = default;
  explicit Tensor(std::vector<int> sh, S fill = S(0)) : shape(std::move(sh)) {
    data.assign(numel_of(shape), fill);
  }

  static size_t numel_of(const std::vector<int>& sh) {
    size_t n = 1;
    for (int d : sh) n *= static_cast<size_t>(d);
    return n;
  }

  size_t numel() const { return data.size(); }
  int rank() const { return static_cast<int>(shape.size()); }
  int dim(int i) const { return shape[i]; }

  S& at(int i, int j) { return data[static_cast<size_t>(i) * shape[1] + j]; }
  const S& at(int i, int j) const { return data[static_cast<size_t>(i) * shape[1] + j]; }
  S& at(int i, int j, int k) {
    return data[(static_cast<size_t>(i) * shape[1] + j) * shape[2] + k];
  }
  const S& at(int i, int j, int k) const {
    return data[(static_cast<size_t>(i) * shape[1] + j) * shape[2] + k];
  }

  void alloc_grad() { grad.assign(data.size(), S(0)); }
  void zero_grad() { std::fill(grad.begin(), grad.end(), S(0)); }

  bool all_finite() const {
    for (S v : data) {
      if (!std::isfinite(static_cast<double>(v))) return false;
    }
    return true;
  }
};

}  // namespace ser::nn
