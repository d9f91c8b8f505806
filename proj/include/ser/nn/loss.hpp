#pragma once

#include <cmath>
#include <vector>

#include "ser/nn/layers.hpp"
#include "ser/nn/tensor.hpp"

namespace ser::nn {

inline constexpr double kCrossEntropyEps = 1e-12;

// Mean over the batch of -sum_k y_k log(p_k + eps).
template <class S>
double cross_entropy(const Tensor<S>& probs, const std::vector<int>& labels) {
  const int B = probs.dim(0);
  if (static_cast<size_t>(B) != labels.size()) {
    fail("ShapeMismatch", "cross_entropy: batch size vs label count");
  }
  double loss = 0.0;
  for (int b = 0; b < B; ++b) {
    loss -= std::log(static_cast<double>(probs.at(b, labels[b])) + kCrossEntropyEps);
  }
  return loss / B;
}

// d(loss)/d(probs) for the loss above.
template <class S>
Tensor<S> cross_entropy_grad(const Tensor<S>& probs, const std::vector<int>& labels) {
  const int B = probs.dim(0);
  Tensor<S> d(probs.shape);
  for (int b = 0; b < B; ++b) {
    d.at(b, labels[b]) = static_cast<S>(
        -1.0 / ((static_cast<double>(probs.at(b, labels[b])) + kCrossEntropyEps) * B));
  }
  return d;
}

// lambda * sum ||w||^2 over regularized parameters.
template <class S>
double l2_penalty(const std::vector<Param<S>>& params) {
  double acc = 0.0;
  for (const auto& p : params) {
    if (!p.regularized) continue;
    double sq = 0.0;
    for (S v : p.tensor->data) sq += static_cast<double>(v) * static_cast<double>(v);
    acc += p.l2 * sq;
  }
  return acc;
}

// grad += 2 * lambda * w on regularized parameters.
template <class S>
void add_l2_gradients(std::vector<Param<S>>& params) {
  for (auto& p : params) {
    if (!p.regularized) continue;
    for (size_t i = 0; i < p.tensor->numel(); ++i) {
      p.tensor->grad[i] += static_cast<S>(2.0 * p.l2 * static_cast<double>(p.tensor->data[i]));
    }
  }
}

}  // namespace ser::nn
