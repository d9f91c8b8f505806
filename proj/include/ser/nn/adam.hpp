#pragma once

#include <cmath>
#include <vector>

#include "ser/nn/layers.hpp"

namespace ser::nn {

// Bias-corrected Adam over a fixed parameter list. Moments are kept in
// double regardless of the storage scalar.
template <class S>
class Adam {
 public:
  explicit Adam(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void step(std::vector<Param<S>>& params) {
    if (m_.empty()) {
      for (const auto& p : params) {
        m_.emplace_back(p.trainable ? p.tensor->numel() : 0, 0.0);
        v_.emplace_back(p.trainable ? p.tensor->numel() : 0, 0.0);
      }
    }
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, t_);
    const double bc2 = 1.0 - std::pow(beta2_, t_);
    for (size_t pi = 0; pi < params.size(); ++pi) {
      auto& p = params[pi];
      if (!p.trainable) continue;
      auto& m = m_[pi];
      auto& v = v_[pi];
      for (size_t i = 0; i < p.tensor->numel(); ++i) {
        const double g = static_cast<double>(p.tensor->grad[i]);
        if (!std::isfinite(g)) {
          fail("NumericError", "non-finite gradient in " + p.name);
        }
        m[i] = beta1_ * m[i] + (1.0 - beta1_) * g;
        v[i] = beta2_ * v[i] + (1.0 - beta2_) * g * g;
        const double mhat = m[i] / bc1;
        const double vhat = v[i] / bc2;
        p.tensor->data[i] = static_cast<S>(static_cast<double>(p.tensor->data[i]) -
                                           lr_ * mhat / (std::sqrt(vhat) + eps_));
      }
    }
  }

  long t() const { return t_; }

 private:
  double lr_, beta1_, beta2_, eps_;
  long t_ = 0;
  std::vector<std::vector<double>> m_, v_;
};

}  // namespace ser::nn
