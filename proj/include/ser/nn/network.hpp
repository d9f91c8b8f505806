#pragma once

#include <memory>
#include <string>
#include <vector>

#include "ser/nn/layers.hpp"

namespace ser::nn {

// A sequential stack assembled from LayerSpecs. Channel counts and fan-ins
// are inferred by propagating the per-sample shape through the list, so an
// incompatible chain fails at construction, not at first use.
template <class S>
class Network {
 public:
  Network(const std::vector<LayerSpec>& specs, int input_len, int input_channels,
          uint64_t init_seed) {
    std::vector<int> shape{input_len, input_channels};  // per-sample, batch omitted
    int index = 0;
    for (const auto& spec : specs) {
      const std::string nm =
          layer_kind_name(spec.kind) + "_" + std::to_string(index);
      switch (spec.kind) {
        case LayerKind::Conv1D:
          require(shape.size() == 2, nm);
          layers_.push_back(std::make_unique<Conv1D<S>>(nm, shape[1], spec.filters,
                                                        spec.kernel, spec.dilation, spec.l2));
          shape[1] = spec.filters;
          break;
        case LayerKind::BatchNorm:
          require(shape.size() == 2, nm);
          layers_.push_back(std::make_unique<BatchNorm<S>>(nm, shape[1]));
          break;
        case LayerKind::ReLU:
          layers_.push_back(std::make_unique<ReLU<S>>(nm));
          break;
        case LayerKind::MaxPool1D:
          require(shape.size() == 2 && shape[0] >= 2, nm);
          layers_.push_back(std::make_unique<MaxPool1D<S>>(nm));
          shape[0] /= 2;
          break;
        case LayerKind::Dropout:
          layers_.push_back(
              std::make_unique<Dropout<S>>(nm, spec.rate, static_cast<uint64_t>(index)));
          break;
        case LayerKind::Flatten:
          if (shape.size() == 2) shape = {shape[0] * shape[1]};
          layers_.push_back(std::make_unique<Flatten<S>>(nm));
          break;
        case LayerKind::Dense:
          require(shape.size() == 1, nm);
          layers_.push_back(std::make_unique<Dense<S>>(nm, shape[0], spec.units, spec.l2));
          shape = {spec.units};
          break;
        case LayerKind::Lstm:
          require(shape.size() == 2, nm);
          layers_.push_back(std::make_unique<Lstm<S>>(nm, shape[1], spec.units));
          shape = {spec.units};
          break;
        case LayerKind::Gru:
          require(shape.size() == 2, nm);
          layers_.push_back(std::make_unique<Gru<S>>(nm, shape[1], spec.units));
          shape = {spec.units};
          break;
        case LayerKind::Softmax:
          require(shape.size() == 1, nm);
          layers_.push_back(std::make_unique<Softmax<S>>(nm));
          break;
      }
      ++index;
    }
    output_dim_ = shape.size() == 1 ? shape[0] : shape[0] * shape[1];

    Rng rng(init_seed);
    for (auto& l : layers_) l->init(rng);
  }

  Tensor<S> forward(const Tensor<S>& x, Mode mode) {
    Tensor<S> cur = x;
    for (auto& l : layers_) cur = l->forward(cur, mode);
    return cur;
  }

  void backward(const Tensor<S>& dloss_dout) {
    Tensor<S> cur = dloss_dout;
    for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) {
      cur = (*it)->backward(cur);
    }
  }

  std::vector<Param<S>> params() {
    std::vector<Param<S>> out;
    for (auto& l : layers_) l->collect_params(out);
    return out;
  }

  void zero_grads() {
    for (auto& p : params()) {
      if (p.trainable) p.tensor->zero_grad();
    }
  }

  void set_step_seed(uint64_t seed) {
    for (auto& l : layers_) l->set_step_seed(seed);
  }

  // every serialized scalar, trainable or not
  size_t param_count() {
    size_t n = 0;
    for (auto& p : params()) n += p.tensor->numel();
    return n;
  }

  int output_dim() const { return output_dim_; }

 private:
  static void require(bool ok, const std::string& layer) {
    if (!ok) fail("ShapeMismatch", layer + ": incompatible input shape in layer chain");
  }

  std::vector<std::unique_ptr<Layer<S>>> layers_;
  int output_dim_ = 0;
};

}  // namespace ser::nn
