#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include "ser/nn/tensor.hpp"
#include "ser/rng.hpp"

namespace ser::nn {

enum class Mode { Train, Infer };

enum class LayerKind {
  Conv1D,
  BatchNorm,
  ReLU,
  MaxPool1D,
  Dropout,
  Flatten,
  Dense,
  Lstm,
  Gru,
  Softmax
};

inline std::string layer_kind_name(LayerKind k) {
  switch (k) {
    case LayerKind::Conv1D: return "conv1d";
    case LayerKind::BatchNorm: return "batchnorm";
    case LayerKind::ReLU: return "relu";
    case LayerKind::MaxPool1D: return "maxpool1d";
    case LayerKind::Dropout: return "dropout";
    case LayerKind::Flatten: return "flatten";
    case LayerKind::Dense: return "dense";
    case LayerKind::Lstm: return "lstm";
    case LayerKind::Gru: return "gru";
    case LayerKind::Softmax: return "softmax";
  }
  return "?";
}

inline LayerKind parse_layer_kind(const std::string& name) {
  if (name == "conv1d") return LayerKind::Conv1D;
  if (name == "batchnorm") return LayerKind::BatchNorm;
  if (name == "relu") return LayerKind::ReLU;
  if (name == "maxpool1d") return LayerKind::MaxPool1D;
  if (name == "dropout") return LayerKind::Dropout;
  if (name == "flatten") return LayerKind::Flatten;
  if (name == "dense") return LayerKind::Dense;
  if (name == "lstm") return LayerKind::Lstm;
  if (name == "gru") return LayerKind::Gru;
  if (name == "softmax") return LayerKind::Softmax;
  fail("BadArgs", "unknown layer kind '" + name + "'");
}

// Declarative layer description; sizes not listed here (input channels,
// dense fan-in) are inferred when the network is assembled.
struct LayerSpec {
  LayerKind kind = LayerKind::ReLU;
  int filters = 0;    // conv1d
  int kernel = 8;     // conv1d
  int dilation = 1;   // conv1d
  int units = 0;      // dense / lstm / gru
  double rate = 0.0;  // dropout
  double l2 = 0.0;    // conv1d / dense kernel+bias regularization
};

inline double sigmoid_d(double x) { return 1.0 / (1.0 + std::exp(-x)); }

template <class S>
struct Param {
  std::string name;
  Tensor<S>* tensor = nullptr;
  bool regularized = false;  // participates in the L2 penalty
  bool trainable = true;     // false for batch-norm moving statistics
  double l2 = 0.0;
};

// ---------------------------------------------------------------------------
// Recurrent cells. Free-standing so a single cell step can be exercised and
// reused by the sequence layers.

template <class S>
struct LstmCell {
  int units = 0;
  int input_dim = 0;
  // each weight matrix is (units, units + input_dim) over [h_{t-1}, x_t]
  Tensor<S> w_forget, w_input, w_cand, w_output;
  Tensor<S> b_forget, b_input, b_cand, b_output;

  LstmCell() = default;
  LstmCell(int units_, int input_dim_) : units(units_), input_dim(input_dim_) {
    const std::vector<int> wshape{units, units + input_dim};
    w_forget = Tensor<S>(wshape);
    w_input = Tensor<S>(wshape);
    w_cand = Tensor<S>(wshape);
    w_output = Tensor<S>(wshape);
    b_forget = Tensor<S>({units});
    b_input = Tensor<S>({units});
    b_cand = Tensor<S>({units});
    b_output = Tensor<S>({units});
  }
};

// Gate pre-activations and activations for one timestep, kept for BPTT.
template <class S>
struct LstmStepCache {
  std::vector<S> z;  // [h_{t-1}, x_t]
  std::vector<S> f, i, cand, o;
  std::vector<S> c;       // cell state after the step
  std::vector<S> tanh_c;  // tanh(c)
};

template <class S>
void lstm_cell_step(const LstmCell<S>& cell, const S* x, std::vector<S>& h,
                    std::vector<S>& c, LstmStepCache<S>* cache = nullptr) {
  const int u = cell.units, d = cell.input_dim;
  std::vector<S> z(u + d);
  for (int i = 0; i < u; ++i) z[i] = h[i];
  for (int i = 0; i < d; ++i) z[u + i] = x[i];

  auto affine = [&](const Tensor<S>& w, const Tensor<S>& b, int row) {
    double acc = static_cast<double>(b.data[row]);
    const S* wr = w.data.data() + static_cast<size_t>(row) * (u + d);
    for (int i = 0; i < u + d; ++i) acc += static_cast<double>(wr[i]) * z[i];
    return acc;
  };

  std::vector<S> f(u), in(u), cand(u), o(u), tanh_c(u);
  for (int r = 0; r < u; ++r) {
    f[r] = static_cast<S>(sigmoid_d(affine(cell.w_forget, cell.b_forget, r)));
    in[r] = static_cast<S>(sigmoid_d(affine(cell.w_input, cell.b_input, r)));
    cand[r] = static_cast<S>(std::tanh(affine(cell.w_cand, cell.b_cand, r)));
    o[r] = static_cast<S>(sigmoid_d(affine(cell.w_output, cell.b_output, r)));
  }
  for (int r = 0; r < u; ++r) {
    c[r] = f[r] * c[r] + in[r] * cand[r];
    tanh_c[r] = static_cast<S>(std::tanh(static_cast<double>(c[r])));
    h[r] = o[r] * tanh_c[r];
  }
  if (cache) {
    cache->z = std::move(z);
    cache->f = std::move(f);
    cache->i = std::move(in);
    cache->cand = std::move(cand);
    cache->o = std::move(o);
    cache->c = c;
    cache->tanh_c = std::move(tanh_c);
  }
}

template <class S>
struct GruCell {
  int units = 0;
  int input_dim = 0;
  Tensor<S> w_reset, w_update, w_cand;  // (units, units + input_dim)
  Tensor<S> b_reset, b_update, b_cand;

  GruCell() = default;
  GruCell(int units_, int input_dim_) : units(units_), input_dim(input_dim_) {
    const std::vector<int> wshape{units, units + input_dim};
    w_reset = Tensor<S>(wshape);
    w_update = Tensor<S>(wshape);
    w_cand = Tensor<S>(wshape);
    b_reset = Tensor<S>({units});
    b_update = Tensor<S>({units});
    b_cand = Tensor<S>({units});
  }
};

template <class S>
struct GruStepCache {
  std::vector<S> z;       // [h_{t-1}, x_t]
  std::vector<S> z_cand;  // [reset o h_{t-1}, x_t]
  std::vector<S> h_prev;
  std::vector<S> reset, update, cand;
};

template <class S>
void gru_cell_step(const GruCell<S>& cell, const S* x, std::vector<S>& h,
                   GruStepCache<S>* cache = nullptr) {
  const int u = cell.units, d = cell.input_dim;
  std::vector<S> z(u + d);
  for (int i = 0; i < u; ++i) z[i] = h[i];
  for (int i = 0; i < d; ++i) z[u + i] = x[i];

  auto affine = [&](const Tensor<S>& w, const Tensor<S>& b, int row,
                    const std::vector<S>& v) {
    double acc = static_cast<double>(b.data[row]);
    const S* wr = w.data.data() + static_cast<size_t>(row) * (u + d);
    for (int i = 0; i < u + d; ++i) acc += static_cast<double>(wr[i]) * v[i];
    return acc;
  };

  std::vector<S> reset(u), update(u), cand(u);
  for (int r = 0; r < u; ++r) {
    reset[r] = static_cast<S>(sigmoid_d(affine(cell.w_reset, cell.b_reset, r, z)));
    update[r] = static_cast<S>(sigmoid_d(affine(cell.w_update, cell.b_update, r, z)));
  }
  std::vector<S> z_cand(u + d);
  for (int i = 0; i < u; ++i) z_cand[i] = reset[i] * h[i];
  for (int i = 0; i < d; ++i) z_cand[u + i] = x[i];
  for (int r = 0; r < u; ++r) {
    cand[r] = static_cast<S>(std::tanh(affine(cell.w_cand, cell.b_cand, r, z_cand)));
  }
  std::vector<S> h_prev = h;
  for (int r = 0; r < u; ++r) {
    h[r] = (S(1) - update[r]) * h_prev[r] + update[r] * cand[r];
  }
  if (cache) {
    cache->z = std::move(z);
    cache->z_cand = std::move(z_cand);
    cache->h_prev = std::move(h_prev);
    cache->reset = std::move(reset);
    cache->update = std::move(update);
    cache->cand = std::move(cand);
  }
}

// ---------------------------------------------------------------------------

template <class S>
class Layer {
 public:
  virtual ~Layer() = default;
  virtual LayerKind kind() const = 0;
  virtual std::string name() const = 0;
  virtual Tensor<S> forward(const Tensor<S>& x, Mode mode) = 0;
  virtual Tensor<S> backward(const Tensor<S>& dy) = 0;
  virtual void collect_params(std::vector<Param<S>>&) {}
  virtual void init(Rng&) {}
  // per-optimizer-step seed so dropout masks are reproducible
  virtual void set_step_seed(uint64_t) {}

 protected:
  void require_forward(bool seen) const {
    if (!seen) fail("BackwardBeforeForward", name() + ": backward without a cached forward");
  }
};

namespace detail {

template <class S>
void glorot_uniform(Tensor<S>& w, int fan_in, int fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / (fan_in + fan_out));
  for (auto& v : w.data) v = static_cast<S>(rng.uniform(-limit, limit));
}

template <class S>
void check_finite(const Tensor<S>& t, const std::string& layer) {
  if (!t.all_finite()) fail("NumericError", "non-finite activation leaving " + layer);
}

}  // namespace detail

// Same-padded stride-1 cross-correlation along the length axis.
// x (B, L, C_in) -> y (B, L, filters); kernel layout (k, C_in, filters).
template <class S>
class Conv1D : public Layer<S> {
 public:
  Conv1D(std::string name, int in_channels, int filters, int kernel, int dilation, double l2)
      : name_(std::move(name)),
        in_(in_channels),
        out_(filters),
        k_(kernel),
        d_(dilation),
        l2_(l2),
        w_({kernel, in_channels, filters}),
        b_({filters}) {
    w_.alloc_grad();
    b_.alloc_grad();
    const int span = (k_ - 1) * d_;
    pad_left_ = span / 2;
    pad_right_ = span - pad_left_;
  }

  LayerKind kind() const override { return LayerKind::Conv1D; }
  std::string name() const override { return name_; }

  void init(Rng& rng) override {
    detail::glorot_uniform(w_, k_ * in_, k_ * out_, rng);
    std::fill(b_.data.begin(), b_.data.end(), S(0));
  }

  Tensor<S> forward(const Tensor<S>& x, Mode) override {
    if (x.rank() != 3 || x.dim(2) != in_) {
      fail("ShapeMismatch", name_ + ": expected (B, L, " + std::to_string(in_) + ") input");
    }
    const int B = x.dim(0), L = x.dim(1);
    Tensor<S> y({B, L, out_});
    std::vector<double> acc(out_);
    for (int b = 0; b < B; ++b) {
      for (int t = 0; t < L; ++t) {
        for (int o = 0; o < out_; ++o) acc[o] = static_cast<double>(b_.data[o]);
        for (int j = 0; j < k_; ++j) {
          const int src = t + j * d_ - pad_left_;
          if (src < 0 || src >= L) continue;
          const S* xr = &x.data[(static_cast<size_t>(b) * L + src) * in_];
          const S* wr = &w_.data[static_cast<size_t>(j) * in_ * out_];
          for (int c = 0; c < in_; ++c) {
            const double xv = static_cast<double>(xr[c]);
            const S* wc = wr + static_cast<size_t>(c) * out_;
            for (int o = 0; o < out_; ++o) acc[o] += xv * static_cast<double>(wc[o]);
          }
        }
        S* yr = &y.data[(static_cast<size_t>(b) * L + t) * out_];
        for (int o = 0; o < out_; ++o) yr[o] = static_cast<S>(acc[o]);
      }
    }
    detail::check_finite(y, name_);
    x_ = x;
    has_forward_ = true;
    return y;
  }

  Tensor<S> backward(const Tensor<S>& dy) override {
    this->require_forward(has_forward_);
    const int B = x_.dim(0), L = x_.dim(1);
    Tensor<S> dx({B, L, in_});
    std::vector<double> dw(w_.numel(), 0.0), db(out_, 0.0);
    for (int b = 0; b < B; ++b) {
      for (int t = 0; t < L; ++t) {
        const S* gyr = &dy.data[(static_cast<size_t>(b) * L + t) * out_];
        for (int o = 0; o < out_; ++o) db[o] += static_cast<double>(gyr[o]);
        for (int j = 0; j < k_; ++j) {
          const int src = t + j * d_ - pad_left_;
          if (src < 0 || src >= L) continue;
          const S* xr = &x_.data[(static_cast<size_t>(b) * L + src) * in_];
          S* dxr = &dx.data[(static_cast<size_t>(b) * L + src) * in_];
          double* dwr = dw.data() + static_cast<size_t>(j) * in_ * out_;
          const S* wr = &w_.data[static_cast<size_t>(j) * in_ * out_];
          for (int c = 0; c < in_; ++c) {
            const double xv = static_cast<double>(xr[c]);
            double acc = 0.0;
            double* dwc = dwr + static_cast<size_t>(c) * out_;
            const S* wc = wr + static_cast<size_t>(c) * out_;
            for (int o = 0; o < out_; ++o) {
              const double g = static_cast<double>(gyr[o]);
              dwc[o] += xv * g;
              acc += static_cast<double>(wc[o]) * g;
            }
            dxr[c] += static_cast<S>(acc);
          }
        }
      }
    }
    for (size_t i = 0; i < w_.numel(); ++i) w_.grad[i] += static_cast<S>(dw[i]);
    for (int o = 0; o < out_; ++o) b_.grad[o] += static_cast<S>(db[o]);
    return dx;
  }

  void collect_params(std::vector<Param<S>>& out) override {
    out.push_back({name_ + ".kernel", &w_, l2_ > 0.0, true, l2_});
    out.push_back({name_ + ".bias", &b_, l2_ > 0.0, true, l2_});
  }

 private:
  std::string name_;
  int in_, out_, k_, d_, pad_left_ = 0, pad_right_ = 0;
  double l2_;
  Tensor<S> w_, b_;
  Tensor<S> x_;
  bool has_forward_ = false;
};

// Per-channel batch normalization over batch x length, eps 1e-5,
// moving-average momentum 0.9.
template <class S>
class BatchNorm : public Layer<S> {
 public:
  BatchNorm(std::string name, int channels)
      : name_(std::move(name)),
        c_(channels),
        gamma_({channels}, S(1)),
        beta_({channels}),
        mov_mean_({channels}),
        mov_var_({channels}, S(1)) {
    gamma_.alloc_grad();
    beta_.alloc_grad();
  }

  LayerKind kind() const override { return LayerKind::BatchNorm; }
  std::string name() const override { return name_; }

  Tensor<S> forward(const Tensor<S>& x, Mode mode) override {
    if (x.rank() != 3 || x.dim(2) != c_) {
      fail("ShapeMismatch", name_ + ": expected (B, L, " + std::to_string(c_) + ") input");
    }
    const int B = x.dim(0), L = x.dim(1);
    const auto n = static_cast<double>(B) * L;
    Tensor<S> y(x.shape);

    if (mode == Mode::Train) {
      mean_.assign(c_, 0.0);
      var_.assign(c_, 0.0);
      for (int b = 0; b < B; ++b)
        for (int t = 0; t < L; ++t) {
          const S* xr = &x.data[(static_cast<size_t>(b) * L + t) * c_];
          for (int c = 0; c < c_; ++c) mean_[c] += static_cast<double>(xr[c]);
        }
      for (int c = 0; c < c_; ++c) mean_[c] /= n;
      for (int b = 0; b < B; ++b)
        for (int t = 0; t < L; ++t) {
          const S* xr = &x.data[(static_cast<size_t>(b) * L + t) * c_];
          for (int c = 0; c < c_; ++c) {
            const double d = static_cast<double>(xr[c]) - mean_[c];
            var_[c] += d * d;
          }
        }
      for (int c = 0; c < c_; ++c) var_[c] /= n;  // population variance

      inv_std_.resize(c_);
      for (int c = 0; c < c_; ++c) inv_std_[c] = 1.0 / std::sqrt(var_[c] + kEps);
      xhat_ = Tensor<S>(x.shape);
      for (size_t i = 0; i < x.numel(); ++i) {
        const int c = static_cast<int>(i % c_);
        const double xh = (static_cast<double>(x.data[i]) - mean_[c]) * inv_std_[c];
        xhat_.data[i] = static_cast<S>(xh);
        y.data[i] = static_cast<S>(static_cast<double>(gamma_.data[c]) * xh +
                                   static_cast<double>(beta_.data[c]));
      }
      for (int c = 0; c < c_; ++c) {
        mov_mean_.data[c] =
            static_cast<S>(kMomentum * static_cast<double>(mov_mean_.data[c]) +
                           (1.0 - kMomentum) * mean_[c]);
        mov_var_.data[c] = static_cast<S>(kMomentum * static_cast<double>(mov_var_.data[c]) +
                                          (1.0 - kMomentum) * var_[c]);
      }
      batch_count_ = n;
      has_forward_ = true;
    } else {
      for (size_t i = 0; i < x.numel(); ++i) {
        const int c = static_cast<int>(i % c_);
        const double xh = (static_cast<double>(x.data[i]) - static_cast<double>(mov_mean_.data[c])) /
                          std::sqrt(static_cast<double>(mov_var_.data[c]) + kEps);
        y.data[i] = static_cast<S>(static_cast<double>(gamma_.data[c]) * xh +
                                   static_cast<double>(beta_.data[c]));
      }
    }
    detail::check_finite(y, name_);
    return y;
  }

  Tensor<S> backward(const Tensor<S>& dy) override {
    this->require_forward(has_forward_);
    const double n = batch_count_;
    std::vector<double> dgamma(c_, 0.0), dbeta(c_, 0.0);
    for (size_t i = 0; i < dy.numel(); ++i) {
      const int c = static_cast<int>(i % c_);
      dgamma[c] += static_cast<double>(dy.data[i]) * static_cast<double>(xhat_.data[i]);
      dbeta[c] += static_cast<double>(dy.data[i]);
    }
    Tensor<S> dx(dy.shape);
    for (size_t i = 0; i < dy.numel(); ++i) {
      const int c = static_cast<int>(i % c_);
      const double g = static_cast<double>(gamma_.data[c]) * inv_std_[c];
      dx.data[i] = static_cast<S>(
          g * (static_cast<double>(dy.data[i]) - dbeta[c] / n -
               static_cast<double>(xhat_.data[i]) * dgamma[c] / n));
    }
    for (int c = 0; c < c_; ++c) {
      gamma_.grad[c] += static_cast<S>(dgamma[c]);
      beta_.grad[c] += static_cast<S>(dbeta[c]);
    }
    return dx;
  }

  void collect_params(std::vector<Param<S>>& out) override {
    out.push_back({name_ + ".gamma", &gamma_, false, true, 0.0});
    out.push_back({name_ + ".beta", &beta_, false, true, 0.0});
    out.push_back({name_ + ".moving_mean", &mov_mean_, false, false, 0.0});
    out.push_back({name_ + ".moving_var", &mov_var_, false, false, 0.0});
  }

 private:
  static constexpr double kEps = 1e-5;
  static constexpr double kMomentum = 0.9;
  std::string name_;
  int c_;
  Tensor<S> gamma_, beta_, mov_mean_, mov_var_;
  Tensor<S> xhat_;
  std::vector<double> mean_, var_, inv_std_;
  double batch_count_ = 0;
  bool has_forward_ = false;
};

template <class S>
class ReLU : public Layer<S> {
 public:
  explicit ReLU(std::string name) : name_(std::move(name)) {}
  LayerKind kind() const override { return LayerKind::ReLU; }
  std::string name() const override { return name_; }

  Tensor<S> forward(const Tensor<S>& x, Mode) override {
    Tensor<S> y(x.shape);
    for (size_t i = 0; i < x.numel(); ++i) y.data[i] = x.data[i] > S(0) ? x.data[i] : S(0);
    x_ = x;
    has_forward_ = true;
    return y;
  }

  Tensor<S> backward(const Tensor<S>& dy) override {
    this->require_forward(has_forward_);
    Tensor<S> dx(dy.shape);
    for (size_t i = 0; i < dy.numel(); ++i) {
      dx.data[i] = x_.data[i] > S(0) ? dy.data[i] : S(0);
    }
    return dx;
  }

 private:
  std::string name_;
  Tensor<S> x_;
  bool has_forward_ = false;
};

// Window 2, stride 2, floor truncation (a trailing odd element is dropped).
template <class S>
class MaxPool1D : public Layer<S> {
 public:
  explicit MaxPool1D(std::string name) : name_(std::move(name)) {}
  LayerKind kind() const override { return LayerKind::MaxPool1D; }
  std::string name() const override { return name_; }

  Tensor<S> forward(const Tensor<S>& x, Mode) override {
    if (x.rank() != 3) fail("ShapeMismatch", name_ + ": expected rank-3 input");
    const int B = x.dim(0), L = x.dim(1), C = x.dim(2);
    const int Lo = L / 2;
    if (Lo < 1) fail("ShapeMismatch", name_ + ": length too short to pool");
    Tensor<S> y({B, Lo, C});
    argmax_.assign(y.numel(), 0);
    for (int b = 0; b < B; ++b)
      for (int t = 0; t < Lo; ++t)
        for (int c = 0; c < C; ++c) {
          const size_t i0 = (static_cast<size_t>(b) * L + 2 * t) * C + c;
          const size_t i1 = i0 + C;
          const size_t o = (static_cast<size_t>(b) * Lo + t) * C + c;
          if (x.data[i1] > x.data[i0]) {  // ties route to the first element
            y.data[o] = x.data[i1];
            argmax_[o] = i1;
          } else {
            y.data[o] = x.data[i0];
            argmax_[o] = i0;
          }
        }
    in_shape_ = x.shape;
    in_numel_ = x.numel();
    has_forward_ = true;
    return y;
  }

  Tensor<S> backward(const Tensor<S>& dy) override {
    this->require_forward(has_forward_);
    Tensor<S> dx(in_shape_);
    for (size_t o = 0; o < dy.numel(); ++o) dx.data[argmax_[o]] += dy.data[o];
    return dx;
  }

 private:
  std::string name_;
  std::vector<size_t> argmax_;
  std::vector<int> in_shape_;
  size_t in_numel_ = 0;
  bool has_forward_ = false;
};

// Inverted dropout: train mode zeroes with probability rate and scales
// survivors by 1/(1-rate); infer mode is the identity. The mask is a pure
// function of (step seed, layer id) so a fixed seed gives a fixed mask.
template <class S>
class Dropout : public Layer<S> {
 public:
  Dropout(std::string name, double rate, uint64_t layer_id)
      : name_(std::move(name)), rate_(rate), layer_id_(layer_id) {}
  LayerKind kind() const override { return LayerKind::Dropout; }
  std::string name() const override { return name_; }
  void set_step_seed(uint64_t s) override { step_seed_ = s; }

  Tensor<S> forward(const Tensor<S>& x, Mode mode) override {
    if (mode == Mode::Infer || rate_ <= 0.0) {
      identity_ = true;
      has_forward_ = true;
      return x;
    }
    identity_ = false;
    const S keep_scale = static_cast<S>(1.0 / (1.0 - rate_));
    Rng rng(mix_seed(step_seed_, layer_id_));
    scale_.assign(x.numel(), S(0));
    Tensor<S> y(x.shape);
    for (size_t i = 0; i < x.numel(); ++i) {
      if (rng.uniform() >= rate_) {
        scale_[i] = keep_scale;
        y.data[i] = x.data[i] * keep_scale;
      }
    }
    has_forward_ = true;
    return y;
  }

  Tensor<S> backward(const Tensor<S>& dy) override {
    this->require_forward(has_forward_);
    if (identity_) return dy;
    Tensor<S> dx(dy.shape);
    for (size_t i = 0; i < dy.numel(); ++i) dx.data[i] = dy.data[i] * scale_[i];
    return dx;
  }

 private:
  std::string name_;
  double rate_;
  uint64_t layer_id_;
  uint64_t step_seed_ = 0;
  std::vector<S> scale_;
  bool identity_ = true;
  bool has_forward_ = false;
};

template <class S>
class Flatten : public Layer<S> {
 public:
  explicit Flatten(std::string name) : name_(std::move(name)) {}
  LayerKind kind() const override { return LayerKind::Flatten; }
  std::string name() const override { return name_; }

  Tensor<S> forward(const Tensor<S>& x, Mode) override {
    in_shape_ = x.shape;
    has_forward_ = true;
    if (x.rank() == 2) return x;  // already flat
    Tensor<S> y({x.dim(0), static_cast<int>(x.numel()) / x.dim(0)});
    y.data = x.data;
    return y;
  }

  Tensor<S> backward(const Tensor<S>& dy) override {
    this->require_forward(has_forward_);
    Tensor<S> dx(in_shape_);
    dx.data = dy.data;
    return dx;
  }

 private:
  std::string name_;
  std::vector<int> in_shape_;
  bool has_forward_ = false;
};

// y = x W + b with W (in, units).
template <class S>
class Dense : public Layer<S> {
 public:
  Dense(std::string name, int in, int units, double l2)
      : name_(std::move(name)), in_(in), units_(units), l2_(l2), w_({in, units}), b_({units}) {
    w_.alloc_grad();
    b_.alloc_grad();
  }

  LayerKind kind() const override { return LayerKind::Dense; }
  std::string name() const override { return name_; }

  void init(Rng& rng) override {
    detail::glorot_uniform(w_, in_, units_, rng);
    std::fill(b_.data.begin(), b_.data.end(), S(0));
  }

  Tensor<S> forward(const Tensor<S>& x, Mode) override {
    if (x.rank() != 2 || x.dim(1) != in_) {
      fail("ShapeMismatch", name_ + ": expected (B, " + std::to_string(in_) + ") input");
    }
    const int B = x.dim(0);
    Tensor<S> y({B, units_});
    for (int b = 0; b < B; ++b) {
      for (int u = 0; u < units_; ++u) {
        double acc = static_cast<double>(b_.data[u]);
        for (int i = 0; i < in_; ++i) {
          acc += static_cast<double>(x.at(b, i)) * static_cast<double>(w_.at(i, u));
        }
        y.at(b, u) = static_cast<S>(acc);
      }
    }
    detail::check_finite(y, name_);
    x_ = x;
    has_forward_ = true;
    return y;
  }

  Tensor<S> backward(const Tensor<S>& dy) override {
    this->require_forward(has_forward_);
    const int B = x_.dim(0);
    Tensor<S> dx({B, in_});
    std::vector<double> dw(w_.numel(), 0.0), db(units_, 0.0);
    for (int b = 0; b < B; ++b) {
      for (int u = 0; u < units_; ++u) {
        const double g = static_cast<double>(dy.at(b, u));
        db[u] += g;
        for (int i = 0; i < in_; ++i) {
          dw[static_cast<size_t>(i) * units_ + u] += static_cast<double>(x_.at(b, i)) * g;
        }
      }
      for (int i = 0; i < in_; ++i) {
        double acc = 0.0;
        for (int u = 0; u < units_; ++u) {
          acc += static_cast<double>(w_.at(i, u)) * static_cast<double>(dy.at(b, u));
        }
        dx.at(b, i) = static_cast<S>(acc);
      }
    }
    for (size_t i = 0; i < w_.numel(); ++i) w_.grad[i] += static_cast<S>(dw[i]);
    for (int u = 0; u < units_; ++u) b_.grad[u] += static_cast<S>(db[u]);
    return dx;
  }

  void collect_params(std::vector<Param<S>>& out) override {
    out.push_back({name_ + ".kernel", &w_, l2_ > 0.0, true, l2_});
    out.push_back({name_ + ".bias", &b_, l2_ > 0.0, true, l2_});
  }

 private:
  std::string name_;
  int in_, units_;
  double l2_;
  Tensor<S> w_, b_;
  Tensor<S> x_;
  bool has_forward_ = false;
};

// Iterates the cell over the length axis and returns the last timestep's
// hidden vector; backward runs truncated-nowhere BPTT over all timesteps.
template <class S>
class Lstm : public Layer<S> {
 public:
  Lstm(std::string name, int input_dim, int units)
      : name_(std::move(name)), cell_(units, input_dim) {
    for (Tensor<S>* t : weight_slots()) t->alloc_grad();
  }

  LayerKind kind() const override { return LayerKind::Lstm; }
  std::string name() const override { return name_; }

  void init(Rng& rng) override {
    const int fan_in = cell_.units + cell_.input_dim;
    for (Tensor<S>* w : {&cell_.w_forget, &cell_.w_input, &cell_.w_cand, &cell_.w_output}) {
      detail::glorot_uniform(*w, fan_in, cell_.units, rng);
    }
  }

  Tensor<S> forward(const Tensor<S>& x, Mode) override {
    if (x.rank() != 3 || x.dim(2) != cell_.input_dim) {
      fail("ShapeMismatch", name_ + ": expected (B, L, " +
                                std::to_string(cell_.input_dim) + ") input");
    }
    const int B = x.dim(0), L = x.dim(1), U = cell_.units;
    x_ = x;
    caches_.assign(B, std::vector<LstmStepCache<S>>(L));
    Tensor<S> y({B, U});
    for (int b = 0; b < B; ++b) {
      std::vector<S> h(U, S(0)), c(U, S(0));
      for (int t = 0; t < L; ++t) {
        lstm_cell_step(cell_, &x.at(b, t, 0), h, c, &caches_[b][t]);
      }
      for (int u = 0; u < U; ++u) y.at(b, u) = h[u];
    }
    detail::check_finite(y, name_);
    has_forward_ = true;
    return y;
  }

  Tensor<S> backward(const Tensor<S>& dy) override {
    this->require_forward(has_forward_);
    const int B = x_.dim(0), L = x_.dim(1), U = cell_.units, D = cell_.input_dim;
    Tensor<S> dx({B, L, D});
    // double scratch for the weight reductions
    std::vector<std::vector<double>> dw(4, std::vector<double>(cell_.w_forget.numel(), 0.0));
    std::vector<std::vector<double>> db(4, std::vector<double>(U, 0.0));

    for (int b = 0; b < B; ++b) {
      std::vector<double> dh(U), dc(U, 0.0);
      for (int u = 0; u < U; ++u) dh[u] = static_cast<double>(dy.at(b, u));
      for (int t = L - 1; t >= 0; --t) {
        const auto& cc = caches_[b][t];
        std::vector<double> da_f(U), da_i(U), da_c(U), da_o(U);
        std::vector<double> dz(U + D, 0.0);
        for (int u = 0; u < U; ++u) {
          const double tanh_c = static_cast<double>(cc.tanh_c[u]);
          const double o = static_cast<double>(cc.o[u]);
          const double d_o = dh[u] * tanh_c;
          double d_c = dc[u] + dh[u] * o * (1.0 - tanh_c * tanh_c);
          const double f = static_cast<double>(cc.f[u]);
          const double i = static_cast<double>(cc.i[u]);
          const double cand = static_cast<double>(cc.cand[u]);
          const double c_prev =
              t > 0 ? static_cast<double>(caches_[b][t - 1].c[u]) : 0.0;
          const double d_f = d_c * c_prev;
          const double d_i = d_c * cand;
          const double d_cand = d_c * i;
          da_f[u] = d_f * f * (1.0 - f);
          da_i[u] = d_i * i * (1.0 - i);
          da_c[u] = d_cand * (1.0 - cand * cand);
          da_o[u] = d_o * o * (1.0 - o);
          dc[u] = d_c * f;
        }
        const Tensor<S>* ws[4] = {&cell_.w_forget, &cell_.w_input, &cell_.w_cand,
                                  &cell_.w_output};
        const std::vector<double>* das[4] = {&da_f, &da_i, &da_c, &da_o};
        for (int g = 0; g < 4; ++g) {
          for (int u = 0; u < U; ++u) {
            const double da = (*das[g])[u];
            db[g][u] += da;
            const S* wr = ws[g]->data.data() + static_cast<size_t>(u) * (U + D);
            double* dwr = dw[g].data() + static_cast<size_t>(u) * (U + D);
            for (int i = 0; i < U + D; ++i) {
              dz[i] += static_cast<double>(wr[i]) * da;
              dwr[i] += static_cast<double>(cc.z[i]) * da;
            }
          }
        }
        for (int u = 0; u < U; ++u) dh[u] = dz[u];
        for (int i = 0; i < D; ++i) dx.at(b, t, i) = static_cast<S>(dz[U + i]);
      }
    }

    Tensor<S>* ws[4] = {&cell_.w_forget, &cell_.w_input, &cell_.w_cand, &cell_.w_output};
    Tensor<S>* bs[4] = {&cell_.b_forget, &cell_.b_input, &cell_.b_cand, &cell_.b_output};
    for (int g = 0; g < 4; ++g) {
      for (size_t i = 0; i < ws[g]->numel(); ++i) ws[g]->grad[i] += static_cast<S>(dw[g][i]);
      for (int u = 0; u < U; ++u) bs[g]->grad[u] += static_cast<S>(db[g][u]);
    }
    return dx;
  }

  void collect_params(std::vector<Param<S>>& out) override {
    out.push_back({name_ + ".w_forget", &cell_.w_forget, false, true, 0.0});
    out.push_back({name_ + ".w_input", &cell_.w_input, false, true, 0.0});
    out.push_back({name_ + ".w_cand", &cell_.w_cand, false, true, 0.0});
    out.push_back({name_ + ".w_output", &cell_.w_output, false, true, 0.0});
    out.push_back({name_ + ".b_forget", &cell_.b_forget, false, true, 0.0});
    out.push_back({name_ + ".b_input", &cell_.b_input, false, true, 0.0});
    out.push_back({name_ + ".b_cand", &cell_.b_cand, false, true, 0.0});
    out.push_back({name_ + ".b_output", &cell_.b_output, false, true, 0.0});
  }

 private:
  std::vector<Tensor<S>*> weight_slots() {
    return {&cell_.w_forget, &cell_.w_input, &cell_.w_cand, &cell_.w_output,
            &cell_.b_forget, &cell_.b_input, &cell_.b_cand, &cell_.b_output};
  }

  std::string name_;
  LstmCell<S> cell_;
  Tensor<S> x_;
  std::vector<std::vector<LstmStepCache<S>>> caches_;
  bool has_forward_ = false;
};

template <class S>
class Gru : public Layer<S> {
 public:
  Gru(std::string name, int input_dim, int units)
      : name_(std::move(name)), cell_(units, input_dim) {
    for (Tensor<S>* t : {&cell_.w_reset, &cell_.w_update, &cell_.w_cand, &cell_.b_reset,
                         &cell_.b_update, &cell_.b_cand}) {
      t->alloc_grad();
    }
  }

  LayerKind kind() const override { return LayerKind::Gru; }
  std::string name() const override { return name_; }

  void init(Rng& rng) override {
    const int fan_in = cell_.units + cell_.input_dim;
    for (Tensor<S>* w : {&cell_.w_reset, &cell_.w_update, &cell_.w_cand}) {
      detail::glorot_uniform(*w, fan_in, cell_.units, rng);
    }
  }

  Tensor<S> forward(const Tensor<S>& x, Mode) override {
    if (x.rank() != 3 || x.dim(2) != cell_.input_dim) {
      fail("ShapeMismatch", name_ + ": expected (B, L, " +
                                std::to_string(cell_.input_dim) + ") input");
    }
    const int B = x.dim(0), L = x.dim(1), U = cell_.units;
    x_ = x;
    caches_.assign(B, std::vector<GruStepCache<S>>(L));
    Tensor<S> y({B, U});
    for (int b = 0; b < B; ++b) {
      std::vector<S> h(U, S(0));
      for (int t = 0; t < L; ++t) gru_cell_step(cell_, &x.at(b, t, 0), h, &caches_[b][t]);
      for (int u = 0; u < U; ++u) y.at(b, u) = h[u];
    }
    detail::check_finite(y, name_);
    has_forward_ = true;
    return y;
  }

  Tensor<S> backward(const Tensor<S>& dy) override {
    this->require_forward(has_forward_);
    const int B = x_.dim(0), L = x_.dim(1), U = cell_.units, D = cell_.input_dim;
    Tensor<S> dx({B, L, D});
    std::vector<double> dw_r(cell_.w_reset.numel(), 0.0), dw_u(cell_.w_reset.numel(), 0.0),
        dw_c(cell_.w_reset.numel(), 0.0);
    std::vector<double> db_r(U, 0.0), db_u(U, 0.0), db_c(U, 0.0);

    for (int b = 0; b < B; ++b) {
      std::vector<double> dh(U);
      for (int u = 0; u < U; ++u) dh[u] = static_cast<double>(dy.at(b, u));
      for (int t = L - 1; t >= 0; --t) {
        const auto& cc = caches_[b][t];
        std::vector<double> dh_prev(U, 0.0), da_r(U), da_u(U), da_c(U);
        std::vector<double> dz(U + D, 0.0), dz_cand(U + D, 0.0);
        for (int u = 0; u < U; ++u) {
          const double upd = static_cast<double>(cc.update[u]);
          const double cand = static_cast<double>(cc.cand[u]);
          const double h_prev = static_cast<double>(cc.h_prev[u]);
          const double d_u = dh[u] * (cand - h_prev);
          const double d_cand = dh[u] * upd;
          dh_prev[u] += dh[u] * (1.0 - upd);
          da_u[u] = d_u * upd * (1.0 - upd);
          da_c[u] = d_cand * (1.0 - cand * cand);
        }
        for (int u = 0; u < U; ++u) {
          const double da = da_c[u];
          db_c[u] += da;
          const S* wr = cell_.w_cand.data.data() + static_cast<size_t>(u) * (U + D);
          double* dwr = dw_c.data() + static_cast<size_t>(u) * (U + D);
          for (int i = 0; i < U + D; ++i) {
            dz_cand[i] += static_cast<double>(wr[i]) * da;
            dwr[i] += static_cast<double>(cc.z_cand[i]) * da;
          }
        }
        for (int u = 0; u < U; ++u) {
          const double reset = static_cast<double>(cc.reset[u]);
          const double h_prev = static_cast<double>(cc.h_prev[u]);
          const double d_rh = dz_cand[u];  // gradient into reset o h_prev
          const double d_r = d_rh * h_prev;
          dh_prev[u] += d_rh * reset;
          da_r[u] = d_r * reset * (1.0 - reset);
        }
        for (int u = 0; u < U; ++u) {
          db_r[u] += da_r[u];
          db_u[u] += da_u[u];
          const S* wr = cell_.w_reset.data.data() + static_cast<size_t>(u) * (U + D);
          const S* wu = cell_.w_update.data.data() + static_cast<size_t>(u) * (U + D);
          double* dwr = dw_r.data() + static_cast<size_t>(u) * (U + D);
          double* dwu = dw_u.data() + static_cast<size_t>(u) * (U + D);
          for (int i = 0; i < U + D; ++i) {
            dz[i] += static_cast<double>(wr[i]) * da_r[u] +
                     static_cast<double>(wu[i]) * da_u[u];
            dwr[i] += static_cast<double>(cc.z[i]) * da_r[u];
            dwu[i] += static_cast<double>(cc.z[i]) * da_u[u];
          }
        }
        for (int u = 0; u < U; ++u) dh[u] = dh_prev[u] + dz[u];
        for (int i = 0; i < D; ++i) {
          dx.at(b, t, i) = static_cast<S>(dz[U + i] + dz_cand[U + i]);
        }
      }
    }
    for (size_t i = 0; i < cell_.w_reset.numel(); ++i) {
      cell_.w_reset.grad[i] += static_cast<S>(dw_r[i]);
      cell_.w_update.grad[i] += static_cast<S>(dw_u[i]);
      cell_.w_cand.grad[i] += static_cast<S>(dw_c[i]);
    }
    for (int u = 0; u < U; ++u) {
      cell_.b_reset.grad[u] += static_cast<S>(db_r[u]);
      cell_.b_update.grad[u] += static_cast<S>(db_u[u]);
      cell_.b_cand.grad[u] += static_cast<S>(db_c[u]);
    }
    return dx;
  }

  void collect_params(std::vector<Param<S>>& out) override {
    out.push_back({name_ + ".w_reset", &cell_.w_reset, false, true, 0.0});
    out.push_back({name_ + ".w_update", &cell_.w_update, false, true, 0.0});
    out.push_back({name_ + ".w_cand", &cell_.w_cand, false, true, 0.0});
    out.push_back({name_ + ".b_reset", &cell_.b_reset, false, true, 0.0});
    out.push_back({name_ + ".b_update", &cell_.b_update, false, true, 0.0});
    out.push_back({name_ + ".b_cand", &cell_.b_cand, false, true, 0.0});
  }

 private:
  std::string name_;
  GruCell<S> cell_;
  Tensor<S> x_;
  std::vector<std::vector<GruStepCache<S>>> caches_;
  bool has_forward_ = false;
};

// Row-wise softmax with max subtraction.
template <class S>
class Softmax : public Layer<S> {
 public:
  explicit Softmax(std::string name) : name_(std::move(name)) {}
  LayerKind kind() const override { return LayerKind::Softmax; }
  std::string name() const override { return name_; }

  Tensor<S> forward(const Tensor<S>& x, Mode) override {
    if (x.rank() != 2) fail("ShapeMismatch", name_ + ": expected rank-2 input");
    const int B = x.dim(0), K = x.dim(1);
    Tensor<S> y({B, K});
    for (int b = 0; b < B; ++b) {
      double mx = -1e300;
      for (int k = 0; k < K; ++k) mx = std::max(mx, static_cast<double>(x.at(b, k)));
      double sum = 0.0;
      for (int k = 0; k < K; ++k) sum += std::exp(static_cast<double>(x.at(b, k)) - mx);
      for (int k = 0; k < K; ++k) {
        y.at(b, k) = static_cast<S>(std::exp(static_cast<double>(x.at(b, k)) - mx) / sum);
      }
    }
    detail::check_finite(y, name_);
    probs_ = y;
    has_forward_ = true;
    return y;
  }

  Tensor<S> backward(const Tensor<S>& dy) override {
    this->require_forward(has_forward_);
    const int B = probs_.dim(0), K = probs_.dim(1);
    Tensor<S> dx({B, K});
    for (int b = 0; b < B; ++b) {
      double dot = 0.0;
      for (int k = 0; k < K; ++k) {
        dot += static_cast<double>(dy.at(b, k)) * static_cast<double>(probs_.at(b, k));
      }
      for (int k = 0; k < K; ++k) {
        dx.at(b, k) = static_cast<S>(static_cast<double>(probs_.at(b, k)) *
                                     (static_cast<double>(dy.at(b, k)) - dot));
      }
    }
    return dx;
  }

 private:
  std::string name_;
  Tensor<S> probs_;
  bool has_forward_ = false;
};

}  // namespace ser::nn
