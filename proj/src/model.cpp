#include "ser/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "ser/error.hpp"
#include "ser/nn/adam.hpp"
#include "ser/nn/loss.hpp"
#include "ser/rng.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace ser {

namespace {

int scaled(int width, double scale) {
  return std::max(1, static_cast<int>(std::lround(width * scale)));
}

nn::LayerSpec conv(int filters, double l2, int dilation) {
  nn::LayerSpec s;
  s.kind = nn::LayerKind::Conv1D;
  s.filters = filters;
  s.kernel = 8;
  s.dilation = dilation;
  s.l2 = l2;
  return s;
}

nn::LayerSpec plain(nn::LayerKind kind) {
  nn::LayerSpec s;
  s.kind = kind;
  return s;
}

nn::LayerSpec dropout(double rate) {
  nn::LayerSpec s;
  s.kind = nn::LayerKind::Dropout;
  s.rate = rate;
  return s;
}

nn::LayerSpec dense(int units, double l2) {
  nn::LayerSpec s;
  s.kind = nn::LayerKind::Dense;
  s.units = units;
  s.l2 = l2;
  return s;
}

nn::LayerSpec recurrent(nn::LayerKind kind, int units) {
  nn::LayerSpec s;
  s.kind = kind;
  s.units = units;
  return s;
}

}  // namespace

ModelSpec build(char id, int num_classes, const BuildOptions& opts) {
  if (id != 'A' && id != 'B' && id != 'C') fail("BadArgs", "model id must be A, B or C");
  if (num_classes < 2) fail("BadArgs", "need at least 2 classes");

  const double drop25 = opts.dropout ? 0.25 : 0.0;
  const double drop50 = opts.dropout ? 0.5 : 0.0;
  auto f = [&](int w) { return scaled(w, opts.width_scale); };

  ModelSpec spec;
  spec.id = id;
  spec.num_classes = num_classes;
  spec.input_dim = kFeatureDim;
  auto& L = spec.layers;

  // Block 1 carries two convolutions; the first is normalized before the
  // activation, the second activates first and pools after normalization.
  L.push_back(conv(f(256), opts.l2, opts.dilation));
  L.push_back(plain(nn::LayerKind::BatchNorm));
  L.push_back(plain(nn::LayerKind::ReLU));
  L.push_back(conv(f(256), opts.l2, opts.dilation));
  L.push_back(plain(nn::LayerKind::ReLU));
  L.push_back(dropout(drop25));
  L.push_back(plain(nn::LayerKind::BatchNorm));
  L.push_back(plain(nn::LayerKind::MaxPool1D));

  for (int filters : {256, 128, 128, 128, 256, 64}) {
    L.push_back(conv(f(filters), opts.l2, opts.dilation));
    L.push_back(plain(nn::LayerKind::BatchNorm));
    L.push_back(plain(nn::LayerKind::ReLU));
    L.push_back(dropout(drop25));
    L.push_back(plain(nn::LayerKind::MaxPool1D));
  }

  if (id == 'B') {
    L.push_back(recurrent(nn::LayerKind::Lstm, f(512)));
    L.push_back(dropout(drop50));
  } else if (id == 'C') {
    L.push_back(recurrent(nn::LayerKind::Gru, f(512)));
    L.push_back(dropout(drop50));
  }

  L.push_back(plain(nn::LayerKind::Flatten));
  L.push_back(dropout(drop50));
  L.push_back(dense(f(128), opts.l2));
  L.push_back(plain(nn::LayerKind::ReLU));
  L.push_back(dropout(drop50));
  L.push_back(dense(f(64), opts.l2));
  L.push_back(plain(nn::LayerKind::ReLU));
  L.push_back(dropout(drop50));
  L.push_back(dense(num_classes, opts.l2));
  L.push_back(plain(nn::LayerKind::Softmax));
  return spec;
}

namespace {

using Net = nn::Network<float>;

Net make_network(const ModelSpec& spec, uint64_t seed) {
  return Net(spec.layers, spec.input_dim, 1, seed);
}

nn::Tensor<float> to_batch(const std::vector<std::vector<double>>& x,
                           const std::vector<int>& idx, int input_dim) {
  nn::Tensor<float> t({static_cast<int>(idx.size()), input_dim, 1});
  for (size_t b = 0; b < idx.size(); ++b) {
    const auto& row = x[idx[b]];
    if (static_cast<int>(row.size()) != input_dim) {
      fail("ShapeMismatch", "feature vector of length " + std::to_string(row.size()) +
                                ", expected " + std::to_string(input_dim));
    }
    for (int i = 0; i < input_dim; ++i) {
      t.data[b * static_cast<size_t>(input_dim) + i] = static_cast<float>(row[i]);
    }
  }
  return t;
}

std::vector<float> snapshot_weights(std::vector<nn::Param<float>>& params) {
  std::vector<float> out;
  for (auto& p : params) {
    out.insert(out.end(), p.tensor->data.begin(), p.tensor->data.end());
  }
  return out;
}

void restore_weights(std::vector<nn::Param<float>>& params, const std::vector<float>& blob) {
  size_t off = 0;
  for (auto& p : params) {
    if (off + p.tensor->numel() > blob.size()) {
      fail("BlobLength", "weight blob shorter than the parameter tally");
    }
    std::copy(blob.begin() + off, blob.begin() + off + p.tensor->numel(),
              p.tensor->data.begin());
    off += p.tensor->numel();
  }
  if (off != blob.size()) {
    fail("BlobLength", "weight blob of " + std::to_string(blob.size()) +
                           " floats, expected " + std::to_string(off));
  }
}

struct EvalOut {
  double loss = 0;
  double acc = 0;
};

EvalOut evaluate_pass(Net& net, std::vector<nn::Param<float>>& params,
                      const std::vector<std::vector<double>>& x, const std::vector<int>& y,
                      int input_dim, int batch) {
  EvalOut out;
  if (x.empty()) return out;
  double loss_sum = 0.0;
  int correct = 0;
  for (size_t start = 0; start < x.size(); start += batch) {
    std::vector<int> idx;
    for (size_t i = start; i < std::min(x.size(), start + batch); ++i) {
      idx.push_back(static_cast<int>(i));
    }
    const auto probs = net.forward(to_batch(x, idx, input_dim), nn::Mode::Infer);
    std::vector<int> labels(idx.size());
    for (size_t i = 0; i < idx.size(); ++i) labels[i] = y[idx[i]];
    loss_sum += nn::cross_entropy(probs, labels) * idx.size();
    for (size_t i = 0; i < idx.size(); ++i) {
      int arg = 0;
      for (int k = 1; k < probs.dim(1); ++k) {
        if (probs.at(static_cast<int>(i), k) > probs.at(static_cast<int>(i), arg)) arg = k;
      }
      if (arg == labels[i]) ++correct;
    }
  }
  out.loss = loss_sum / x.size() + nn::l2_penalty(params);
  out.acc = static_cast<double>(correct) / x.size();
  return out;
}

}  // namespace

Checkpoint fit(const ModelSpec& spec, const std::vector<std::vector<double>>& train_x,
               const std::vector<int>& train_y, const std::vector<std::vector<double>>& val_x,
               const std::vector<int>& val_y, const FitConfig& cfg, const Normalizer& norm,
               const LabelMap& labels, History* history) {
  if (train_x.size() != train_y.size() || val_x.size() != val_y.size()) {
    fail("ShapeMismatch", "feature/label count mismatch");
  }
  for (int y : train_y) {
    if (y < 0 || y >= spec.num_classes) fail("BadArgs", "train label out of range");
  }
  for (int y : val_y) {
    if (y < 0 || y >= spec.num_classes) fail("BadArgs", "val label out of range");
  }

  Net net = make_network(spec, cfg.seed);
  auto params = net.params();
  nn::Adam<float> adam(cfg.lr);

  std::vector<float> best_weights = snapshot_weights(params);
  double best_val_acc = -1.0;
  uint64_t global_step = 0;

  std::vector<int> order(train_x.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    Rng shuffle_rng(mix_seed(cfg.seed, 0x7000 + static_cast<uint64_t>(epoch)));
    shuffle_rng.shuffle(order);

    double loss_sum = 0.0;
    int correct = 0;
    for (size_t start = 0; start < order.size(); start += cfg.batch) {
      std::vector<int> idx(order.begin() + start,
                           order.begin() + std::min(order.size(), start + cfg.batch));
      std::vector<int> y(idx.size());
      for (size_t i = 0; i < idx.size(); ++i) y[i] = train_y[idx[i]];

      net.set_step_seed(mix_seed(cfg.seed, 0x9000 + global_step));
      net.zero_grads();
      const auto probs = net.forward(to_batch(train_x, idx, spec.input_dim), nn::Mode::Train);
      const double ce = nn::cross_entropy(probs, y);
      loss_sum += (ce + nn::l2_penalty(params)) * idx.size();
      for (size_t i = 0; i < idx.size(); ++i) {
        int arg = 0;
        for (int k = 1; k < probs.dim(1); ++k) {
          if (probs.at(static_cast<int>(i), k) > probs.at(static_cast<int>(i), arg)) arg = k;
        }
        if (arg == y[i]) ++correct;
      }
      net.backward(nn::cross_entropy_grad(probs, y));
      nn::add_l2_gradients(params);
      adam.step(params);
      ++global_step;
    }

    EpochStats st;
    st.epoch = epoch;
    st.train_loss = loss_sum / train_x.size();
    st.train_acc = static_cast<double>(correct) / train_x.size();
    const EvalOut val = evaluate_pass(net, params, val_x, val_y, spec.input_dim, cfg.batch);
    st.val_loss = val.loss;
    st.val_acc = val.acc;
    if (history) history->epochs.push_back(st);

    if (!val_x.empty()) {
      if (val.acc > best_val_acc) {
        best_val_acc = val.acc;
        best_weights = snapshot_weights(params);
      }
    } else {
      best_weights = snapshot_weights(params);
    }
  }

  Checkpoint ck;
  ck.spec = spec;
  ck.labels = labels;
  ck.normalizer = norm;
  ck.seed = cfg.seed;
  ck.weights = std::move(best_weights);
  return ck;
}

std::vector<std::vector<float>> predict_batch(const Checkpoint& ck,
                                              const std::vector<std::vector<double>>& raw) {
  Net net = make_network(ck.spec, 0);
  auto params = net.params();
  restore_weights(params, ck.weights);

  std::vector<std::vector<float>> out;
  out.reserve(raw.size());
  constexpr size_t kChunk = 64;
  std::vector<std::vector<double>> normed;
  for (size_t start = 0; start < raw.size(); start += kChunk) {
    const size_t end = std::min(raw.size(), start + kChunk);
    normed.clear();
    for (size_t i = start; i < end; ++i) {
      if (raw[i].size() != ck.normalizer.mean.size()) {
        fail("ShapeMismatch", "feature vector of length " + std::to_string(raw[i].size()) +
                                  ", expected " + std::to_string(ck.normalizer.mean.size()));
      }
      normed.push_back(apply(ck.normalizer, raw[i]));
    }
    std::vector<int> idx(normed.size());
    for (size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<int>(i);
    const auto probs = net.forward(to_batch(normed, idx, ck.spec.input_dim), nn::Mode::Infer);
    for (int b = 0; b < probs.dim(0); ++b) {
      std::vector<float> row(probs.dim(1));
      for (int k = 0; k < probs.dim(1); ++k) row[k] = probs.at(b, k);
      out.push_back(std::move(row));
    }
  }
  return out;
}

std::vector<float> predict(const Checkpoint& ck, const std::vector<double>& raw_vector) {
  return predict_batch(ck, {raw_vector})[0];
}

size_t checkpoint_param_count(const ModelSpec& spec) {
  Net net = make_network(spec, 0);
  return net.param_count();
}

// --- persistence -----------------------------------------------------------

namespace {

json layer_to_json(const nn::LayerSpec& s) {
  json j;
  j["kind"] = nn::layer_kind_name(s.kind);
  switch (s.kind) {
    case nn::LayerKind::Conv1D:
      j["filters"] = s.filters;
      j["kernel"] = s.kernel;
      j["dilation"] = s.dilation;
      j["l2"] = s.l2;
      break;
    case nn::LayerKind::Dense:
      j["units"] = s.units;
      j["l2"] = s.l2;
      break;
    case nn::LayerKind::Lstm:
    case nn::LayerKind::Gru:
      j["units"] = s.units;
      break;
    case nn::LayerKind::Dropout:
      j["rate"] = s.rate;
      break;
    default: break;
  }
  return j;
}

nn::LayerSpec layer_from_json(const json& j) {
  nn::LayerSpec s;
  s.kind = nn::parse_layer_kind(j.at("kind").get<std::string>());
  s.filters = j.value("filters", 0);
  s.kernel = j.value("kernel", 8);
  s.dilation = j.value("dilation", 1);
  s.units = j.value("units", 0);
  s.rate = j.value("rate", 0.0);
  s.l2 = j.value("l2", 0.0);
  return s;
}

}  // namespace

void write_history_csv(const History& h, const std::string& path) {
  std::ofstream out(path);
  if (!out) fail("UnwritablePath", "cannot write " + path);
  out << "epoch,train_loss,train_acc,val_loss,val_acc\n";
  char buf[160];
  for (const auto& e : h.epochs) {
    std::snprintf(buf, sizeof buf, "%d,%.9g,%.9g,%.9g,%.9g\n", e.epoch, e.train_loss,
                  e.train_acc, e.val_loss, e.val_acc);
    out << buf;
  }
}

void save(const Checkpoint& ck, const std::string& dir) {
  fs::create_directories(dir);

  json j;
  j["format_version"] = ck.format_version;
  json model;
  model["id"] = std::string(1, ck.spec.id);
  model["num_classes"] = ck.spec.num_classes;
  model["input_dim"] = ck.spec.input_dim;
  json layers = json::array();
  for (const auto& l : ck.spec.layers) layers.push_back(layer_to_json(l));
  model["layers"] = layers;
  j["model"] = model;
  j["labels"] = ck.labels.names;
  j["normalizer"] = {{"mean", ck.normalizer.mean}, {"std", ck.normalizer.std}};
  j["seed"] = ck.seed;
  j["param_count"] = ck.weights.size();

  std::ofstream mf(fs::path(dir) / "manifest.json");
  if (!mf) fail("UnwritablePath", "cannot write manifest in " + dir);
  mf << j.dump(2) << "\n";

  std::ofstream wf(fs::path(dir) / "weights.bin", std::ios::binary);
  if (!wf) fail("UnwritablePath", "cannot write weights in " + dir);
  wf.write(reinterpret_cast<const char*>(ck.weights.data()),
           static_cast<std::streamsize>(ck.weights.size() * sizeof(float)));
}

Checkpoint load(const std::string& dir) {
  std::ifstream mf(fs::path(dir) / "manifest.json");
  if (!mf) fail("MissingFile", "no manifest.json in " + dir);
  json j;
  try {
    mf >> j;
  } catch (const std::exception& e) {
    fail("MalformedManifest", std::string("manifest.json: ") + e.what());
  }

  Checkpoint ck;
  ck.format_version = j.value("format_version", -1);
  if (ck.format_version != 1) {
    fail("VersionMismatch",
         "checkpoint format " + std::to_string(ck.format_version) + ", expected 1");
  }
  const auto& model = j.at("model");
  const std::string id = model.at("id").get<std::string>();
  ck.spec.id = id.empty() ? '?' : id[0];
  ck.spec.num_classes = model.at("num_classes").get<int>();
  ck.spec.input_dim = model.at("input_dim").get<int>();
  for (const auto& lj : model.at("layers")) ck.spec.layers.push_back(layer_from_json(lj));
  ck.labels.names = j.at("labels").get<std::vector<std::string>>();
  ck.normalizer.mean = j.at("normalizer").at("mean").get<std::vector<double>>();
  ck.normalizer.std = j.at("normalizer").at("std").get<std::vector<double>>();
  ck.seed = j.value("seed", 0ULL);

  std::ifstream wf(fs::path(dir) / "weights.bin", std::ios::binary);
  if (!wf) fail("MissingFile", "no weights.bin in " + dir);
  std::vector<char> bytes((std::istreambuf_iterator<char>(wf)),
                          std::istreambuf_iterator<char>());
  const size_t expected = checkpoint_param_count(ck.spec);
  if (bytes.size() != expected * sizeof(float)) {
    fail("BlobLength", "weights.bin holds " + std::to_string(bytes.size()) +
                           " bytes, expected " + std::to_string(expected * sizeof(float)));
  }
  ck.weights.resize(expected);
  std::memcpy(ck.weights.data(), bytes.data(), bytes.size());
  return ck;
}

}  // namespace ser
