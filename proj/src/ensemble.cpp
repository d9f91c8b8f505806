#include "ser/ensemble.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <json.hpp>

#include "ser/error.hpp"

using json = nlohmann::ordered_json;

namespace ser {

void EnsembleWeights::validate() const {
  double sum = 0.0;
  for (double v : w) {
    if (v < 0.0) fail("BadArgs", "ensemble weights must be nonnegative");
    sum += v;
  }
  if (std::fabs(sum - 1.0) > 1e-9) fail("BadArgs", "ensemble weights must sum to 1");
}

void save_weights(const EnsembleWeights& w, const std::string& path) {
  w.validate();
  json j;
  j["w_a"] = w.w[0];
  j["w_b"] = w.w[1];
  j["w_c"] = w.w[2];
  std::ofstream out(path);
  if (!out) fail("UnwritablePath", "cannot write " + path);
  out << j.dump(2) << "\n";
}

EnsembleWeights load_weights(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail("MissingFile", "cannot open " + path);
  json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    fail("MalformedManifest", path + ": " + e.what());
  }
  EnsembleWeights w;
  w.w = {j.at("w_a").get<double>(), j.at("w_b").get<double>(), j.at("w_c").get<double>()};
  w.validate();
  return w;
}

Fused fuse(const std::vector<double>& pa, const std::vector<double>& pb,
           const std::vector<double>& pc, const EnsembleWeights& w) {
  const size_t k = pa.size();
  if (pb.size() != k || pc.size() != k || k == 0) {
    fail("ShapeMismatch", "probability vectors must share the same K");
  }
  Fused out;
  out.probs.resize(k);
  for (size_t i = 0; i < k; ++i) {
    out.probs[i] = w.w[0] * pa[i] + w.w[1] * pb[i] + w.w[2] * pc[i];
  }
  out.cls = 0;
  for (size_t i = 1; i < k; ++i) {
    if (out.probs[i] > out.probs[out.cls]) out.cls = static_cast<int>(i);
  }
  return out;
}

std::vector<std::array<double, 3>> simplex_lattice(double step) {
  if (!(step > 0.0 && step <= 1.0)) fail("BadArgs", "lattice step must be in (0, 1]");
  const int n = static_cast<int>(std::lround(1.0 / step));
  if (std::fabs(n * step - 1.0) > 1e-9) {
    fail("BadArgs", "lattice step must divide 1 evenly");
  }
  std::vector<std::array<double, 3>> points;
  for (int i = 0; i <= n; ++i) {
    for (int j = 0; j <= n - i; ++j) {
      const int l = n - i - j;
      points.push_back({static_cast<double>(i) / n, static_cast<double>(j) / n,
                        static_cast<double>(l) / n});
    }
  }
  return points;
}

namespace {

double fused_accuracy(const std::vector<std::vector<double>>& pa,
                      const std::vector<std::vector<double>>& pb,
                      const std::vector<std::vector<double>>& pc,
                      const std::vector<int>& labels, const EnsembleWeights& w) {
  int correct = 0;
  for (size_t i = 0; i < labels.size(); ++i) {
    if (fuse(pa[i], pb[i], pc[i], w).cls == labels[i]) ++correct;
  }
  return static_cast<double>(correct) / labels.size();
}

}  // namespace

GridSearchResult grid_search(const std::vector<std::vector<double>>& probs_a,
                             const std::vector<std::vector<double>>& probs_b,
                             const std::vector<std::vector<double>>& probs_c,
                             const std::vector<int>& labels, double step) {
  if (labels.empty()) fail("EmptyEval", "grid search needs a non-empty validation set");
  if (probs_a.size() != labels.size() || probs_b.size() != labels.size() ||
      probs_c.size() != labels.size()) {
    fail("ShapeMismatch", "probability/label count mismatch");
  }

  GridSearchResult result;
  result.val_accuracy = -1.0;
  for (const auto& point : simplex_lattice(step)) {
    EnsembleWeights w;
    w.w = point;
    const double acc = fused_accuracy(probs_a, probs_b, probs_c, labels, w);
    ++result.candidates_evaluated;
    if (acc > result.val_accuracy) {  // ties keep the earliest = smallest triple
      result.val_accuracy = acc;
      result.weights = w;
    }
  }
  return result;
}

EvalReport evaluate_ensemble(const std::vector<std::vector<double>>& probs_a,
                             const std::vector<std::vector<double>>& probs_b,
                             const std::vector<std::vector<double>>& probs_c,
                             const std::vector<int>& labels, const EnsembleWeights& w,
                             const std::vector<std::string>& label_names) {
  if (probs_a.size() != labels.size() || probs_b.size() != labels.size() ||
      probs_c.size() != labels.size()) {
    fail("ShapeMismatch", "probability/label count mismatch");
  }
  if (labels.empty()) fail("EmptyEval", "no samples to evaluate");
  const int k = static_cast<int>(probs_a[0].size());
  std::vector<int> preds(labels.size());
  for (size_t i = 0; i < labels.size(); ++i) {
    preds[i] = fuse(probs_a[i], probs_b[i], probs_c[i], w).cls;
  }
  return derive(confusion(labels, preds, k), label_names);
}

}  // namespace ser
