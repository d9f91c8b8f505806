#pragma once

#include <array>
#include <string>
#include <vector>

#include "ser/metrics.hpp"

namespace ser {

// Convex weights over models (A, B, C).
struct EnsembleWeights {
  std::array<double, 3> w{1.0 / 3, 1.0 / 3, 1.0 / 3};

  void validate() const;  // nonnegative, sums to 1 within 1e-9
};

void save_weights(const EnsembleWeights& w, const std::string& path);
EnsembleWeights load_weights(const std::string& path);

struct Fused {
  std::vector<double> probs;
  int cls = 0;  // argmax, earliest index on ties
};

// p = w_a * pa + w_b * pb + w_c * pc. Errors: ShapeMismatch on differing K.
Fused fuse(const std::vector<double>& pa, const std::vector<double>& pb,
           const std::vector<double>& pc, const EnsembleWeights& w);

// All nonnegative weight triples with spacing `step` summing to 1,
// enumerated in lexicographic (w1, w2, w3) order. 66 points at step 0.1.
std::vector<std::array<double, 3>> simplex_lattice(double step);

struct GridSearchResult {
  EnsembleWeights weights;
  int candidates_evaluated = 0;
  double val_accuracy = 0.0;
};

// Exhaustive search over the simplex lattice for the weights maximizing
// fused accuracy on the validation set; ties keep the lexicographically
// smallest triple. Errors: EmptyEval, BadArgs when step does not divide 1.
GridSearchResult grid_search(const std::vector<std::vector<double>>& probs_a,
                             const std::vector<std::vector<double>>& probs_b,
                             const std::vector<std::vector<double>>& probs_c,
                             const std::vector<int>& labels, double step = 0.1);

// Fuses per sample and hands the predictions to the metrics module.
EvalReport evaluate_ensemble(const std::vector<std::vector<double>>& probs_a,
                             const std::vector<std::vector<double>>& probs_b,
                             const std::vector<std::vector<double>>& probs_c,
                             const std::vector<int>& labels, const EnsembleWeights& w,
                             const std::vector<std::string>& label_names = {});

}  // namespace ser
