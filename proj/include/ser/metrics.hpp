#pragma once

#include <string>
#include <vector>

namespace ser {

// rows = true label, cols = predicted label
struct ConfusionMatrix {
  int k = 0;
  std::vector<long long> counts;

  long long at(int t, int p) const { return counts[static_cast<size_t>(t) * k + p]; }
  long long& at(int t, int p) { return counts[static_cast<size_t>(t) * k + p]; }
  long long total() const;
  long long row_sum(int i) const;
  long long col_sum(int i) const;
};

struct ClassMetrics {
  std::string label;
  double precision = 0, recall = 0, f1 = 0;
  long long support = 0;
};

struct EvalReport {
  ConfusionMatrix confusion;
  std::vector<std::string> labels;
  double accuracy = 0;
  double balanced_accuracy = 0;  // mean over classes of (TP_i + TN_i) / total
  double macro_precision = 0, macro_recall = 0, macro_f1 = 0;
  double micro_precision = 0, micro_recall = 0;
  std::vector<ClassMetrics> per_class;
};

// Errors: EmptyEval on empty input, OutOfRange on labels outside [0, K).
ConfusionMatrix confusion(const std::vector<int>& labels, const std::vector<int>& preds,
                          int k);

// All derived rates use the zero-denominator -> 0 convention.
// label_names may be empty (class ids are used) or length K.
EvalReport derive(const ConfusionMatrix& cm, const std::vector<std::string>& label_names = {});

// format is "csv" or "json"; emission is byte-deterministic.
void emit(const EvalReport& report, const std::string& path, const std::string& format);

}  // namespace ser
