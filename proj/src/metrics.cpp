#include "ser/metrics.hpp"

#include <fstream>
#include <numeric>

#include <json.hpp>

#include "ser/error.hpp"

using json = nlohmann::ordered_json;

namespace ser {

long long ConfusionMatrix::total() const {
  return std::accumulate(counts.begin(), counts.end(), 0LL);
}

long long ConfusionMatrix::row_sum(int i) const {
  long long s = 0;
  for (int p = 0; p < k; ++p) s += at(i, p);
  return s;
}

long long ConfusionMatrix::col_sum(int i) const {
  long long s = 0;
  for (int t = 0; t < k; ++t) s += at(t, i);
  return s;
}

ConfusionMatrix confusion(const std::vector<int>& labels, const std::vector<int>& preds,
                          int k) {
  if (labels.empty()) fail("EmptyEval", "no samples to evaluate");
  if (labels.size() != preds.size()) {
    fail("ShapeMismatch", "label/prediction count mismatch");
  }
  ConfusionMatrix cm;
  cm.k = k;
  cm.counts.assign(static_cast<size_t>(k) * k, 0);
  for (size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= k || preds[i] < 0 || preds[i] >= k) {
      fail("OutOfRange", "label or prediction outside [0, " + std::to_string(k) + ")");
    }
    ++cm.at(labels[i], preds[i]);
  }
  return cm;
}

EvalReport derive(const ConfusionMatrix& cm, const std::vector<std::string>& label_names) {
  const long long total = cm.total();
  if (total <= 0) fail("EmptyEval", "confusion matrix holds no samples");
  if (!label_names.empty() && static_cast<int>(label_names.size()) != cm.k) {
    fail("ShapeMismatch", "label name count != K");
  }

  EvalReport r;
  r.confusion = cm;
  for (int i = 0; i < cm.k; ++i) {
    r.labels.push_back(label_names.empty() ? std::to_string(i) : label_names[i]);
  }

  long long trace = 0, tp_sum = 0, fp_sum = 0, fn_sum = 0;
  for (int i = 0; i < cm.k; ++i) trace += cm.at(i, i);
  r.accuracy = static_cast<double>(trace) / total;

  for (int i = 0; i < cm.k; ++i) {
    const long long tp = cm.at(i, i);
    const long long fn = cm.row_sum(i) - tp;
    const long long fp = cm.col_sum(i) - tp;
    const long long tn = total - tp - fn - fp;
    tp_sum += tp;
    fp_sum += fp;
    fn_sum += fn;

    ClassMetrics m;
    m.label = r.labels[i];
    m.support = cm.row_sum(i);
    m.precision = (tp + fp) > 0 ? static_cast<double>(tp) / (tp + fp) : 0.0;
    m.recall = (tp + fn) > 0 ? static_cast<double>(tp) / (tp + fn) : 0.0;
    m.f1 = (m.precision + m.recall) > 0
               ? 2.0 * m.precision * m.recall / (m.precision + m.recall)
               : 0.0;
    r.per_class.push_back(m);

    r.balanced_accuracy += static_cast<double>(tp + tn) / total;
    r.macro_precision += m.precision;
    r.macro_recall += m.recall;
    r.macro_f1 += m.f1;
  }
  r.balanced_accuracy /= cm.k;
  r.macro_precision /= cm.k;
  r.macro_recall /= cm.k;
  r.macro_f1 /= cm.k;
  r.micro_precision = (tp_sum + fp_sum) > 0
                          ? static_cast<double>(tp_sum) / (tp_sum + fp_sum)
                          : 0.0;
  r.micro_recall = (tp_sum + fn_sum) > 0
                       ? static_cast<double>(tp_sum) / (tp_sum + fn_sum)
                       : 0.0;
  return r;
}

namespace {

json report_to_json(const EvalReport& r) {
  json j;
  j["accuracy"] = r.accuracy;
  j["balanced_accuracy"] = r.balanced_accuracy;
  j["micro_precision"] = r.micro_precision;
  j["micro_recall"] = r.micro_recall;
  j["macro"] = {{"precision", r.macro_precision},
                {"recall", r.macro_recall},
                {"f1", r.macro_f1}};
  json per_class = json::array();
  for (const auto& m : r.per_class) {
    per_class.push_back({{"label", m.label},
                         {"precision", m.precision},
                         {"recall", m.recall},
                         {"f1", m.f1},
                         {"support", m.support}});
  }
  j["per_class"] = per_class;
  json rows = json::array();
  for (int t = 0; t < r.confusion.k; ++t) {
    json row = json::array();
    for (int p = 0; p < r.confusion.k; ++p) row.push_back(r.confusion.at(t, p));
    rows.push_back(row);
  }
  j["confusion"] = rows;
  return j;
}

void write_csv(const EvalReport& r, std::ofstream& out) {
  char buf[64];
  auto num = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return std::string(buf);
  };
  out << "metric,value\n";
  out << "accuracy," << num(r.accuracy) << "\n";
  out << "balanced_accuracy," << num(r.balanced_accuracy) << "\n";
  out << "macro_precision," << num(r.macro_precision) << "\n";
  out << "macro_recall," << num(r.macro_recall) << "\n";
  out << "macro_f1," << num(r.macro_f1) << "\n";
  out << "micro_precision," << num(r.micro_precision) << "\n";
  out << "micro_recall," << num(r.micro_recall) << "\n";
  out << "\nclass,precision,recall,f1,support\n";
  for (const auto& m : r.per_class) {
    out << m.label << ',' << num(m.precision) << ',' << num(m.recall) << ',' << num(m.f1)
        << ',' << m.support << "\n";
  }
  out << "\nconfusion";
  for (const auto& l : r.labels) out << ",pred:" << l;
  out << "\n";
  for (int t = 0; t < r.confusion.k; ++t) {
    out << "true:" << r.labels[t];
    for (int p = 0; p < r.confusion.k; ++p) out << ',' << r.confusion.at(t, p);
    out << "\n";
  }
}

}  // namespace

void emit(const EvalReport& report, const std::string& path, const std::string& format) {
  std::ofstream out(path);
  if (!out) fail("UnwritablePath", "cannot write " + path);
  if (format == "json") {
    out << report_to_json(report).dump(2) << "\n";
  } else if (format == "csv") {
    write_csv(report, out);
  } else {
    fail("BadArgs", "emit format must be csv or json");
  }
}

}  // namespace ser
