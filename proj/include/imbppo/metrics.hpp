#pragma once

// Confusion matrix and support-weighted classification metrics.

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "imbppo/error.hpp"

namespace imbppo {

struct ConfusionMatrix {
  std::size_t n_classes = 0;
  std::vector<std::uint64_t> counts;  // row-major, rows = true class, cols = predicted

  explicit ConfusionMatrix(std::size_t c = 0) : n_classes(c), counts(c * c, 0) {}

  std::uint64_t& at(std::size_t truth, std::size_t pred) { return counts[truth * n_classes + pred]; }
  std::uint64_t at(std::size_t truth, std::size_t pred) const { return counts[truth * n_classes + pred]; }

  std::uint64_t total() const {
    std::uint64_t t = 0;
    for (auto c : counts) t += c;
    return t;
  }
  std::uint64_t row_sum(std::size_t truth) const {
    std::uint64_t s = 0;
    for (std::size_t j = 0; j < n_classes; ++j) s += at(truth, j);
    return s;
  }
  std::uint64_t col_sum(std::size_t pred) const {
    std::uint64_t s = 0;
    for (std::size_t i = 0; i < n_classes; ++i) s += at(i, pred);
    return s;
  }

  bool operator==(const ConfusionMatrix&) const = default;
};

inline ConfusionMatrix confusion(const std::vector<int>& truth, const std::vector<int>& predicted, std::size_t n_classes) {
  if (truth.size() != predicted.size())
    throw InputError("metrics", "label count mismatch: " + std::to_string(truth.size()) + " true vs " +
                                    std::to_string(predicted.size()) + " predicted");
  ConfusionMatrix m(n_classes);
  for (std::size_t k = 0; k < truth.size(); ++k) {
    const int t = truth[k], p = predicted[k];
    if (t < 0 || p < 0 || static_cast<std::size_t>(t) >= n_classes || static_cast<std::size_t>(p) >= n_classes)
      throw InputError("metrics", "label out of range at position " + std::to_string(k));
    ++m.at(static_cast<std::size_t>(t), static_cast<std::size_t>(p));
  }
  return m;
}

struct ClassMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::uint64_t support = 0;
};

struct MetricsReport {
  double accuracy = 0.0;
  double precision_weighted = 0.0;
  double recall_weighted = 0.0;
  double f1_weighted = 0.0;
  double precision_macro = 0.0;
  double recall_macro = 0.0;
  double f1_macro = 0.0;
  std::vector<ClassMetrics> per_class;
  ConfusionMatrix matrix;

  // Recall of the class with the smallest (non-zero) support.
  double minority_recall() const {
    std::size_t best = per_class.size();
    for (std::size_t c = 0; c < per_class.size(); ++c)
      if (per_class[c].support > 0 && (best == per_class.size() || per_class[c].support < per_class[best].support)) best = c;
    return best == per_class.size() ? 0.0 : per_class[best].recall;
  }
};

// Precision of a never-predicted class is 0, and F1 is 0 whenever
// precision + recall is 0. Macro averages run over classes with support.
inline MetricsReport report(const ConfusionMatrix& m) {
  const std::uint64_t total = m.total();
  if (total == 0) throw InputError("metrics", "cannot report on an empty confusion matrix");
  MetricsReport r;
  r.matrix = m;
  const double n = static_cast<double>(total);
  std::uint64_t trace = 0;
  std::size_t present = 0;
  for (std::size_t c = 0; c < m.n_classes; ++c) {
    const std::uint64_t tp = m.at(c, c);
    const std::uint64_t row = m.row_sum(c);
    const std::uint64_t col = m.col_sum(c);
    trace += tp;
    ClassMetrics cm;
    cm.support = row;
    cm.precision = col ? static_cast<double>(tp) / static_cast<double>(col) : 0.0;
    cm.recall = row ? static_cast<double>(tp) / static_cast<double>(row) : 0.0;
    cm.f1 = (cm.precision + cm.recall) > 0.0 ? 2.0 * cm.precision * cm.recall / (cm.precision + cm.recall) : 0.0;
    const double w = static_cast<double>(row) / n;
    r.precision_weighted += w * cm.precision;
    r.recall_weighted += w * cm.recall;
    r.f1_weighted += w * cm.f1;
    if (row) {
      ++present;
      r.precision_macro += cm.precision;
      r.recall_macro += cm.recall;
      r.f1_macro += cm.f1;
    }
    r.per_class.push_back(cm);
  }
  r.accuracy = static_cast<double>(trace) / n;
  if (present) {
    r.precision_macro /= static_cast<double>(present);
    r.recall_macro /= static_cast<double>(present);
    r.f1_macro /= static_cast<double>(present);
  }
  return r;
}

inline nlohmann::ordered_json to_json(const MetricsReport& r, const std::vector<std::string>& class_names = {}) {
  nlohmann::ordered_json j;
  j["accuracy"] = r.accuracy;
  j["precision_weighted"] = r.precision_weighted;
  j["recall_weighted"] = r.recall_weighted;
  j["f1_weighted"] = r.f1_weighted;
  j["precision_macro"] = r.precision_macro;
  j["recall_macro"] = r.recall_macro;
  j["f1_macro"] = r.f1_macro;
  auto per_class = nlohmann::ordered_json::array();
  for (std::size_t c = 0; c < r.per_class.size(); ++c) {
    nlohmann::ordered_json pc;
    pc["class"] = c < class_names.size() ? class_names[c] : std::to_string(c);
    pc["precision"] = r.per_class[c].precision;
    pc["recall"] = r.per_class[c].recall;
    pc["f1"] = r.per_class[c].f1;
    pc["support"] = r.per_class[c].support;
    per_class.push_back(pc);
  }
  j["per_class"] = per_class;
  auto rows = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < r.matrix.n_classes; ++i) {
    auto row = nlohmann::ordered_json::array();
    for (std::size_t k = 0; k < r.matrix.n_classes; ++k) row.push_back(r.matrix.at(i, k));
    rows.push_back(row);
  }
  j["confusion"] = rows;
  return j;
}

}  // namespace imbppo
