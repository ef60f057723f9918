#pragma once

// Tabular dataset handling: CSV ingestion, row cleaning, min-max scaling,
// stratified splitting and a seeded Gaussian-blob generator.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "imbppo/error.hpp"
#include "imbppo/random.hpp"

namespace imbppo {

using FeatureMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

enum RowFlag : std::uint8_t {
  kRowOk = 0,
  kRowOutlier = 1 << 0,
  kRowNonNumeric = 1 << 1,
};

struct DatasetTable {
  FeatureMatrix features;  // rows x n_features
  std::vector<int> labels;
  std::vector<std::string> feature_names;
  std::vector<std::string> class_names;
  // Per-row RowFlag bits set by the loader; empty once a table is clean.
  std::vector<std::uint8_t> row_flags;

  std::size_t rows() const { return labels.size(); }
  std::size_t n_features() const { return static_cast<std::size_t>(features.cols()); }
  std::size_t n_classes() const { return class_names.size(); }

  Eigen::VectorXd row(std::size_t i) const {
    return features.row(static_cast<Eigen::Index>(i)).transpose();
  }

  std::vector<std::size_t> class_counts() const {
    std::vector<std::size_t> counts(n_classes(), 0);
    for (int l : labels) ++counts[static_cast<std::size_t>(l)];
    return counts;
  }
};

// Copies the given rows, in the given order.
inline DatasetTable select_rows(const DatasetTable& table, const std::vector<std::size_t>& indices) {
  DatasetTable out;
  out.feature_names = table.feature_names;
  out.class_names = table.class_names;
  out.features.resize(static_cast<Eigen::Index>(indices.size()), table.features.cols());
  out.labels.reserve(indices.size());
  const bool flags = !table.row_flags.empty();
  for (std::size_t k = 0; k < indices.size(); ++k) {
    const auto i = indices[k];
    out.features.row(static_cast<Eigen::Index>(k)) = table.features.row(static_cast<Eigen::Index>(i));
    out.labels.push_back(table.labels[i]);
    if (flags) out.row_flags.push_back(table.row_flags[i]);
  }
  return out;
}

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline std::vector<std::string_view> split_csv_line(std::string_view line) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    if (pos == std::string_view::npos) {
      cells.push_back(trim(line.substr(start)));
      break;
    }
    cells.push_back(trim(line.substr(start, pos - start)));
    start = pos + 1;
  }
  return cells;
}

// Parses a whole cell as a double. Accepts inf/infinity/nan spellings.
inline bool parse_double(std::string_view s, double& out) {
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  if (s.empty()) return false;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), out);
  return res.ec == std::errc() && res.ptr == s.data() + s.size();
}

// Shortest round-trip decimal form.
inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

}  // namespace detail

struct LoadOptions {
  std::string label_column;
  // Rows whose flag_column cell equals outlier_marker are flagged as outliers.
  // May name the label column itself; the marker is then not a class.
  std::string flag_column;
  std::string outlier_marker = "drop-it";
};

inline DatasetTable load_table(const std::filesystem::path& path, const LoadOptions& options) {
  std::ifstream in(path);
  if (!in) throw InputError("dataio", "cannot open data file '" + path.string() + "'");

  std::string line;
  if (!std::getline(in, line)) throw InputError("dataio", "empty dataset: '" + path.string() + "' has no header");
  const auto header = detail::split_csv_line(line);

  std::ptrdiff_t label_idx = -1;
  std::ptrdiff_t flag_idx = -1;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (header[c] == options.label_column) label_idx = static_cast<std::ptrdiff_t>(c);
    if (!options.flag_column.empty() && header[c] == options.flag_column) flag_idx = static_cast<std::ptrdiff_t>(c);
  }
  if (label_idx < 0) throw InputError("dataio", "label column '" + options.label_column + "' not found in '" + path.string() + "'");
  if (!options.flag_column.empty() && flag_idx < 0)
    throw InputError("dataio", "flag column '" + options.flag_column + "' not found in '" + path.string() + "'");

  DatasetTable table;
  std::vector<std::size_t> feature_cols;
  for (std::size_t c = 0; c < header.size(); ++c) {
    const auto ci = static_cast<std::ptrdiff_t>(c);
    if (ci == label_idx || ci == flag_idx) continue;
    feature_cols.push_back(c);
    table.feature_names.emplace_back(header[c]);
  }

  std::vector<double> values;
  std::vector<std::string> raw_labels;
  std::vector<std::uint8_t> flags;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    const auto cells = detail::split_csv_line(line);
    if (cells.size() != header.size())
      throw InputError("dataio", path.string() + ":" + std::to_string(line_no) + ": expected " +
                                     std::to_string(header.size()) + " cells, found " + std::to_string(cells.size()));
    std::uint8_t flag = kRowOk;
    for (auto c : feature_cols) {
      double v = 0.0;
      if (!detail::parse_double(cells[c], v)) {
        flag |= kRowNonNumeric;
        v = std::numeric_limits<double>::quiet_NaN();
      }
      values.push_back(v);
    }
    const bool outlier = flag_idx >= 0 && cells[static_cast<std::size_t>(flag_idx)] == options.outlier_marker;
    if (outlier) flag |= kRowOutlier;
    const bool marker_is_label = outlier && flag_idx == label_idx;
    raw_labels.emplace_back(marker_is_label ? std::string_view{} : cells[static_cast<std::size_t>(label_idx)]);
    flags.push_back(flag);
  }
  if (raw_labels.empty()) throw InputError("dataio", "empty dataset: '" + path.string() + "' has no data rows");

  std::map<std::string, int> encoding;
  for (std::size_t i = 0; i < raw_labels.size(); ++i)
    if (!(flags[i] & kRowOutlier) || flag_idx != label_idx) encoding.emplace(raw_labels[i], 0);
  int next = 0;
  for (auto& [name, code] : encoding) {
    code = next++;
    table.class_names.push_back(name);
  }

  const auto n_rows = static_cast<Eigen::Index>(raw_labels.size());
  const auto n_feat = static_cast<Eigen::Index>(feature_cols.size());
  table.features = Eigen::Map<FeatureMatrix>(values.data(), n_rows, n_feat);
  table.labels.reserve(raw_labels.size());
  for (const auto& name : raw_labels) {
    const auto it = encoding.find(name);
    table.labels.push_back(it == encoding.end() ? 0 : it->second);
  }
  table.row_flags = std::move(flags);
  return table;
}

inline DatasetTable load_table(const std::filesystem::path& path, const std::string& label_column) {
  return load_table(path, LoadOptions{label_column, {}, "drop-it"});
}

inline void write_table(const std::filesystem::path& path, const DatasetTable& table, const std::string& label_column = "label") {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("dataio", "cannot write '" + path.string() + "'");
  for (const auto& name : table.feature_names) out << name << ',';
  out << label_column << '\n';
  for (std::size_t i = 0; i < table.rows(); ++i) {
    for (Eigen::Index c = 0; c < table.features.cols(); ++c)
      out << detail::format_double(table.features(static_cast<Eigen::Index>(i), c)) << ',';
    out << table.class_names[static_cast<std::size_t>(table.labels[i])] << '\n';
  }
  if (!out) throw InputError("dataio", "write failed for '" + path.string() + "'");
}

struct CleanReport {
  std::size_t outlier = 0;
  std::size_t non_numeric = 0;
  std::size_t inf_nan = 0;

  std::size_t total() const { return outlier + non_numeric + inf_nan; }
  bool operator==(const CleanReport&) const = default;
};

struct CleanResult {
  DatasetTable table;
  CleanReport report;
};

// Drops outlier-flagged rows, rows with unparseable cells and rows with any
// non-finite value. Each dropped row is counted once, under the first reason
// in that order.
inline CleanResult clean_rows(const DatasetTable& table) {
  CleanResult result;
  std::vector<std::size_t> keep;
  keep.reserve(table.rows());
  for (std::size_t i = 0; i < table.rows(); ++i) {
    const std::uint8_t flag = table.row_flags.empty() ? kRowOk : table.row_flags[i];
    if (flag & kRowOutlier) {
      ++result.report.outlier;
    } else if (flag & kRowNonNumeric) {
      ++result.report.non_numeric;
    } else if (!table.features.row(static_cast<Eigen::Index>(i)).allFinite()) {
      ++result.report.inf_nan;
    } else {
      keep.push_back(i);
    }
  }
  if (keep.empty()) throw InputError("dataio", "no usable rows after cleaning");
  result.table = select_rows(table, keep);
  result.table.row_flags.clear();
  return result;
}

struct NormalizationStats {
  Eigen::VectorXd min;
  Eigen::VectorXd max;

  std::size_t size() const { return static_cast<std::size_t>(min.size()); }
};

inline NormalizationStats fit_minmax(const DatasetTable& train) {
  if (train.rows() == 0) throw InputError("dataio", "cannot fit min-max scaler on an empty table");
  return {train.features.colwise().minCoeff().transpose(), train.features.colwise().maxCoeff().transpose()};
}

// (D - min) / (max - min) per column. Constant columns map to 0. Values
// outside the fitted range are not clipped.
inline DatasetTable apply_minmax(const NormalizationStats& stats, const DatasetTable& table) {
  if (stats.size() != table.n_features())
    throw InputError("dataio", "expected " + std::to_string(stats.size()) + " features, found " +
                                   std::to_string(table.n_features()));
  DatasetTable out = table;
  for (Eigen::Index c = 0; c < out.features.cols(); ++c) {
    const double lo = stats.min(c);
    const double span = stats.max(c) - lo;
    if (span > 0.0) {
      out.features.col(c) = (out.features.col(c).array() - lo) / span;
    } else {
      out.features.col(c).setZero();
    }
  }
  return out;
}

struct SplitSpec {
  double test_fraction = 0.2;
  bool stratified = true;
  std::uint64_t seed = 0;
};

struct SplitResult {
  DatasetTable train;
  DatasetTable test;
};

// Per-class test count is round(n_c * fraction), kept within [1, n_c - 1] so
// both sides see every class. Rows keep their original relative order.
inline SplitResult stratified_split(const DatasetTable& table, const SplitSpec& spec) {
  if (!(spec.test_fraction > 0.0 && spec.test_fraction < 1.0))
    throw InputError("dataio", "test_fraction must lie in (0, 1)");
  Rng rng(mix_seed(spec.seed, 0x5170));
  std::vector<std::uint8_t> in_test(table.rows(), 0);

  auto pick = [&](const std::vector<std::size_t>& members) {
    const std::size_t n = members.size();
    auto k = static_cast<std::size_t>(std::llround(static_cast<double>(n) * spec.test_fraction));
    if (n >= 2) k = std::clamp<std::size_t>(k, 1, n - 1);
    for (auto j : sample_without_replacement(rng, n, k)) in_test[members[j]] = 1;
  };

  if (spec.stratified) {
    std::vector<std::vector<std::size_t>> by_class(table.n_classes());
    for (std::size_t i = 0; i < table.rows(); ++i) by_class[static_cast<std::size_t>(table.labels[i])].push_back(i);
    for (std::size_t c = 0; c < by_class.size(); ++c) {
      if (by_class[c].empty()) continue;
      if (by_class[c].size() < 2)
        throw InputError("dataio", "class '" + table.class_names[c] + "' has fewer than 2 rows; cannot stratify");
      pick(by_class[c]);
    }
  } else {
    std::vector<std::size_t> all(table.rows());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    pick(all);
  }

  std::vector<std::size_t> train_idx, test_idx;
  for (std::size_t i = 0; i < table.rows(); ++i) (in_test[i] ? test_idx : train_idx).push_back(i);
  return {select_rows(table, train_idx), select_rows(table, test_idx)};
}

struct SyntheticSpec {
  std::vector<std::size_t> counts;
  std::vector<Eigen::VectorXd> means;
  std::vector<Eigen::VectorXd> stddevs;
  std::vector<std::string> class_names;  // optional; defaults to c0, c1, ...
  std::size_t n_features = 0;
  std::uint64_t seed = 0;
};

inline void validate(const SyntheticSpec& spec) {
  if (spec.n_features == 0) throw InputError("dataio", "synthetic spec needs n_features >= 1");
  if (spec.counts.size() < 2) throw InputError("dataio", "synthetic spec needs at least 2 classes");
  if (spec.means.size() != spec.counts.size() || spec.stddevs.size() != spec.counts.size())
    throw InputError("dataio", "synthetic spec: counts, means and stds must list the same classes");
  if (!spec.class_names.empty() && spec.class_names.size() != spec.counts.size())
    throw InputError("dataio", "synthetic spec: class name count mismatch");
  for (std::size_t c = 0; c < spec.counts.size(); ++c) {
    if (spec.counts[c] == 0) throw InputError("dataio", "synthetic spec: class " + std::to_string(c) + " has zero samples");
    if (static_cast<std::size_t>(spec.means[c].size()) != spec.n_features ||
        static_cast<std::size_t>(spec.stddevs[c].size()) != spec.n_features)
      throw InputError("dataio", "synthetic spec: class " + std::to_string(c) + " mean/std length != n_features");
    if ((spec.stddevs[c].array() <= 0.0).any())
      throw InputError("dataio", "synthetic spec: class " + std::to_string(c) + " has a non-positive std");
  }
}

// Default class names sort in class order so a CSV round trip keeps labels.
inline std::string default_class_name(std::size_t c, std::size_t n_classes) {
  const auto width = std::to_string(n_classes - 1).size();
  auto digits = std::to_string(c);
  return "c" + std::string(width - digits.size(), '0') + digits;
}

inline DatasetTable generate_synthetic(const SyntheticSpec& spec) {
  validate(spec);
  Rng rng(mix_seed(spec.seed, 0x6E4));
  std::size_t total = 0;
  for (auto n : spec.counts) total += n;

  DatasetTable table;
  const auto n_feat = static_cast<Eigen::Index>(spec.n_features);
  table.features.resize(static_cast<Eigen::Index>(total), n_feat);
  for (Eigen::Index f = 0; f < n_feat; ++f) table.feature_names.push_back("f" + std::to_string(f));
  for (std::size_t c = 0; c < spec.counts.size(); ++c)
    table.class_names.push_back(spec.class_names.empty() ? default_class_name(c, spec.counts.size()) : spec.class_names[c]);

  Eigen::Index r = 0;
  for (std::size_t c = 0; c < spec.counts.size(); ++c) {
    for (std::size_t k = 0; k < spec.counts[c]; ++k, ++r) {
      for (Eigen::Index f = 0; f < n_feat; ++f)
        table.features(r, f) = spec.means[c](f) + spec.stddevs[c](f) * standard_normal(rng);
      table.labels.push_back(static_cast<int>(c));
    }
  }
  return table;
}

}  // namespace imbppo
