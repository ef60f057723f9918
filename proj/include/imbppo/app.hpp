#pragma once

// End-to-end commands behind the imbppo CLI: data generation, training,
// evaluation and the three-model comparison.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "imbppo/config.hpp"
#include "imbppo/dataio.hpp"
#include "imbppo/error.hpp"
#include "imbppo/metrics.hpp"
#include "imbppo/neuralnet.hpp"
#include "imbppo/trainer.hpp"

namespace imbppo {

namespace fs = std::filesystem;

// Writes to a sibling temporary file, then renames over the target.
inline void atomic_write(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("io", "cannot write '" + tmp.string() + "'");
    out << content;
    out.flush();
    if (!out) throw InputError("io", "write failed for '" + tmp.string() + "'");
  }
  fs::rename(tmp, path);
}

inline std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("io", "cannot open '" + path.string() + "'");
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

// gen: synthetic CSV from a key=value spec.
inline DatasetTable cmd_gen(const fs::path& spec_path, const fs::path& out_path) {
  const DatasetTable table = generate_synthetic(synthetic_spec_from(KeyValues::load(spec_path)));
  fs::path tmp = out_path;
  tmp += ".tmp";
  if (out_path.has_parent_path()) fs::create_directories(out_path.parent_path());
  write_table(tmp, table);
  fs::rename(tmp, out_path);
  return table;
}

// Cleaned, split and normalised data for one configuration.
struct PreparedData {
  DatasetTable train;
  DatasetTable test;
  NormalizationStats stats;
  CleanReport cleaning;
};

inline PreparedData prepare_data(const RunConfig& rc) {
  if (!fs::exists(rc.data)) throw InputError("dataio", "data file not found: '" + rc.data.string() + "'");
  const auto raw = load_table(rc.data, LoadOptions{rc.label_column, rc.flag_column, rc.outlier_marker});
  auto cleaned = clean_rows(raw);
  if (cleaned.table.n_classes() < 2) throw InputError("dataio", "need at least 2 classes, found " +
                                                                    std::to_string(cleaned.table.n_classes()));
  auto split = stratified_split(cleaned.table, rc.split);
  PreparedData out;
  out.stats = fit_minmax(split.train);
  out.train = apply_minmax(out.stats, split.train);
  out.test = apply_minmax(out.stats, split.test);
  out.cleaning = cleaned.report;
  return out;
}

// Sidecar describing how raw features map into the actor's input space.
inline nlohmann::ordered_json preprocess_json(const DatasetTable& train, const NormalizationStats& stats) {
  nlohmann::ordered_json j;
  j["feature_names"] = train.feature_names;
  j["class_names"] = train.class_names;
  j["min"] = std::vector<double>(stats.min.data(), stats.min.data() + stats.min.size());
  j["max"] = std::vector<double>(stats.max.data(), stats.max.data() + stats.max.size());
  return j;
}

struct RunArtifacts {
  fs::path metrics;
  fs::path history;
  fs::path actor;
  fs::path critic;
  fs::path config_echo;
  fs::path preprocess;
};

struct TrainOutcome {
  RunArtifacts artifacts;
  MetricsReport metrics;
  TrainingHistory history;
};

inline std::string metrics_text(const MetricsReport& rep, const std::vector<std::string>& class_names) {
  return to_json(rep, class_names).dump(2) + "\n";
}

inline TrainOutcome train_on_prepared(const RunConfig& rc, const PreparedData& data, const fs::path& out_dir) {
  TrainResult trained = train(rc.ppo, data.train);
  TrainOutcome outcome;
  outcome.metrics = evaluate(trained.actor, data.test, rc.ppo.batch_size);
  outcome.history = trained.history;

  RunArtifacts& a = outcome.artifacts;
  a.metrics = out_dir / "metrics.json";
  a.history = out_dir / "history.csv";
  a.actor = out_dir / "actor.mlp";
  a.critic = out_dir / "critic.mlp";
  a.config_echo = out_dir / "config.txt";
  a.preprocess = out_dir / "preprocess.json";

  std::ostringstream hist;
  trained.history.write_csv(hist);
  atomic_write(a.config_echo, to_key_values(rc));
  atomic_write(a.preprocess, preprocess_json(data.train, data.stats).dump(2) + "\n");
  atomic_write(a.actor, to_text(trained.actor));
  atomic_write(a.critic, to_text(trained.critic));
  atomic_write(a.history, hist.str());
  atomic_write(a.metrics, metrics_text(outcome.metrics, data.train.class_names));
  return outcome;
}

// train: load -> clean -> split -> normalise -> train -> evaluate, writing
// every artifact under out_dir.
inline TrainOutcome cmd_train(const RunConfig& rc, const fs::path& out_dir) {
  return train_on_prepared(rc, prepare_data(rc), out_dir);
}

// eval: greedy evaluation of a saved actor on a CSV. If a preprocess.json
// sits next to the model (or is given), features are scaled with the
// training statistics and labels are matched by class name.
inline nlohmann::ordered_json cmd_eval(const fs::path& model_path, const fs::path& data_path,
                                       const std::string& label_column, std::size_t batch_size = 256,
                                       std::optional<fs::path> preprocess_path = std::nullopt) {
  const Mlp actor = load_mlp(model_path);
  if (!fs::exists(data_path)) throw InputError("dataio", "data file not found: '" + data_path.string() + "'");
  DatasetTable table = clean_rows(load_table(data_path, label_column)).table;

  if (!preprocess_path) {
    const auto sibling = model_path.parent_path() / "preprocess.json";
    if (fs::exists(sibling)) preprocess_path = sibling;
  }
  if (preprocess_path) {
    const auto j = nlohmann::json::parse(read_file(*preprocess_path));
    const auto mins = j.at("min").get<std::vector<double>>();
    const auto maxs = j.at("max").get<std::vector<double>>();
    const auto classes = j.at("class_names").get<std::vector<std::string>>();
    if (mins.size() != table.n_features())
      throw InputError("eval", "expected " + std::to_string(mins.size()) + " features, found " +
                                   std::to_string(table.n_features()));
    NormalizationStats stats{Eigen::Map<const Eigen::VectorXd>(mins.data(), static_cast<Eigen::Index>(mins.size())),
                             Eigen::Map<const Eigen::VectorXd>(maxs.data(), static_cast<Eigen::Index>(maxs.size()))};
    table = apply_minmax(stats, table);
    for (auto& l : table.labels) {
      const auto& name = table.class_names[static_cast<std::size_t>(l)];
      const auto it = std::find(classes.begin(), classes.end(), name);
      if (it == classes.end()) throw InputError("eval", "class '" + name + "' is unknown to the model");
      l = static_cast<int>(it - classes.begin());
    }
    table.class_names = classes;
  }
  if (static_cast<std::size_t>(actor.input_size()) != table.n_features())
    throw InputError("eval", "expected " + std::to_string(actor.input_size()) + " features, found " +
                                 std::to_string(table.n_features()));
  if (static_cast<std::size_t>(actor.output_size()) != table.n_classes())
    throw InputError("eval", "model has " + std::to_string(actor.output_size()) + " classes, data has " +
                                 std::to_string(table.n_classes()));
  return to_json(evaluate(actor, table, batch_size), table.class_names);
}

struct ComparisonRow {
  std::string seed;  // seed value, or "median"
  int model = 0;
  double accuracy = 0.0;
  double precision_weighted = 0.0;
  double recall_weighted = 0.0;
  double f1_weighted = 0.0;
  double recall_macro = 0.0;
  double minority_recall = 0.0;
};

inline double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const auto mid = v.size() / 2;
  return v.size() % 2 ? v[mid] : 0.5 * (v[mid - 1] + v[mid]);
}

inline std::string comparison_csv(const std::vector<ComparisonRow>& rows) {
  std::ostringstream os;
  os << "seed,model,accuracy,precision_weighted,recall_weighted,f1_weighted,recall_macro,minority_recall\n";
  for (const auto& r : rows)
    os << r.seed << ',' << r.model << ',' << detail::format_double(r.accuracy) << ','
       << detail::format_double(r.precision_weighted) << ',' << detail::format_double(r.recall_weighted) << ','
       << detail::format_double(r.f1_weighted) << ',' << detail::format_double(r.recall_macro) << ','
       << detail::format_double(r.minority_recall) << '\n';
  return os.str();
}

struct ComparisonResult {
  std::vector<ComparisonRow> runs;     // one per (seed, model)
  std::vector<ComparisonRow> medians;  // one per model
  fs::path table;
};

// compare: Models 1-3 trained on one shared preprocessing pass, for seeds
// seed, seed+1, ..., seed+n_seeds-1. Per-run artifacts land in
// out_dir/seed_<s>/model_<m>/.
inline ComparisonResult cmd_compare(const RunConfig& base, std::size_t n_seeds, const fs::path& out_dir) {
  if (n_seeds == 0) throw InputError("compare", "need at least one seed");
  const PreparedData data = prepare_data(base);
  ComparisonResult result;
  for (std::size_t s = 0; s < n_seeds; ++s) {
    for (int m = 1; m <= 3; ++m) {
      RunConfig rc = base;
      rc.ppo.seed = base.ppo.seed + s;
      rc.ppo.variant = static_cast<Variant>(m);
      const fs::path run_dir = out_dir / ("seed_" + std::to_string(rc.ppo.seed)) / ("model_" + std::to_string(m));
      const auto outcome = train_on_prepared(rc, data, run_dir);
      const auto& rep = outcome.metrics;
      result.runs.push_back({std::to_string(rc.ppo.seed), m, rep.accuracy, rep.precision_weighted, rep.recall_weighted,
                             rep.f1_weighted, rep.recall_macro, rep.minority_recall()});
    }
  }
  for (int m = 1; m <= 3; ++m) {
    std::vector<double> acc, pw, rw, fw, rm, mr;
    for (const auto& r : result.runs) {
      if (r.model != m) continue;
      acc.push_back(r.accuracy);
      pw.push_back(r.precision_weighted);
      rw.push_back(r.recall_weighted);
      fw.push_back(r.f1_weighted);
      rm.push_back(r.recall_macro);
      mr.push_back(r.minority_recall);
    }
    result.medians.push_back({"median", m, median(acc), median(pw), median(rw), median(fw), median(rm), median(mr)});
  }
  std::vector<ComparisonRow> all = result.runs;
  all.insert(all.end(), result.medians.begin(), result.medians.end());
  result.table = out_dir / "compare.csv";
  atomic_write(result.table, comparison_csv(all));
  return result;
}

}  // namespace imbppo
