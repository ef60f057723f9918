#pragma once

// Flat key=value configuration files: one key per line, '#' starts a comment.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "imbppo/dataio.hpp"
#include "imbppo/error.hpp"
#include "imbppo/trainer.hpp"

namespace imbppo {

class KeyValues {
 public:
  static KeyValues parse(std::istream& in, const std::string& origin = "config") {
    KeyValues kv;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
      const auto body = detail::trim(line);
      if (body.empty()) continue;
      const auto eq = body.find('=');
      if (eq == std::string_view::npos)
        throw InputError("config", origin + ":" + std::to_string(line_no) + ": expected key = value");
      const std::string key(detail::trim(body.substr(0, eq)));
      if (key.empty()) throw InputError("config", origin + ":" + std::to_string(line_no) + ": empty key");
      if (kv.values_.count(key)) throw InputError("config", origin + ": duplicate key '" + key + "'");
      kv.values_[key] = std::string(detail::trim(body.substr(eq + 1)));
    }
    kv.origin_ = origin;
    return kv;
  }

  static KeyValues load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InputError("config", "cannot open config file '" + path.string() + "'");
    return parse(in, path.string());
  }

  bool has(const std::string& key) const { return values_.count(key) != 0; }

  const std::string& get(const std::string& key) const {
    used_[key] = true;
    const auto it = values_.find(key);
    if (it == values_.end()) throw InputError("config", origin_ + ": missing key '" + key + "'");
    return it->second;
  }

  std::string get_or(const std::string& key, const std::string& fallback) const {
    return has(key) ? get(key) : fallback;
  }

  double get_double(const std::string& key, double fallback) const {
    if (!has(key)) return fallback;
    double v = 0.0;
    if (!detail::parse_double(get(key), v)) throw bad_value(key, "a number");
    return v;
  }

  std::uint64_t get_uint(const std::string& key, std::uint64_t fallback) const {
    if (!has(key)) return fallback;
    const auto& s = get(key);
    std::uint64_t v = 0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size()) throw bad_value(key, "a non-negative integer");
    return v;
  }

  bool get_bool(const std::string& key, bool fallback) const {
    if (!has(key)) return fallback;
    const auto& s = get(key);
    if (s == "true" || s == "1" || s == "yes") return true;
    if (s == "false" || s == "0" || s == "no") return false;
    throw bad_value(key, "true or false");
  }

  // Comma- or whitespace-separated numbers.
  std::vector<double> get_doubles(const std::string& key) const {
    std::string s = get(key);
    for (auto& ch : s)
      if (ch == ',') ch = ' ';
    std::istringstream is(s);
    std::vector<double> out;
    for (std::string tok; is >> tok;) {
      double v = 0.0;
      if (!detail::parse_double(tok, v)) throw bad_value(key, "a list of numbers");
      out.push_back(v);
    }
    return out;
  }

  // Keys present in the file but never read.
  std::vector<std::string> unused_keys() const {
    std::vector<std::string> out;
    for (const auto& [k, v] : values_)
      if (!used_.count(k)) out.push_back(k);
    return out;
  }

  void reject_unknown() const {
    const auto unused = unused_keys();
    if (!unused.empty()) throw InputError("config", origin_ + ": unknown key '" + unused.front() + "'");
  }

 private:
  InputError bad_value(const std::string& key, const std::string& expected) const {
    return InputError("config", origin_ + ": key '" + key + "' must be " + expected);
  }

  std::map<std::string, std::string> values_;
  mutable std::map<std::string, bool> used_;
  std::string origin_;
};

// Everything needed to reproduce one training run.
struct RunConfig {
  PpoConfig ppo;
  std::filesystem::path data;
  std::string label_column = "label";
  std::string flag_column;
  std::string outlier_marker = "drop-it";
  SplitSpec split{0.2, true, 0};
};

inline RunConfig run_config_from(const KeyValues& kv, const std::filesystem::path& base_dir = {}) {
  RunConfig rc;
  std::filesystem::path data = kv.get("data");
  if (data.is_relative() && !base_dir.empty()) data = base_dir / data;
  rc.data = data.lexically_normal();
  rc.label_column = kv.get_or("label_column", rc.label_column);
  rc.flag_column = kv.get_or("flag_column", rc.flag_column);
  rc.outlier_marker = kv.get_or("outlier_marker", rc.outlier_marker);
  rc.split.test_fraction = kv.get_double("test_fraction", rc.split.test_fraction);
  rc.split.stratified = kv.get_bool("stratified", rc.split.stratified);
  rc.split.seed = kv.get_uint("split_seed", rc.split.seed);

  PpoConfig& p = rc.ppo;
  p.variant = parse_variant(static_cast<int>(kv.get_uint("model", static_cast<std::uint64_t>(p.variant))));
  p.seed = kv.get_uint("seed", p.seed);
  p.clip_epsilon = kv.get_double("clip_epsilon", p.clip_epsilon);
  p.discount = kv.get_double("discount", p.discount);
  p.gae_lambda = kv.get_double("gae_lambda", p.gae_lambda);
  p.learning_rate = kv.get_double("learning_rate", p.learning_rate);
  p.batch_size = kv.get_uint("batch_size", p.batch_size);
  p.steps_per_rollout = kv.get_uint("steps_per_rollout", p.steps_per_rollout);
  p.epochs = kv.get_uint("epochs", p.epochs);
  p.updates_per_epoch = kv.get_uint("updates_per_epoch", p.updates_per_epoch);
  p.beta_ncpi = kv.get_double("beta_ncpi", p.beta_ncpi);
  p.focal_alpha = kv.get_double("focal_alpha", p.focal_alpha);
  p.focal_gamma = kv.get_double("focal_gamma", p.focal_gamma);
  p.c1 = kv.get_double("c1", p.c1);
  p.c2 = kv.get_double("c2", p.c2);
  p.memory_capacity = kv.get_uint("memory_capacity", p.memory());
  p.hidden_width = static_cast<int>(kv.get_uint("hidden_width", static_cast<std::uint64_t>(p.hidden_width)));
  p.hidden_layers = static_cast<int>(kv.get_uint("hidden_layers", static_cast<std::uint64_t>(p.hidden_layers)));
  p.activation = parse_activation(kv.get_or("activation", to_string(p.activation)));
  p.normalize_advantages = kv.get_bool("normalize_advantages", p.normalize_advantages);
  const auto target = kv.get_or("focal_target", "label");
  if (target == "label") {
    p.focal_target = FocalTarget::TrueLabel;
  } else if (target == "action") {
    p.focal_target = FocalTarget::TakenAction;
  } else {
    throw InputError("config", "focal_target must be 'label' or 'action'");
  }
  p.paper_literal_sign = kv.get_bool("paper_literal_sign", p.paper_literal_sign);
  kv.reject_unknown();
  p.validate();
  return rc;
}

inline RunConfig load_run_config(const std::filesystem::path& path) {
  return run_config_from(KeyValues::load(path), path.parent_path());
}

// Full echo of a run configuration in the same key=value dialect; loading it
// back reproduces the run.
inline std::string to_key_values(const RunConfig& rc) {
  const PpoConfig& p = rc.ppo;
  std::ostringstream os;
  auto num = [](double v) { return detail::format_double(v); };
  os << "# imbppo run configuration\n";
  os << "data = " << std::filesystem::absolute(rc.data).lexically_normal().string() << '\n';
  os << "label_column = " << rc.label_column << '\n';
  if (!rc.flag_column.empty()) os << "flag_column = " << rc.flag_column << '\n';
  os << "outlier_marker = " << rc.outlier_marker << '\n';
  os << "test_fraction = " << num(rc.split.test_fraction) << '\n';
  os << "stratified = " << (rc.split.stratified ? "true" : "false") << '\n';
  os << "split_seed = " << rc.split.seed << '\n';
  os << "model = " << static_cast<int>(p.variant) << '\n';
  os << "seed = " << p.seed << '\n';
  os << "clip_epsilon = " << num(p.clip_epsilon) << '\n';
  os << "discount = " << num(p.discount) << '\n';
  os << "gae_lambda = " << num(p.gae_lambda) << '\n';
  os << "learning_rate = " << num(p.learning_rate) << '\n';
  os << "batch_size = " << p.batch_size << '\n';
  os << "steps_per_rollout = " << p.steps_per_rollout << '\n';
  os << "epochs = " << p.epochs << '\n';
  os << "updates_per_epoch = " << p.updates_per_epoch << '\n';
  os << "beta_ncpi = " << num(p.beta_ncpi) << '\n';
  os << "focal_alpha = " << num(p.focal_alpha) << '\n';
  os << "focal_gamma = " << num(p.focal_gamma) << '\n';
  os << "c1 = " << num(p.c1) << '\n';
  os << "c2 = " << num(p.c2) << '\n';
  os << "memory_capacity = " << p.memory() << '\n';
  os << "hidden_width = " << p.hidden_width << '\n';
  os << "hidden_layers = " << p.hidden_layers << '\n';
  os << "activation = " << to_string(p.activation) << '\n';
  os << "normalize_advantages = " << (p.normalize_advantages ? "true" : "false") << '\n';
  os << "focal_target = " << (p.focal_target == FocalTarget::TrueLabel ? "label" : "action") << '\n';
  os << "paper_literal_sign = " << (p.paper_literal_sign ? "true" : "false") << '\n';
  return os.str();
}

// Synthetic data description:
//   n_features = 2
//   seed = 7
//   classes = 2
//   class.0.count = 9500
//   class.0.mean = -1        # one value is broadcast to every feature
//   class.0.std = 1
//   class.0.name = normal    # optional
inline SyntheticSpec synthetic_spec_from(const KeyValues& kv) {
  SyntheticSpec spec;
  spec.n_features = kv.get_uint("n_features", 0);
  spec.seed = kv.get_uint("seed", 0);
  const auto n_classes = kv.get_uint("classes", 0);
  if (n_classes < 2) throw InputError("config", "synthetic spec needs classes >= 2");
  auto vec = [&](const std::string& key) {
    const auto vals = kv.get_doubles(key);
    if (vals.size() == 1) return Eigen::VectorXd::Constant(static_cast<Eigen::Index>(spec.n_features), vals[0]).eval();
    if (vals.size() != spec.n_features)
      throw InputError("config", "key '" + key + "' needs 1 or " + std::to_string(spec.n_features) + " values");
    return Eigen::Map<const Eigen::VectorXd>(vals.data(), static_cast<Eigen::Index>(vals.size())).eval();
  };
  bool named = false;
  for (std::uint64_t c = 0; c < n_classes; ++c) {
    const std::string prefix = "class." + std::to_string(c) + ".";
    spec.counts.push_back(kv.get_uint(prefix + "count", 0));
    spec.means.push_back(vec(prefix + "mean"));
    spec.stddevs.push_back(vec(prefix + "std"));
    named = named || kv.has(prefix + "name");
  }
  if (named)
    for (std::uint64_t c = 0; c < n_classes; ++c)
      spec.class_names.push_back(kv.get_or("class." + std::to_string(c) + ".name", default_class_name(c, n_classes)));
  kv.reject_unknown();
  validate(spec);
  return spec;
}

}  // namespace imbppo
