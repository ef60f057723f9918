// imbppo command-line front end.
//
// Exit codes: 0 success, 1 internal error, 2 bad input.

#include <exception>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "imbppo/app.hpp"

namespace {

constexpr int kExitInternal = 1;
constexpr int kExitBadInput = 2;

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Imbalanced classification with actor-critic PPO on a classification MDP"};
  app.require_subcommand(1);

  std::string gen_spec, gen_out;
  auto* gen = app.add_subcommand("gen", "Generate a synthetic Gaussian-blob CSV");
  gen->add_option("--spec", gen_spec, "key=value synthetic spec")->required();
  gen->add_option("--out", gen_out, "output CSV path")->required();

  std::string train_config, train_out;
  std::optional<int> train_model;
  std::optional<std::uint64_t> train_seed;
  bool paper_literal_sign = false;
  auto* train = app.add_subcommand("train", "Train one model variant and evaluate it on the held-out split");
  train->add_option("--config", train_config, "key=value run configuration")->required();
  train->add_option("--out", train_out, "output directory")->required();
  train->add_option("--model", train_model, "model variant (1, 2 or 3)")->check(CLI::Range(1, 3));
  train->add_option("--seed", train_seed, "training seed");
  train->add_flag("--paper-literal-sign", paper_literal_sign, "maximise the focal term as literally written");

  std::string eval_model, eval_data, eval_label = "label", eval_out, eval_preprocess;
  std::size_t eval_batch = 256;
  auto* eval = app.add_subcommand("eval", "Greedy evaluation of a saved actor on a CSV");
  eval->add_option("--model", eval_model, "actor model file")->required();
  eval->add_option("--data", eval_data, "CSV to evaluate")->required();
  eval->add_option("--label-column", eval_label, "label column name");
  eval->add_option("--batch-size", eval_batch, "evaluation episode length");
  eval->add_option("--preprocess", eval_preprocess, "preprocess.json (default: next to the model)");
  eval->add_option("--out", eval_out, "also write the metrics JSON here");

  std::string cmp_config, cmp_out;
  std::size_t cmp_seeds = 5;
  auto* compare = app.add_subcommand("compare", "Train Models 1, 2 and 3 over several seeds");
  compare->add_option("--config", cmp_config, "key=value run configuration")->required();
  compare->add_option("--seeds", cmp_seeds, "number of seeds");
  compare->add_option("--out", cmp_out, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitBadInput;
  }

  try {
    if (*gen) {
      const auto table = imbppo::cmd_gen(gen_spec, gen_out);
      std::cout << "wrote " << table.rows() << " rows to " << gen_out << '\n';
    } else if (*train) {
      auto rc = imbppo::load_run_config(train_config);
      if (train_model) rc.ppo.variant = imbppo::parse_variant(*train_model);
      if (train_seed) rc.ppo.seed = *train_seed;
      if (paper_literal_sign) rc.ppo.paper_literal_sign = true;
      const auto outcome = imbppo::cmd_train(rc, train_out);
      std::cout << "model " << static_cast<int>(rc.ppo.variant) << ": accuracy " << outcome.metrics.accuracy
                << ", weighted F1 " << outcome.metrics.f1_weighted << '\n'
                << "artifacts in " << train_out << '\n';
    } else if (*eval) {
      std::optional<std::filesystem::path> pre;
      if (!eval_preprocess.empty()) pre = eval_preprocess;
      const auto j = imbppo::cmd_eval(eval_model, eval_data, eval_label, eval_batch, pre);
      const std::string text = j.dump(2) + "\n";
      std::cout << text;
      if (!eval_out.empty()) imbppo::atomic_write(eval_out, text);
    } else if (*compare) {
      const auto rc = imbppo::load_run_config(cmp_config);
      const auto result = imbppo::cmd_compare(rc, cmp_seeds, cmp_out);
      std::cout << imbppo::comparison_csv(result.medians) << "table written to " << result.table.string() << '\n';
    }
  } catch (const imbppo::InputError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitBadInput;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return kExitInternal;
  }
  return 0;
}
