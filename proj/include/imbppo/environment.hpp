#pragma once

// Classification MDP: an episode walks through a batch of labelled samples,
// the action is a class guess and the reward signals whether it was right.

#include <concepts>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "imbppo/dataio.hpp"
#include "imbppo/error.hpp"
#include "imbppo/neuralnet.hpp"
#include "imbppo/random.hpp"

namespace imbppo {

struct EpisodeBatch {
  Eigen::MatrixXd samples;  // n_features x B, one sample per column
  std::vector<int> labels;
  std::vector<std::size_t> source_rows;  // row indices in the originating table
  std::size_t n_classes = 0;

  std::size_t size() const { return labels.size(); }
};

struct RewardScheme {
  double correct = 1.0;
  double incorrect = -1.0;
};

struct Transition {
  Eigen::VectorXd state;
  int action = 0;
  double reward = 0.0;
  std::optional<Eigen::VectorXd> next_state;  // empty at the terminal step
  bool done = false;
  double logprob_old = 0.0;
  double value_old = 0.0;
  int label = 0;  // true class of `state`, kept for the focal term
};

inline EpisodeBatch episode_from_rows(const DatasetTable& table, const std::vector<std::size_t>& rows) {
  EpisodeBatch ep;
  ep.samples.resize(static_cast<Eigen::Index>(table.n_features()), static_cast<Eigen::Index>(rows.size()));
  for (std::size_t k = 0; k < rows.size(); ++k) {
    ep.samples.col(static_cast<Eigen::Index>(k)) = table.features.row(static_cast<Eigen::Index>(rows[k])).transpose();
    ep.labels.push_back(table.labels[rows[k]]);
  }
  ep.source_rows = rows;
  ep.n_classes = table.n_classes();
  return ep;
}

// B rows drawn uniformly without replacement.
inline EpisodeBatch make_episode(const DatasetTable& table, std::size_t batch_size, Rng& rng) {
  if (batch_size == 0) throw InputError("environment", "episode size must be positive");
  if (batch_size > table.rows())
    throw InputError("environment", "episode size " + std::to_string(batch_size) + " exceeds table rows " +
                                        std::to_string(table.rows()));
  return episode_from_rows(table, sample_without_replacement(rng, table.rows(), batch_size));
}

inline EpisodeBatch make_episode(const DatasetTable& table, std::size_t batch_size, std::uint64_t seed) {
  Rng rng(mix_seed(seed, 0xE915));
  return make_episode(table, batch_size, rng);
}

struct StepResult {
  double reward = 0.0;
  std::optional<Eigen::VectorXd> next_state;
  bool done = false;
};

class ClassificationEnv {
 public:
  explicit ClassificationEnv(const EpisodeBatch& episode, RewardScheme rewards = {})
      : episode_(&episode), rewards_(rewards) {
    if (episode.size() == 0) throw InputError("environment", "episode is empty");
    if (!(rewards.correct > 0.0 && rewards.incorrect < 0.0))
      throw InputError("environment", "reward scheme needs correct > 0 > incorrect");
  }

  Eigen::VectorXd reset() {
    position_ = 0;
    return state();
  }

  Eigen::VectorXd state() const { return episode_->samples.col(static_cast<Eigen::Index>(position_)); }
  int label() const { return episode_->labels[position_]; }
  bool terminal() const { return position_ >= episode_->size(); }
  // 1-based step index t of the current sample.
  std::size_t t() const { return position_ + 1; }

  StepResult step(int action) {
    if (terminal()) throw InputError("environment", "step after terminal state");
    if (action < 0 || static_cast<std::size_t>(action) >= episode_->n_classes)
      throw InputError("environment", "action " + std::to_string(action) + " out of range");
    StepResult res;
    res.reward = action == label() ? rewards_.correct : rewards_.incorrect;
    ++position_;
    res.done = terminal();
    if (!res.done) res.next_state = state();
    return res;
  }

 private:
  const EpisodeBatch* episode_;
  RewardScheme rewards_;
  std::size_t position_ = 0;
};

// Anything that maps a state to class log-probabilities and a value estimate.
template <typename P>
concept Policy = requires(const P& p, const Eigen::VectorXd& s) {
  { p.log_probs(s) } -> std::convertible_to<Eigen::VectorXd>;
  { p.value(s) } -> std::convertible_to<double>;
};

// Actor/critic pair used as a Policy.
struct ActorCritic {
  const Mlp* actor = nullptr;
  const Mlp* critic = nullptr;

  Eigen::VectorXd log_probs(const Eigen::VectorXd& s) const { return log_softmax(forward(*actor, s)); }
  double value(const Eigen::VectorXd& s) const { return critic ? forward(*critic, s)(0) : 0.0; }
};

enum class ActionMode { Sample, Greedy };

inline int argmax(const Eigen::VectorXd& v) {
  Eigen::Index best = 0;
  v.maxCoeff(&best);
  return static_cast<int>(best);
}

inline int sample_categorical(const Eigen::VectorXd& log_probs, Rng& rng) {
  const double u = uniform_unit(rng);
  double acc = 0.0;
  for (Eigen::Index k = 0; k < log_probs.size(); ++k) {
    acc += std::exp(log_probs(k));
    if (u < acc) return static_cast<int>(k);
  }
  return static_cast<int>(log_probs.size() - 1);
}

template <Policy P>
std::vector<Transition> run_episode(const P& policy, const EpisodeBatch& episode, ActionMode mode, Rng& rng,
                                    RewardScheme rewards = {}) {
  ClassificationEnv env(episode, rewards);
  std::vector<Transition> out;
  out.reserve(episode.size());
  Eigen::VectorXd s = env.reset();
  while (!env.terminal()) {
    const Eigen::VectorXd lp = policy.log_probs(s);
    if (static_cast<std::size_t>(lp.size()) != episode.n_classes)
      throw InputError("environment", "policy emits " + std::to_string(lp.size()) + " actions for " +
                                          std::to_string(episode.n_classes) + " classes");
    const int a = mode == ActionMode::Greedy ? argmax(lp) : sample_categorical(lp, rng);
    Transition tr;
    tr.state = s;
    tr.action = a;
    tr.label = env.label();
    tr.logprob_old = lp(a);
    tr.value_old = policy.value(s);
    const StepResult res = env.step(a);
    tr.reward = res.reward;
    tr.done = res.done;
    tr.next_state = res.next_state;
    if (res.next_state) s = *res.next_state;
    out.push_back(std::move(tr));
  }
  return out;
}

}  // namespace imbppo
