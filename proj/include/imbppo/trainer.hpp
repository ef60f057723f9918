#pragma once

// Actor-critic PPO training on the classification MDP, and greedy
// evaluation over a held-out table.

#include <cmath>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <ostream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "imbppo/dataio.hpp"
#include "imbppo/environment.hpp"
#include "imbppo/error.hpp"
#include "imbppo/gae.hpp"
#include "imbppo/losses.hpp"
#include "imbppo/metrics.hpp"
#include "imbppo/neuralnet.hpp"
#include "imbppo/random.hpp"
#include "imbppo/replay_buffer.hpp"

namespace imbppo {

// Which probability the focal term reads: the true label's (default) or the
// taken action's.
enum class FocalTarget { TrueLabel, TakenAction };

struct PpoConfig {
  double clip_epsilon = 0.2;
  double discount = 0.99;
  double gae_lambda = 0.95;
  double learning_rate = 1e-3;
  std::size_t batch_size = 256;         // episode length and minibatch size
  std::size_t steps_per_rollout = 256;  // environment steps collected per epoch
  std::size_t epochs = 100;
  double beta_ncpi = 0.01;
  double focal_alpha = 0.25;
  double focal_gamma = 2.0;
  double c1 = 0.5;
  double c2 = 0.2;
  Variant variant = Variant::Model3;
  std::uint64_t seed = 0;
  std::size_t memory_capacity = 0;  // 0 selects 10 * batch_size
  std::size_t updates_per_epoch = 10;  // minibatch updates after each rollout: one pass over a full memory

  int hidden_width = 32;
  int hidden_layers = 4;
  Activation activation = Activation::ReLU;
  bool normalize_advantages = true;
  FocalTarget focal_target = FocalTarget::TrueLabel;
  bool paper_literal_sign = false;

  std::size_t memory() const { return memory_capacity ? memory_capacity : 10 * batch_size; }
  std::size_t episodes_per_epoch() const { return (steps_per_rollout + batch_size - 1) / batch_size; }

  void validate() const {
    auto fail = [](const std::string& what) { throw InputError("ppo", "invalid config: " + what); };
    if (!(clip_epsilon > 0.0 && clip_epsilon < 1.0)) fail("clip epsilon must lie in (0, 1)");
    if (!(discount > 0.0 && discount <= 1.0)) fail("discount must lie in (0, 1]");
    if (!(gae_lambda >= 0.0 && gae_lambda <= 1.0)) fail("GAE lambda must lie in [0, 1]");
    if (!(learning_rate > 0.0)) fail("learning rate must be positive");
    if (batch_size == 0) fail("batch size must be positive");
    if (steps_per_rollout == 0) fail("steps per rollout must be positive");
    if (updates_per_epoch == 0) fail("updates per epoch must be positive");
    if (!(c1 >= 0.0) || !(c2 >= 0.0)) fail("c1 and c2 must be non-negative");
    if (!(focal_gamma >= 0.0)) fail("focal gamma must be non-negative");
    if (!(focal_alpha >= 0.0)) fail("focal alpha must be non-negative");
    if (hidden_width <= 0 || hidden_layers < 0) fail("hidden layer shape must be positive");
  }
};

struct EpochRecord {
  std::size_t epoch = 0;
  double total_loss = 0.0;
  double actor_loss = 0.0;
  double critic_loss = 0.0;
  double aux_term = 0.0;  // entropy (Model 1) or focal loss (Models 2, 3)
  double train_accuracy = 0.0;
  std::optional<double> validation_accuracy;

  bool operator==(const EpochRecord&) const = default;
};

struct TrainingHistory {
  std::vector<EpochRecord> epochs;

  bool operator==(const TrainingHistory&) const = default;

  void write_csv(std::ostream& out) const {
    const bool has_val = !epochs.empty() && epochs.front().validation_accuracy.has_value();
    out << "epoch,total_loss,actor_loss,critic_loss,aux_term,train_accuracy" << (has_val ? ",validation_accuracy" : "")
        << '\n';
    for (const auto& e : epochs) {
      out << e.epoch << ',' << detail::format_double(e.total_loss) << ',' << detail::format_double(e.actor_loss) << ','
          << detail::format_double(e.critic_loss) << ',' << detail::format_double(e.aux_term) << ','
          << detail::format_double(e.train_accuracy);
      if (has_val) out << ',' << detail::format_double(e.validation_accuracy.value_or(0.0));
      out << '\n';
    }
  }
};

struct TrainResult {
  Mlp actor;
  Mlp critic;
  TrainingHistory history;
};

// Transitions drawn from memory, with their advantages and value targets.
struct Minibatch {
  Eigen::MatrixXd states;  // n_features x N
  std::vector<int> actions;
  std::vector<int> labels;
  Eigen::VectorXd logprob_old;
  Eigen::VectorXd advantages;
  Eigen::VectorXd return_targets;

  Eigen::Index size() const { return static_cast<Eigen::Index>(actions.size()); }
};

inline Eigen::VectorXd standardize(const Eigen::VectorXd& x) {
  if (x.size() < 2) return x;
  const double mean = x.mean();
  const double var = (x.array() - mean).square().sum() / static_cast<double>(x.size());
  return ((x.array() - mean) / (std::sqrt(var) + 1e-8)).matrix();
}

// Evaluates every per-transition term for the actor's current parameters.
// When logit_grad is given it receives d(total_loss)/d(logits), one column
// per transition, for the configured variant.
inline SurrogateBatch evaluate_surrogate(const Mlp& actor, const Minibatch& mb, const Eigen::VectorXd& value_term,
                                         const PpoConfig& cfg, Eigen::MatrixXd* logit_grad = nullptr,
                                         ForwardCache* cache = nullptr) {
  const Eigen::Index n = mb.size();
  if (n == 0) throw InputError("ppo", "empty minibatch");
  const Eigen::MatrixXd logits = forward_batch(actor, mb.states, cache);
  const Eigen::MatrixXd logp = log_softmax_columns(logits);
  const Eigen::Index n_actions = logits.rows();

  SurrogateBatch b;
  b.ratio.resize(n);
  b.chosen_prob.resize(n);
  b.clip_term.resize(n);
  b.nclip_term.resize(n);
  b.focal_term.resize(n);
  b.entropy_term.resize(n);
  b.value_term = value_term;

  if (logit_grad) logit_grad->setZero(n_actions, n);
  const double inv_n = 1.0 / static_cast<double>(n);
  const double sign = aux_sign(cfg.variant, cfg.paper_literal_sign);

  for (Eigen::Index i = 0; i < n; ++i) {
    const int a = mb.actions[static_cast<std::size_t>(i)];
    const int target = cfg.focal_target == FocalTarget::TrueLabel ? mb.labels[static_cast<std::size_t>(i)] : a;
    const Eigen::VectorXd lp = logp.col(i);
    const Eigen::VectorXd p = lp.array().exp().matrix();
    const double adv = mb.advantages(i);
    const double ratio = prob_ratio(lp(a), mb.logprob_old(i));
    const double p_target = p(target);

    b.ratio(i) = ratio;
    b.chosen_prob(i) = p(a);
    b.clip_term(i) = clip_objective(ratio, adv, cfg.clip_epsilon);
    b.nclip_term(i) = nclip_objective(ratio, adv, lp(a), cfg.clip_epsilon, cfg.beta_ncpi);
    b.focal_term(i) = focal_loss(p_target, cfg.focal_alpha, cfg.focal_gamma);
    b.entropy_term(i) = entropy_bonus(p);

    if (!logit_grad) continue;
    auto g = logit_grad->col(i);

    // Policy term enters the loss with a minus sign. d lp(a)/dz = e_a - p.
    double d_policy_d_lpa = clip_objective_dratio(ratio, adv, cfg.clip_epsilon) * ratio;
    if (cfg.variant == Variant::Model3) d_policy_d_lpa += cfg.beta_ncpi;
    g -= inv_n * d_policy_d_lpa * (Eigen::VectorXd::Unit(n_actions, a) - p);

    if (cfg.variant == Variant::Model1) {
      // dH/dz_k = -p_k (log p_k + H)
      const double h = b.entropy_term(i);
      g += sign * cfg.c2 * inv_n * (-(p.array() * (lp.array() + h))).matrix();
    } else {
      // dFL/dz_k = FL'(p_t) * p_t * (1[k == t] - p_k)
      const double dfl_dp = p_target < kProbabilityFloor ? 0.0 : focal_loss_dp(p_target, cfg.focal_alpha, cfg.focal_gamma);
      g += sign * cfg.c2 * inv_n * dfl_dp * p_target * (Eigen::VectorXd::Unit(n_actions, target) - p);
    }
  }
  return b;
}

namespace detail {

inline Eigen::MatrixXd states_matrix(const std::deque<Transition>& memory, std::size_t n_features) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(n_features), static_cast<Eigen::Index>(memory.size()));
  for (std::size_t i = 0; i < memory.size(); ++i) m.col(static_cast<Eigen::Index>(i)) = memory[i].state;
  return m;
}

inline std::vector<int> greedy_actions(const Mlp& actor, const Eigen::MatrixXd& states) {
  const Eigen::MatrixXd logits = forward_batch(actor, states);
  std::vector<int> out(static_cast<std::size_t>(logits.cols()));
  for (Eigen::Index i = 0; i < logits.cols(); ++i) out[static_cast<std::size_t>(i)] = argmax(logits.col(i));
  return out;
}

inline double greedy_accuracy(const Mlp& actor, const Eigen::MatrixXd& states, const std::vector<int>& labels) {
  const auto pred = greedy_actions(actor, states);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) correct += pred[i] == labels[i];
  return pred.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(pred.size());
}

inline void require_finite(double v, const char* term, std::size_t epoch) {
  if (!std::isfinite(v))
    throw NumericError("ppo", std::string("non-finite ") + term + " at epoch " + std::to_string(epoch));
}

}  // namespace detail

inline Mlp make_actor(const PpoConfig& cfg, std::size_t n_features, std::size_t n_classes, Rng& rng) {
  return make_mlp(mlp_topology(static_cast<int>(n_features), cfg.hidden_width, cfg.hidden_layers, static_cast<int>(n_classes)),
                  cfg.activation, OutputKind::Logits, rng);
}

inline Mlp make_critic(const PpoConfig& cfg, std::size_t n_features, Rng& rng) {
  return make_mlp(mlp_topology(static_cast<int>(n_features), cfg.hidden_width, cfg.hidden_layers, 1), cfg.activation,
                  OutputKind::Scalar, rng);
}

// Each epoch: roll out fresh episodes with the current actor into memory,
// then repeat updates_per_epoch times: estimate advantages with the critic,
// draw a random minibatch from memory, and take one Adam step on the critic
// followed by one on the actor.
inline TrainResult train(const PpoConfig& cfg, const DatasetTable& table, const DatasetTable* validation = nullptr) {
  cfg.validate();
  if (table.n_classes() < 2) throw InputError("ppo", "training needs at least 2 classes");
  if (table.rows() < cfg.batch_size)
    throw InputError("ppo", "training table has " + std::to_string(table.rows()) + " rows, fewer than batch size " +
                                std::to_string(cfg.batch_size));
  if (validation && validation->n_features() != table.n_features())
    throw InputError("ppo", "validation table feature count differs from training table");

  const std::size_t n_features = table.n_features();
  Rng init_rng(mix_seed(cfg.seed, 1));
  TrainResult result{make_actor(cfg, n_features, table.n_classes(), init_rng), make_critic(cfg, n_features, init_rng), {}};
  Mlp& actor = result.actor;
  Mlp& critic = result.critic;

  AdamState actor_opt = AdamState::for_net(actor, cfg.learning_rate);
  AdamState critic_opt = AdamState::for_net(critic, cfg.learning_rate);
  Rng episode_rng(mix_seed(cfg.seed, 2));
  Rng action_rng(mix_seed(cfg.seed, 3));
  Rng memory_rng(mix_seed(cfg.seed, 4));
  ReplayBuffer memory(cfg.memory());

  Eigen::MatrixXd val_states;
  if (validation) val_states = validation->features.transpose();

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    // Rollout with the current actor; it is the behaviour policy whose
    // log-probabilities become the ratio denominators.
    std::vector<EpisodeBatch> rollouts;
    for (std::size_t e = 0; e < cfg.episodes_per_epoch(); ++e) {
      rollouts.push_back(make_episode(table, cfg.batch_size, episode_rng));
      for (auto& tr : run_episode(ActorCritic{&actor, &critic}, rollouts.back(), ActionMode::Sample, action_rng))
        memory.push(std::move(tr));
    }

    EpochRecord rec;
    rec.epoch = epoch + 1;
    const auto& contents = memory.contents();
    const Eigen::MatrixXd all_states = detail::states_matrix(contents, n_features);
    std::vector<double> rewards;
    std::unique_ptr<bool[]> dones(new bool[contents.size()]);
    for (std::size_t i = 0; i < contents.size(); ++i) {
      rewards.push_back(contents[i].reward);
      dones[i] = contents[i].done;
    }
    const Transition& last = contents.back();

    for (std::size_t update = 0; update < cfg.updates_per_epoch; ++update) {
      // Advantages over the whole memory with the current critic, so traces
      // follow each stored episode in order.
      const Eigen::RowVectorXd all_values = forward_batch(critic, all_states).row(0);
      std::vector<double> values(all_values.data(), all_values.data() + all_values.size());
      values.push_back(!last.done && last.next_state ? forward(critic, *last.next_state)(0) : 0.0);
      const AdvantageSet gae = compute_gae(rewards, std::span<const bool>(dones.get(), contents.size()), values,
                                           cfg.discount, cfg.gae_lambda);

      const std::size_t n = std::min(cfg.batch_size, memory.size());
      const auto picked = memory.sample_indices(n, memory_rng);
      Minibatch mb;
      mb.states.resize(static_cast<Eigen::Index>(n_features), static_cast<Eigen::Index>(n));
      mb.logprob_old.resize(static_cast<Eigen::Index>(n));
      mb.advantages.resize(static_cast<Eigen::Index>(n));
      mb.return_targets.resize(static_cast<Eigen::Index>(n));
      for (std::size_t k = 0; k < n; ++k) {
        const auto i = picked[k];
        const auto kk = static_cast<Eigen::Index>(k);
        mb.states.col(kk) = contents[i].state;
        mb.actions.push_back(contents[i].action);
        mb.labels.push_back(contents[i].label);
        mb.logprob_old(kk) = contents[i].logprob_old;
        mb.advantages(kk) = gae.advantages(static_cast<Eigen::Index>(i));
        mb.return_targets(kk) = gae.return_targets(static_cast<Eigen::Index>(i));
      }
      if (cfg.normalize_advantages) mb.advantages = standardize(mb.advantages);

      // Critic: squared error against the GAE return targets.
      ForwardCache critic_cache;
      const Eigen::VectorXd v_pred = forward_batch(critic, mb.states, &critic_cache).row(0).transpose();
      Eigen::VectorXd value_term(static_cast<Eigen::Index>(n));
      for (Eigen::Index k = 0; k < value_term.size(); ++k) value_term(k) = value_loss(v_pred(k), mb.return_targets(k));
      const double critic_loss = value_term.mean();
      detail::require_finite(critic_loss, "critic loss", epoch);
      const Eigen::MatrixXd value_grad =
          (cfg.c1 * 2.0 / static_cast<double>(n) * (v_pred - mb.return_targets)).transpose();
      adam_step(critic_opt, critic, backward_batch(critic, critic_cache, value_grad));

      // Actor: combined surrogate + auxiliary term.
      ForwardCache actor_cache;
      Eigen::MatrixXd logit_grad;
      const SurrogateBatch terms = evaluate_surrogate(actor, mb, value_term, cfg, &logit_grad, &actor_cache);
      rec.actor_loss = -policy_term_mean(cfg.variant, terms);
      rec.critic_loss = critic_loss;
      rec.aux_term = aux_term_mean(cfg.variant, terms);
      rec.total_loss = total_loss(cfg.variant, terms, cfg.c1, cfg.c2, cfg.paper_literal_sign);
      detail::require_finite(rec.actor_loss, "actor surrogate", epoch);
      detail::require_finite(rec.aux_term, cfg.variant == Variant::Model1 ? "entropy term" : "focal term", epoch);
      detail::require_finite(rec.total_loss, "total loss", epoch);
      adam_step(actor_opt, actor, backward_batch(actor, actor_cache, logit_grad));
    }

    std::size_t correct = 0, seen = 0;
    for (const auto& ep : rollouts) {
      const auto pred = detail::greedy_actions(actor, ep.samples);
      for (std::size_t k = 0; k < pred.size(); ++k) correct += pred[k] == ep.labels[k];
      seen += pred.size();
    }
    rec.train_accuracy = static_cast<double>(correct) / static_cast<double>(seen);
    if (validation) rec.validation_accuracy = detail::greedy_accuracy(actor, val_states, validation->labels);
    result.history.epochs.push_back(rec);
  }
  return result;
}

// Greedy walk over the whole table in consecutive episodes of B samples;
// predictions from every episode are pooled before scoring.
template <Policy P>
MetricsReport evaluate(const P& policy, const DatasetTable& test, std::size_t batch_size,
                       std::vector<int>* predictions = nullptr) {
  if (batch_size == 0) throw InputError("ppo", "evaluation batch size must be positive");
  if (test.rows() == 0) throw InputError("ppo", "evaluation table is empty");
  std::vector<int> pred;
  pred.reserve(test.rows());
  Rng unused(0);
  for (std::size_t start = 0; start < test.rows(); start += batch_size) {
    std::vector<std::size_t> rows;
    for (std::size_t r = start; r < std::min(start + batch_size, test.rows()); ++r) rows.push_back(r);
    const EpisodeBatch ep = episode_from_rows(test, rows);
    for (const auto& tr : run_episode(policy, ep, ActionMode::Greedy, unused)) pred.push_back(tr.action);
  }
  auto rep = report(confusion(test.labels, pred, test.n_classes()));
  if (predictions) *predictions = std::move(pred);
  return rep;
}

inline MetricsReport evaluate(const Mlp& actor, const DatasetTable& test, std::size_t batch_size) {
  if (static_cast<std::size_t>(actor.output_size()) != test.n_classes())
    throw InputError("ppo", "actor has " + std::to_string(actor.output_size()) + " outputs but the table has " +
                                std::to_string(test.n_classes()) + " classes");
  if (static_cast<std::size_t>(actor.input_size()) != test.n_features())
    throw InputError("ppo", "expected " + std::to_string(actor.input_size()) + " features, found " +
                                std::to_string(test.n_features()));
  return evaluate(ActorCritic{&actor, nullptr}, test, batch_size);
}

}  // namespace imbppo
