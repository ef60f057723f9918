#pragma once

// Per-transition PPO objective terms and their combination into the
// minimised total loss for the three model variants.

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/Dense>

#include "imbppo/error.hpp"

namespace imbppo {

// Model 1: clipped surrogate + value loss - entropy bonus.
// Model 2: clipped surrogate + value loss + focal loss.
// Model 3: clipped surrogate with the beta*log-pi term + value loss + focal loss.
enum class Variant { Model1 = 1, Model2 = 2, Model3 = 3 };

inline Variant parse_variant(int v) {
  if (v < 1 || v > 3) throw InputError("ppo", "model variant must be 1, 2 or 3, got " + std::to_string(v));
  return static_cast<Variant>(v);
}

inline constexpr double kProbabilityFloor = 1e-12;

inline double prob_ratio(double logprob_new, double logprob_old) { return std::exp(logprob_new - logprob_old); }

inline double clip_objective(double ratio, double advantage, double epsilon) {
  const double clipped = std::clamp(ratio, 1.0 - epsilon, 1.0 + epsilon);
  return std::min(ratio * advantage, clipped * advantage);
}

// d clip_objective / d ratio: zero when the clipped branch is the minimum.
inline double clip_objective_dratio(double ratio, double advantage, double epsilon) {
  const double clipped = std::clamp(ratio, 1.0 - epsilon, 1.0 + epsilon);
  return ratio * advantage <= clipped * advantage ? advantage : 0.0;
}

inline double ncpi_objective(double ratio, double advantage, double logprob_new, double beta) {
  return ratio * advantage + beta * logprob_new;
}

// The log-policy term sits outside the clip: it carries no ratio to bound.
inline double nclip_objective(double ratio, double advantage, double logprob_new, double epsilon, double beta) {
  return clip_objective(ratio, advantage, epsilon) + beta * logprob_new;
}

inline double checked_probability(double p) {
  if (!(p <= 1.0)) throw InputError("ppo", "focal loss: probability " + std::to_string(p) + " is not <= 1");
  return std::max(p, kProbabilityFloor);
}

// -alpha * (1 - p)^gamma * log(p), with p floored at 1e-12.
inline double focal_loss(double p, double alpha, double gamma) {
  p = checked_probability(p);
  return -alpha * std::pow(1.0 - p, gamma) * std::log(p);
}

// d focal_loss / d p. The (1-p)^(gamma-1) log p factor tends to 0 as p -> 1.
inline double focal_loss_dp(double p, double alpha, double gamma) {
  p = checked_probability(p);
  const double q = 1.0 - p;
  const double modulating_term = (gamma == 0.0 || q == 0.0) ? 0.0 : gamma * std::pow(q, gamma - 1.0) * std::log(p);
  return alpha * (modulating_term - std::pow(q, gamma) / p);
}

inline double value_loss(double v_pred, double v_target) {
  const double d = v_pred - v_target;
  return d * d;
}

inline double entropy_bonus(const Eigen::VectorXd& probs) {
  double h = 0.0;
  for (Eigen::Index k = 0; k < probs.size(); ++k)
    if (probs(k) > 0.0) h -= probs(k) * std::log(probs(k));
  return h;
}

// Per-transition terms evaluated over one minibatch.
struct SurrogateBatch {
  Eigen::VectorXd ratio;
  Eigen::VectorXd chosen_prob;  // pi(a_t | s_t) under the current actor
  Eigen::VectorXd clip_term;
  Eigen::VectorXd nclip_term;
  Eigen::VectorXd focal_term;
  Eigen::VectorXd entropy_term;
  Eigen::VectorXd value_term;

  Eigen::Index size() const { return ratio.size(); }
};

// Sign applied to the auxiliary (entropy or focal) mean in the minimised loss.
// The default minimises focal loss; paper_literal keeps the "+c2" of the
// maximised objective, which after negation maximises it.
inline double aux_sign(Variant variant, bool paper_literal) {
  if (variant == Variant::Model1) return -1.0;
  return paper_literal ? -1.0 : 1.0;
}

inline double policy_term_mean(Variant variant, const SurrogateBatch& b) {
  return variant == Variant::Model3 ? b.nclip_term.mean() : b.clip_term.mean();
}

inline double aux_term_mean(Variant variant, const SurrogateBatch& b) {
  return variant == Variant::Model1 ? b.entropy_term.mean() : b.focal_term.mean();
}

// Scalar to minimise:
//   Model 1: -mean(clip) + c1 mean(value) - c2 mean(entropy)
//   Model 2: -mean(clip) + c1 mean(value) + c2 mean(focal)
//   Model 3: -mean(nclip) + c1 mean(value) + c2 mean(focal)
inline double total_loss(Variant variant, const SurrogateBatch& b, double c1, double c2, bool paper_literal = false) {
  if (b.size() == 0) throw InputError("ppo", "total loss over an empty minibatch");
  return -policy_term_mean(variant, b) + c1 * b.value_term.mean() +
         aux_sign(variant, paper_literal) * c2 * aux_term_mean(variant, b);
}

}  // namespace imbppo
