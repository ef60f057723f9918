#pragma once

#include <memory>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "imbppo/environment.hpp"
#include "imbppo/error.hpp"

namespace imbppo {

struct AdvantageSet {
  Eigen::VectorXd advantages;
  Eigen::VectorXd return_targets;  // advantage + V(s_t)
};

// Generalized advantage estimation over a sequence that may hold several
// episodes back to back. values has one entry per step plus a bootstrap for
// the state after the last step; a done flag cuts both the bootstrap and the
// trace, so the bootstrap only matters when the sequence ends mid-episode.
inline AdvantageSet compute_gae(std::span<const double> rewards, std::span<const bool> dones,
                                std::span<const double> values, double discount, double lambda) {
  const std::size_t n = rewards.size();
  if (dones.size() != n || values.size() != n + 1)
    throw InputError("ppo", "GAE: expected " + std::to_string(n) + " dones and " + std::to_string(n + 1) +
                                " values, found " + std::to_string(dones.size()) + " and " + std::to_string(values.size()));
  AdvantageSet out;
  out.advantages.resize(static_cast<Eigen::Index>(n));
  out.return_targets.resize(static_cast<Eigen::Index>(n));
  double running = 0.0;
  for (std::size_t t = n; t-- > 0;) {
    const double not_done = dones[t] ? 0.0 : 1.0;
    const double delta = rewards[t] + discount * values[t + 1] * not_done - values[t];
    running = delta + discount * lambda * not_done * running;
    const auto i = static_cast<Eigen::Index>(t);
    out.advantages(i) = running;
    out.return_targets(i) = running + values[t];
  }
  return out;
}

inline AdvantageSet compute_gae(std::span<const Transition> transitions, std::span<const double> values,
                                double discount, double lambda) {
  std::vector<double> rewards;
  rewards.reserve(transitions.size());
  for (const auto& tr : transitions) rewards.push_back(tr.reward);
  std::unique_ptr<bool[]> dones(new bool[transitions.size()]);
  for (std::size_t i = 0; i < transitions.size(); ++i) dones[i] = transitions[i].done;
  return compute_gae(rewards, std::span<const bool>(dones.get(), transitions.size()), values, discount, lambda);
}

}  // namespace imbppo
