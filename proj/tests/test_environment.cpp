#include <algorithm>
#include <numeric>
#include <set>

#include <gtest/gtest.h>

#include "imbppo/environment.hpp"
#include "oracles.hpp"

using namespace imbppo;

namespace {

// Looks up the true label by exact feature match; always right.
struct OraclePolicy {
  const EpisodeBatch* episode;
  Eigen::VectorXd log_probs(const Eigen::VectorXd& s) const {
    for (Eigen::Index c = 0; c < episode->samples.cols(); ++c)
      if (episode->samples.col(c) == s) {
        Eigen::VectorXd lp = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(episode->n_classes), -50.0);
        lp(episode->labels[static_cast<std::size_t>(c)]) = 0.0;
        return lp;
      }
    return Eigen::VectorXd::Zero(static_cast<Eigen::Index>(episode->n_classes));
  }
  double value(const Eigen::VectorXd&) const { return 0.0; }
};

struct UniformPolicy {
  std::size_t n_classes;
  Eigen::VectorXd log_probs(const Eigen::VectorXd&) const {
    return Eigen::VectorXd::Constant(static_cast<Eigen::Index>(n_classes), -std::log(static_cast<double>(n_classes)));
  }
  double value(const Eigen::VectorXd&) const { return 0.5; }
};

struct WrongArityPolicy {
  Eigen::VectorXd log_probs(const Eigen::VectorXd&) const { return Eigen::VectorXd::Zero(7); }
  double value(const Eigen::VectorXd&) const { return 0.0; }
};

}  // namespace

TEST(MakeEpisode, FullDrawIsPermutation) {
  const auto t = oracle::blobs({6, 4}, {0.0, 1.0}, 1.0, 2, 1);
  const auto ep = make_episode(t, t.rows(), 3);
  std::vector<std::size_t> rows = ep.source_rows;
  std::sort(rows.begin(), rows.end());
  std::vector<std::size_t> all(t.rows());
  std::iota(all.begin(), all.end(), 0);
  EXPECT_EQ(rows, all);
}

TEST(MakeEpisode, SameSeedSameEpisode) {
  const auto t = oracle::blobs({60, 40}, {0.0, 1.0}, 1.0, 2, 1);
  const auto a = make_episode(t, 32, 11);
  const auto b = make_episode(t, 32, 11);
  EXPECT_EQ(a.source_rows, b.source_rows);
  EXPECT_EQ(a.samples, b.samples);
}

TEST(MakeEpisode, DistinctRowsFromLargeTable) {
  const auto t = oracle::blobs({9000, 1000}, {0.0, 1.0}, 1.0, 2, 1);
  const auto ep = make_episode(t, 256, 5);
  EXPECT_EQ(ep.size(), 256u);
  EXPECT_EQ(std::set<std::size_t>(ep.source_rows.begin(), ep.source_rows.end()).size(), 256u);
  for (std::size_t k = 0; k < ep.size(); ++k) EXPECT_EQ(ep.labels[k], t.labels[ep.source_rows[k]]);
}

TEST(MakeEpisode, OversizedEpisodeRejected) {
  const auto t = oracle::blobs({3, 2}, {0.0, 1.0}, 1.0, 2, 1);
  EXPECT_THROW(make_episode(t, 6, 0), InputError);
  EXPECT_THROW(make_episode(t, 0, 0), InputError);
}

TEST(ClassificationEnv, ResetReturnsFirstSample) {
  const auto t = oracle::blobs({5, 5}, {0.0, 1.0}, 1.0, 3, 1);
  const auto ep = make_episode(t, 4, 2);
  ClassificationEnv env(ep);
  EXPECT_EQ(env.reset(), ep.samples.col(0));
  EXPECT_EQ(env.t(), 1u);
  env.step(0);
  EXPECT_EQ(env.t(), 2u);
  EXPECT_EQ(env.reset(), ep.samples.col(0));
  EXPECT_EQ(env.t(), 1u);
}

TEST(ClassificationEnv, SingleStepEpisodeTerminatesImmediately) {
  const auto t = oracle::blobs({2, 2}, {0.0, 1.0}, 1.0, 1, 1);
  const auto ep = make_episode(t, 1, 0);
  ClassificationEnv env(ep);
  env.reset();
  const auto r = env.step(0);
  EXPECT_TRUE(r.done);
  EXPECT_FALSE(r.next_state.has_value());
  EXPECT_THROW(env.step(0), InputError);
}

TEST(ClassificationEnv, RewardSignsAndTerminalStep) {
  const auto t = oracle::blobs({4, 4}, {0.0, 1.0}, 1.0, 1, 1);
  const auto ep = make_episode(t, 3, 4);
  ClassificationEnv env(ep);
  env.reset();
  const int l0 = env.label();
  auto r = env.step(l0);
  EXPECT_EQ(r.reward, 1.0);
  EXPECT_FALSE(r.done);
  ASSERT_TRUE(r.next_state.has_value());
  EXPECT_EQ(*r.next_state, ep.samples.col(1));
  r = env.step(1 - env.label());
  EXPECT_EQ(r.reward, -1.0);
  EXPECT_FALSE(r.done);
  r = env.step(1 - env.label());
  EXPECT_TRUE(r.done);
  EXPECT_EQ(r.reward, -1.0);
}

TEST(ClassificationEnv, OutOfRangeActionRejected) {
  const auto t = oracle::blobs({4, 4}, {0.0, 1.0}, 1.0, 1, 1);
  const auto ep = make_episode(t, 3, 4);
  ClassificationEnv env(ep);
  env.reset();
  EXPECT_THROW(env.step(2), InputError);
  EXPECT_THROW(env.step(-1), InputError);
}

TEST(RunEpisode, OraclePolicyEarnsFullReward) {
  const auto t = oracle::blobs({200, 100}, {0.0, 3.0}, 1.0, 2, 1);
  const auto ep = make_episode(t, 256, 6);
  Rng rng(0);
  const auto trs = run_episode(OraclePolicy{&ep}, ep, ActionMode::Greedy, rng);
  double total = 0.0;
  for (const auto& tr : trs) total += tr.reward;
  EXPECT_EQ(total, 256.0);
}

TEST(RunEpisode, ExactlyOneTerminalPerEpisode) {
  const auto t = oracle::blobs({400, 400}, {0.0, 3.0}, 1.0, 2, 1);
  Rng rng(1);
  const auto ep = make_episode(t, 256, rng);
  const auto trs = run_episode(UniformPolicy{2}, ep, ActionMode::Sample, rng);
  ASSERT_EQ(trs.size(), 256u);
  EXPECT_EQ(std::count_if(trs.begin(), trs.end(), [](const Transition& tr) { return tr.done; }), 1);
  EXPECT_TRUE(trs.back().done);
  for (std::size_t k = 0; k < trs.size(); ++k) {
    EXPECT_EQ(trs[k].label, ep.labels[k]);
    EXPECT_EQ(trs[k].value_old, 0.5);
    EXPECT_DOUBLE_EQ(trs[k].logprob_old, std::log(0.5));
    if (k + 1 < trs.size()) EXPECT_EQ(*trs[k].next_state, trs[k + 1].state);
  }
}

TEST(RunEpisode, UniformPolicyAccuracyNearOneOverC) {
  const std::size_t c = 4;
  const auto t = oracle::blobs({250, 250, 250, 250}, {0.0, 1.0, 2.0, 3.0}, 1.0, 2, 1);
  Rng rng(2);
  std::size_t correct = 0, total = 0;
  for (int e = 0; e < 200; ++e) {
    const auto ep = make_episode(t, 64, rng);
    for (const auto& tr : run_episode(UniformPolicy{c}, ep, ActionMode::Sample, rng)) {
      correct += tr.reward > 0;
      ++total;
    }
  }
  // 12,800 Bernoulli(0.25) draws: standard error ~0.0038.
  EXPECT_NEAR(static_cast<double>(correct) / static_cast<double>(total), 0.25, 0.02);
}

TEST(RunEpisode, RewardTotalMatchesCorrectMinusIncorrect) {
  const auto t = oracle::blobs({300, 200, 100}, {0.0, 1.0, 2.0}, 1.0, 3, 2);
  Rng rng(3);
  for (int e = 0; e < 200; ++e) {
    const std::size_t b = 1 + uniform_index(rng, 64);
    const auto ep = make_episode(t, b, rng);
    const auto trs = run_episode(UniformPolicy{3}, ep, ActionMode::Sample, rng);
    ASSERT_EQ(trs.size(), b);
    double total = 0.0;
    long correct = 0;
    for (const auto& tr : trs) {
      total += tr.reward;
      correct += tr.action == tr.label;
    }
    EXPECT_EQ(total, static_cast<double>(correct) - static_cast<double>(static_cast<long>(b) - correct));
  }
}

TEST(RunEpisode, PolicyArityMismatchRejected) {
  const auto t = oracle::blobs({5, 5}, {0.0, 1.0}, 1.0, 2, 1);
  const auto ep = make_episode(t, 4, 0);
  Rng rng(0);
  EXPECT_THROW(run_episode(WrongArityPolicy{}, ep, ActionMode::Greedy, rng), InputError);
}

TEST(SampleCategorical, FrequenciesFollowProbabilities) {
  Rng rng(4);
  const Eigen::Vector3d lp = Eigen::Vector3d(0.2, 0.5, 0.3).array().log();
  std::array<int, 3> counts{};
  for (int i = 0; i < 20000; ++i) ++counts[static_cast<std::size_t>(sample_categorical(lp, rng))];
  EXPECT_NEAR(counts[0] / 20000.0, 0.2, 0.015);
  EXPECT_NEAR(counts[1] / 20000.0, 0.5, 0.015);
  EXPECT_NEAR(counts[2] / 20000.0, 0.3, 0.015);
}
