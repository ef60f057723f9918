#pragma once

#include <deque>
#include <vector>

#include "imbppo/environment.hpp"
#include "imbppo/error.hpp"
#include "imbppo/random.hpp"

namespace imbppo {

// Bounded FIFO experience memory. Oldest transitions are evicted first.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
    if (capacity == 0) throw InputError("ppo", "replay buffer capacity must be positive");
  }

  void push(Transition tr) {
    if (memory_.size() == capacity_) memory_.pop_front();
    memory_.push_back(std::move(tr));
  }

  std::size_t size() const { return memory_.size(); }
  std::size_t capacity() const { return capacity_; }
  bool empty() const { return memory_.empty(); }
  const Transition& operator[](std::size_t i) const { return memory_[i]; }
  const std::deque<Transition>& contents() const { return memory_; }

  // n distinct positions, uniformly at random.
  std::vector<std::size_t> sample_indices(std::size_t n, Rng& rng) const {
    if (n > memory_.size())
      throw InputError("ppo", "cannot sample " + std::to_string(n) + " transitions from a buffer of " +
                                  std::to_string(memory_.size()));
    return sample_without_replacement(rng, memory_.size(), n);
  }

  std::vector<Transition> sample(std::size_t n, Rng& rng) const {
    std::vector<Transition> out;
    for (auto i : sample_indices(n, rng)) out.push_back(memory_[i]);
    return out;
  }

  std::vector<Transition> sample(std::size_t n, std::uint64_t seed) const {
    Rng rng(mix_seed(seed, 0xB0F));
    return sample(n, rng);
  }

 private:
  std::size_t capacity_;
  std::deque<Transition> memory_;
};

}  // namespace imbppo
