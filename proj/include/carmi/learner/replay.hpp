#pragma once

#include <cstdint>
#include <iosfwd>
#include <mutex>
#include <vector>

#include "carmi/game/actions.hpp"
#include "carmi/game/observation.hpp"
#include "carmi/rng.hpp"

namespace carmi {

/// One agent decision. Conditions are stored alongside the observations
/// because the CARMI condition carries the running summary.
struct Transition {
  Observation obs;
  std::vector<float> cond;
  ActionMask mask;
  int action = -1;
  float reward = 0.0f;
  Observation next_obs;
  std::vector<float> next_cond;
  bool done = false;
  float behavior_prob = 1.0f;
  float behavior_value = 0.0f;  // full baseline, offset included
  // Known part of the value baseline at obs and next_obs (the current goal
  // distance for CARMI, 0 otherwise); the network learns the remainder.
  float value_offset = 0.0f;
  float next_value_offset = 0.0f;

  friend bool operator==(const Transition&, const Transition&) = default;
};

/// Binary tree of partial sums over leaf priorities.
class SumTree {
 public:
  explicit SumTree(std::size_t capacity = 0);
  std::size_t capacity() const { return capacity_; }
  void set(std::size_t leaf, double value);
  double get(std::size_t leaf) const { return tree_[base_ + leaf]; }
  double total() const { return tree_.empty() ? 0.0 : tree_[1]; }
  /// Leaf whose cumulative range contains `prefix` (0 <= prefix < total).
  std::size_t find(double prefix) const;

 private:
  std::size_t capacity_ = 0;
  std::size_t base_ = 1;
  std::vector<double> tree_;
};

struct ReplayConfig {
  std::size_t capacity = 20000;
  double alpha = 0.6;
  double beta = 0.4;
  double epsilon = 1e-3;
};

struct ReplaySample {
  std::vector<std::size_t> indices;
  std::vector<double> weights;  // importance weights, max-normalized over the batch
};

/// Proportional prioritized replay. Safe for concurrent producers and a
/// single consumer; transitions are copied in whole episodes, so nothing
/// from an unfinished episode is ever visible.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(ReplayConfig cfg = {});

  void push_episode(const std::vector<Transition>& transitions);
  /// Throws carmi::Error when empty.
  ReplaySample sample(std::size_t batch, Rng& rng) const;
  /// Sets priority |td_error| + epsilon for the sampled slots.
  void update_priorities(const std::vector<std::size_t>& indices, const std::vector<double>& td_errors);

  const Transition& at(std::size_t i) const { return items_[i]; }
  double priority(std::size_t i) const { return priorities_[i]; }
  std::size_t size() const;
  const ReplayConfig& config() const { return cfg_; }

  void save(std::ostream& out) const;
  void load(std::istream& in);

 private:
  void push_locked(const Transition& t);

  ReplayConfig cfg_;
  std::vector<Transition> items_;
  std::vector<double> priorities_;  // raw priorities, before the alpha exponent
  SumTree tree_;
  std::size_t next_ = 0;
  double max_priority_ = 1.0;
  mutable std::mutex mu_;
};

// Binary helpers shared with the checkpoint writer.
void write_transition(std::ostream& out, const Transition& t);
Transition read_transition(std::istream& in);

}  // namespace carmi
