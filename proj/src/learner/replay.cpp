#include "carmi/learner/replay.hpp"

#include <algorithm>
#include <cmath>

#include "carmi/binary_io.hpp"
#include "carmi/error.hpp"

namespace carmi {

SumTree::SumTree(std::size_t capacity) : capacity_(capacity) {
  while (base_ < capacity_) base_ <<= 1;
  tree_.assign(2 * base_, 0.0);
}

void SumTree::set(std::size_t leaf, double value) {
  std::size_t i = base_ + leaf;
  tree_[i] = value;
  for (i >>= 1; i >= 1; i >>= 1) tree_[i] = tree_[2 * i] + tree_[2 * i + 1];
}

std::size_t SumTree::find(double prefix) const {
  std::size_t i = 1;
  while (i < base_) {
    const double left = tree_[2 * i];
    if (prefix < left || tree_[2 * i + 1] <= 0.0) {
      i = 2 * i;
    } else {
      prefix -= left;
      i = 2 * i + 1;
    }
  }
  return std::min(i - base_, capacity_ - 1);
}

ReplayBuffer::ReplayBuffer(ReplayConfig cfg) : cfg_(cfg), tree_(cfg.capacity) {
  if (cfg_.capacity == 0) throw Error("replay capacity must be positive");
  items_.reserve(std::min<std::size_t>(cfg_.capacity, 1 << 16));
}

std::size_t ReplayBuffer::size() const {
  std::lock_guard lock(mu_);
  return items_.size();
}

void ReplayBuffer::push_locked(const Transition& t) {
  if (items_.size() < cfg_.capacity) {
    items_.push_back(t);
    priorities_.push_back(max_priority_);
  } else {
    items_[next_] = t;
    priorities_[next_] = max_priority_;
  }
  tree_.set(next_, std::pow(max_priority_, cfg_.alpha));
  next_ = (next_ + 1) % cfg_.capacity;
}

void ReplayBuffer::push_episode(const std::vector<Transition>& transitions) {
  std::lock_guard lock(mu_);
  for (const auto& t : transitions) push_locked(t);
}

ReplaySample ReplayBuffer::sample(std::size_t batch, Rng& rng) const {
  std::lock_guard lock(mu_);
  if (items_.empty()) throw Error("cannot sample from an empty replay buffer");
  ReplaySample out;
  const double total = tree_.total();
  const double n = static_cast<double>(items_.size());
  double max_w = 0.0;
  for (std::size_t b = 0; b < batch; ++b) {
    std::size_t i = tree_.find(rng.uniform() * total);
    if (i >= items_.size()) i = items_.size() - 1;
    const double prob = tree_.get(i) / total;
    const double w = std::pow(n * prob, -cfg_.beta);
    max_w = std::max(max_w, w);
    out.indices.push_back(i);
    out.weights.push_back(w);
  }
  for (double& w : out.weights) w /= max_w;
  return out;
}

void ReplayBuffer::update_priorities(const std::vector<std::size_t>& indices, const std::vector<double>& td_errors) {
  if (indices.size() != td_errors.size()) throw Error("update_priorities: size mismatch");
  std::lock_guard lock(mu_);
  for (std::size_t k = 0; k < indices.size(); ++k) {
    const double p = std::abs(td_errors[k]) + cfg_.epsilon;
    priorities_[indices[k]] = p;
    max_priority_ = std::max(max_priority_, p);
    tree_.set(indices[k], std::pow(p, cfg_.alpha));
  }
}

namespace {

void write_observation(std::ostream& out, const Observation& o) {
  bin::write<std::int32_t>(out, o.width);
  bin::write<std::int32_t>(out, o.height);
  bin::write_vec(out, o.map);
  bin::write_vec(out, o.vector);
}

Observation read_observation(std::istream& in) {
  Observation o;
  o.width = bin::read<std::int32_t>(in);
  o.height = bin::read<std::int32_t>(in);
  o.map = bin::read_vec<std::uint8_t>(in);
  o.vector = bin::read_vec<float>(in);
  return o;
}

}  // namespace

void write_transition(std::ostream& out, const Transition& t) {
  write_observation(out, t.obs);
  bin::write_vec(out, t.cond);
  bin::write_vec(out, t.mask.bits());
  bin::write<std::int32_t>(out, t.action);
  bin::write(out, t.reward);
  write_observation(out, t.next_obs);
  bin::write_vec(out, t.next_cond);
  bin::write<std::uint8_t>(out, t.done);
  bin::write(out, t.behavior_prob);
  bin::write(out, t.behavior_value);
  bin::write(out, t.value_offset);
  bin::write(out, t.next_value_offset);
}

Transition read_transition(std::istream& in) {
  Transition t;
  t.obs = read_observation(in);
  t.cond = bin::read_vec<float>(in);
  const auto bits = bin::read_vec<std::uint8_t>(in);
  t.mask = ActionMask(static_cast<int>(bits.size()));
  for (std::size_t i = 0; i < bits.size(); ++i) t.mask.set(static_cast<int>(i), bits[i] != 0);
  t.action = bin::read<std::int32_t>(in);
  t.reward = bin::read<float>(in);
  t.next_obs = read_observation(in);
  t.next_cond = bin::read_vec<float>(in);
  t.done = bin::read<std::uint8_t>(in) != 0;
  t.behavior_prob = bin::read<float>(in);
  t.behavior_value = bin::read<float>(in);
  t.value_offset = bin::read<float>(in);
  t.next_value_offset = bin::read<float>(in);
  return t;
}

void ReplayBuffer::save(std::ostream& out) const {
  std::lock_guard lock(mu_);
  bin::write<std::uint64_t>(out, cfg_.capacity);
  bin::write<std::uint64_t>(out, items_.size());
  bin::write<std::uint64_t>(out, next_);
  bin::write(out, max_priority_);
  for (const auto& t : items_) write_transition(out, t);
  bin::write_vec(out, priorities_);
}

void ReplayBuffer::load(std::istream& in) {
  std::lock_guard lock(mu_);
  if (bin::read<std::uint64_t>(in) != cfg_.capacity) throw Error("checkpoint replay capacity differs from config");
  const auto n = bin::read<std::uint64_t>(in);
  next_ = bin::read<std::uint64_t>(in);
  max_priority_ = bin::read<double>(in);
  if (n > cfg_.capacity || next_ >= cfg_.capacity) throw Error("checkpoint corrupt: replay bookkeeping");
  items_.clear();
  for (std::uint64_t i = 0; i < n; ++i) items_.push_back(read_transition(in));
  priorities_ = bin::read_vec<double>(in);
  if (priorities_.size() != items_.size()) throw Error("checkpoint corrupt: replay priorities");
  tree_ = SumTree(cfg_.capacity);
  for (std::size_t i = 0; i < priorities_.size(); ++i) tree_.set(i, std::pow(priorities_[i], cfg_.alpha));
}

}  // namespace carmi
