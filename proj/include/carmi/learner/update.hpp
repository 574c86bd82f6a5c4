#pragma once

#include <cmath>
#include <optional>
#include <span>
#include <type_traits>
#include <vector>

#include "carmi/learner/network.hpp"

namespace carmi {

struct LossConfig {
  double entropy_coef = 0.01;
  double value_coef = 0.5;
  double rho_bar = 10.0;  // truncation of pi/mu
};

template <class T>
struct LossSample {
  NetInput<T> input;
  ActionMask mask;
  int action = -1;
  double behavior_prob = 1.0;
  double value_target = 0.0;
  double value_offset = 0.0;  // added to the network's value output
  std::optional<double> advantage;  // y - V(s), detached, when absent
  double weight = 1.0;
};

struct LossTerms {
  double total = 0.0;
  double policy = 0.0;
  double value = 0.0;
  double entropy = 0.0;
  double td_error = 0.0;  // y - V(s)
};

/// Per-sample actor-critic loss
///   -w rho A log pi(a) - w c_H H(pi) + w c_V (V - y)^2 / 2
/// with rho = min(rho_bar, pi(a)/mu(a)) held constant. Adds the gradient,
/// scaled by `scale`, into `grad` when it is given.
template <class T>
LossTerms sample_loss(const Network<T>& net, const LossSample<T>& s, const LossConfig& cfg,
                      std::type_identity_t<Network<T>>* grad,
                      double scale = 1.0) {
  ForwardCache<T> cache;
  const NetOutput<T> out = forward(net, s.input, cache);
  const VecT<T> pi = masked_softmax(out.logits, s.mask);
  if (s.action < 0 || s.action >= s.mask.size() || !s.mask[s.action])
    throw Error("sample_loss: action is masked or out of range");

  const double v = static_cast<double>(out.value) + s.value_offset;
  const double td = s.value_target - v;
  const double adv = s.advantage ? *s.advantage : td;
  const double pa = static_cast<double>(pi[s.action]);
  const double rho = std::min(cfg.rho_bar, pa / std::max(s.behavior_prob, 1e-12));
  double entropy = 0.0;
  for (int i = 0; i < s.mask.size(); ++i)
    if (s.mask[i] && pi[i] > T(0)) entropy -= static_cast<double>(pi[i]) * std::log(static_cast<double>(pi[i]));

  LossTerms t;
  t.policy = -s.weight * rho * adv * std::log(std::max(pa, 1e-30));
  t.entropy = entropy;
  t.value = s.weight * cfg.value_coef * 0.5 * td * td;
  t.total = t.policy - s.weight * cfg.entropy_coef * entropy + t.value;
  t.td_error = td;

  if (grad) {
    VecT<T> dlogits = VecT<T>::Zero(out.logits.size());
    const double pg = -s.weight * rho * adv;
    const double ec = s.weight * cfg.entropy_coef;
    for (int i = 0; i < s.mask.size(); ++i) {
      if (!s.mask[i]) continue;
      const double p = static_cast<double>(pi[i]);
      double d = pg * ((i == s.action ? 1.0 : 0.0) - p);
      if (p > 0.0) d += ec * p * (std::log(p) + entropy);
      dlogits[i] = static_cast<T>(scale * d);
    }
    const T dvalue = static_cast<T>(scale * s.weight * cfg.value_coef * (v - s.value_target));
    backward(net, s.input, cache, dlogits, dvalue, *grad);
  }
  return t;
}

/// Rescales `grad` so its global L2 norm is at most `max_norm`; returns the
/// norm before clipping.
template <class T>
double clip_grad_norm(Network<T>& grad, double max_norm) {
  double sq = 0.0;
  grad.for_each([&](const MatT<T>& m) { sq += static_cast<double>(m.squaredNorm()); });
  const double norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0.0) {
    const T f = static_cast<T>(max_norm / norm);
    grad.for_each([&](MatT<T>& m) { m *= f; });
  }
  return norm;
}

struct AdamConfig {
  double lr = 5e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

class Adam {
 public:
  Adam() = default;
  Adam(const NetConfig& cfg, AdamConfig opt) : opt_(opt), m_(cfg), v_(cfg) {}

  void step(Network<float>& net, const Network<float>& grad);

  long steps() const { return t_; }
  const AdamConfig& config() const { return opt_; }
  Network<float>& first_moment() { return m_; }
  Network<float>& second_moment() { return v_; }
  void set_steps(long t) { t_ = t; }

 private:
  AdamConfig opt_;
  Network<float> m_, v_;
  long t_ = 0;
};

/// Generalized advantage estimates over one episode from stored values;
/// the value after the final step is 0.
std::vector<double> gae_advantages(std::span<const double> rewards, std::span<const double> values, double gamma,
                                   double lambda);

}  // namespace carmi
