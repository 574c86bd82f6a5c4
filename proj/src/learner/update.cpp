#include "carmi/learner/update.hpp"

namespace carmi {

void Adam::step(Network<float>& net, const Network<float>& grad) {
  ++t_;
  const double c1 = 1.0 - std::pow(opt_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(opt_.beta2, static_cast<double>(t_));
  const float lr = static_cast<float>(opt_.lr * std::sqrt(c2) / c1);
  const float b1 = static_cast<float>(opt_.beta1), b2 = static_cast<float>(opt_.beta2);
  const float eps = static_cast<float>(opt_.eps);

  std::vector<MatT<float>*> params, ms, vs;
  std::vector<const MatT<float>*> gs;
  net.for_each([&](MatT<float>& m) { params.push_back(&m); });
  m_.for_each([&](MatT<float>& m) { ms.push_back(&m); });
  v_.for_each([&](MatT<float>& m) { vs.push_back(&m); });
  grad.for_each([&](const MatT<float>& m) { gs.push_back(&m); });
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto m = ms[k]->array();
    auto v = vs[k]->array();
    const auto& g = gs[k]->array();
    m = b1 * m + (1.0f - b1) * g;
    v = b2 * v + (1.0f - b2) * g.square();
    params[k]->array() -= lr * m / (v.sqrt() + eps);
  }
}

std::vector<double> gae_advantages(std::span<const double> rewards, std::span<const double> values, double gamma,
                                   double lambda) {
  if (rewards.size() != values.size()) throw Error("gae_advantages: rewards and values differ in length");
  std::vector<double> adv(rewards.size());
  double running = 0.0;
  for (std::size_t k = rewards.size(); k-- > 0;) {
    const double next = k + 1 < values.size() ? values[k + 1] : 0.0;
    const double delta = rewards[k] + gamma * next - values[k];
    running = delta + gamma * lambda * running;
    adv[k] = running;
  }
  return adv;
}

}  // namespace carmi
