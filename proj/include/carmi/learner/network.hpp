#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "carmi/error.hpp"
#include "carmi/game/actions.hpp"
#include "carmi/game/types.hpp"
#include "carmi/rng.hpp"

namespace carmi {

/// Input planes built from an Observation: hero 0..2, enemy, enemy hp
/// fraction, cover, portal, and Chebyshev distance to the nearest enemy.
inline constexpr int kInputPlanes = 8;
/// Per hero: shoot x 8, stab x 8, super x 3; then Skip.
inline constexpr int kHeroVectorial = 2 * kMaxEnemies + kNumSuperSlots;
inline constexpr int kVectorialLogits = kNumHeroes * kHeroVectorial + 1;

struct NetConfig {
  int width = 10;
  int height = 10;
  int vector_dim = 35;  // observation vector plus condition
  int conv1 = 8;
  int conv2 = 8;
  int map_dense = 64;
  int vec_dense = 64;
  int fused = 64;

  int cells() const { return width * height; }
  int num_actions() const { return ActionSpace(width, height).size(); }
  friend bool operator==(const NetConfig&, const NetConfig&) = default;
};

void to_json(nlohmann::json& j, const NetConfig& c);
void from_json(const nlohmann::json& j, NetConfig& c);

template <class T>
using MatT = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;
template <class T>
using VecT = Eigen::Matrix<T, Eigen::Dynamic, 1>;

template <class T>
struct NetInput {
  MatT<T> planes;  // kInputPlanes x cells, column = y * W + x
  VecT<T> vec;     // observation vector ++ condition
};

/// Weights of the policy/value network. The same type doubles as a gradient
/// accumulator and as Adam moment storage.
template <class T>
struct Network {
  NetConfig cfg;
  MatT<T> w1, b1;     // conv 3x3: conv1 x (planes*9)
  MatT<T> w2, b2;     // conv 3x3: conv2 x (conv1*9)
  MatT<T> wm, bm;     // map dense over the flattened conv2 features
  MatT<T> wv, bv;     // vector dense
  MatT<T> wf, bf;     // fused dense over [map; vector]
  MatT<T> wl, bl;     // vectorial logits
  MatT<T> wval, bval; // value
  MatT<T> u;          // per-hero 1x1 conv over conv2 features (heroes x conv2)
  MatT<T> g;          // fused-state modulation of u ((heroes*conv2) x fused)
  MatT<T> p, pb;      // per-hero move bias from the fused state

  Network() = default;
  explicit Network(const NetConfig& c) : cfg(c) {
    const int cells = c.cells();
    w1 = MatT<T>::Zero(c.conv1, kInputPlanes * 9);
    b1 = MatT<T>::Zero(c.conv1, 1);
    w2 = MatT<T>::Zero(c.conv2, c.conv1 * 9);
    b2 = MatT<T>::Zero(c.conv2, 1);
    wm = MatT<T>::Zero(c.map_dense, c.conv2 * cells);
    bm = MatT<T>::Zero(c.map_dense, 1);
    wv = MatT<T>::Zero(c.vec_dense, c.vector_dim);
    bv = MatT<T>::Zero(c.vec_dense, 1);
    wf = MatT<T>::Zero(c.fused, c.map_dense + c.vec_dense);
    bf = MatT<T>::Zero(c.fused, 1);
    wl = MatT<T>::Zero(kVectorialLogits, c.fused);
    bl = MatT<T>::Zero(kVectorialLogits, 1);
    wval = MatT<T>::Zero(1, c.fused);
    bval = MatT<T>::Zero(1, 1);
    u = MatT<T>::Zero(kNumHeroes, c.conv2);
    g = MatT<T>::Zero(kNumHeroes * c.conv2, c.fused);
    p = MatT<T>::Zero(kNumHeroes, c.fused);
    pb = MatT<T>::Zero(kNumHeroes, 1);
  }

  /// Visits every tensor in a fixed order (the serialization order).
  template <class F>
  void for_each(F&& f) {
    for (MatT<T>* m : {&w1, &b1, &w2, &b2, &wm, &bm, &wv, &bv, &wf, &bf, &wl, &bl, &wval, &bval, &u, &g, &p, &pb})
      f(*m);
  }
  template <class F>
  void for_each(F&& f) const {
    for (const MatT<T>* m :
         {&w1, &b1, &w2, &b2, &wm, &bm, &wv, &bv, &wf, &bf, &wl, &bl, &wval, &bval, &u, &g, &p, &pb})
      f(*m);
  }

  std::size_t num_params() const {
    std::size_t n = 0;
    for_each([&](const MatT<T>& m) { n += static_cast<std::size_t>(m.size()); });
    return n;
  }

  void set_zero() {
    for_each([](MatT<T>& m) { m.setZero(); });
  }

  /// He-uniform hidden layers; output heads start small so the initial
  /// policy is close to uniform over legal actions.
  void init(Rng& rng) {
    auto fill = [&](MatT<T>& m, double scale) {
      for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<T>(rng.uniform(-scale, scale));
    };
    auto he = [](Eigen::Index fan_in) { return std::sqrt(6.0 / static_cast<double>(fan_in)); };
    set_zero();
    fill(w1, he(w1.cols()));
    fill(w2, he(w2.cols()));
    fill(wm, he(wm.cols()));
    fill(wv, he(wv.cols()));
    fill(wf, he(wf.cols()));
    fill(wl, 0.01);
    fill(wval, 0.01);
    fill(u, 0.01);
    fill(g, 0.01);
    fill(p, 0.01);
  }

  std::vector<T> flatten() const {
    std::vector<T> out;
    out.reserve(num_params());
    for_each([&](const MatT<T>& m) { out.insert(out.end(), m.data(), m.data() + m.size()); });
    return out;
  }

  void unflatten(const std::vector<T>& flat) {
    std::size_t at = 0;
    for_each([&](MatT<T>& m) {
      std::copy(flat.begin() + static_cast<std::ptrdiff_t>(at),
                flat.begin() + static_cast<std::ptrdiff_t>(at + static_cast<std::size_t>(m.size())), m.data());
      at += static_cast<std::size_t>(m.size());
    });
  }

  template <class U>
  Network<U> cast() const {
    Network<U> out(cfg);
    auto src = flatten();
    out.unflatten(std::vector<U>(src.begin(), src.end()));
    return out;
  }
};

/// Activations kept for the backward pass.
template <class T>
struct ForwardCache {
  MatT<T> col1, a1, col2, a2, mod;  // mod: heroes x conv2 effective 1x1 weights
  VecT<T> hm, hv, hcat, h;
};

/// Full flat logits (one per action index) and the value.
template <class T>
struct NetOutput {
  VecT<T> logits;
  T value{};
};

namespace detail {

// 3x3 zero-padded patches: row = channel * 9 + (dy + 1) * 3 + (dx + 1), column = cell.
template <class T>
void im2col(const MatT<T>& in, int w, int h, MatT<T>& col) {
  const Eigen::Index ch = in.rows();
  col.setZero(ch * 9, static_cast<Eigen::Index>(w) * h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const Eigen::Index cell = y * w + x;
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx) {
          const int sx = x + dx, sy = y + dy;
          if (sx < 0 || sy < 0 || sx >= w || sy >= h) continue;
          const Eigen::Index k = (dy + 1) * 3 + (dx + 1);
          const Eigen::Index src = sy * w + sx;
          for (Eigen::Index c = 0; c < ch; ++c) col(c * 9 + k, cell) = in(c, src);
        }
    }
}

template <class T>
void col2im(const MatT<T>& col, int w, int h, MatT<T>& out) {
  const Eigen::Index ch = col.rows() / 9;
  out.setZero(ch, static_cast<Eigen::Index>(w) * h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const Eigen::Index cell = y * w + x;
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx) {
          const int sx = x + dx, sy = y + dy;
          if (sx < 0 || sy < 0 || sx >= w || sy >= h) continue;
          const Eigen::Index k = (dy + 1) * 3 + (dx + 1);
          const Eigen::Index dst = sy * w + sx;
          for (Eigen::Index c = 0; c < ch; ++c) out(c, dst) += col(c * 9 + k, cell);
        }
    }
}

}  // namespace detail

template <class T>
NetOutput<T> forward(const Network<T>& net, const NetInput<T>& in, ForwardCache<T>& c) {
  const NetConfig& cfg = net.cfg;
  const int W = cfg.width, H = cfg.height, cells = cfg.cells();
  detail::im2col<T>(in.planes, W, H, c.col1);
  c.a1 = ((net.w1 * c.col1).colwise() + net.b1.col(0)).cwiseMax(T(0));
  detail::im2col<T>(c.a1, W, H, c.col2);
  c.a2 = ((net.w2 * c.col2).colwise() + net.b2.col(0)).cwiseMax(T(0));

  const Eigen::Map<const VecT<T>> flat(c.a2.data(), c.a2.size());
  c.hm = (net.wm * flat + net.bm.col(0)).cwiseMax(T(0));
  c.hv = (net.wv * in.vec + net.bv.col(0)).cwiseMax(T(0));
  c.hcat.resize(c.hm.size() + c.hv.size());
  c.hcat << c.hm, c.hv;
  c.h = (net.wf * c.hcat + net.bf.col(0)).cwiseMax(T(0));

  // Effective per-hero 1x1 conv weights, modulated by the fused state.
  const VecT<T> gv = net.g * c.h;
  c.mod = net.u;
  for (int hero = 0; hero < kNumHeroes; ++hero)
    for (int k = 0; k < cfg.conv2; ++k) c.mod(hero, k) += gv[hero * cfg.conv2 + k];
  const VecT<T> move_bias = net.p * c.h + net.pb.col(0);
  const MatT<T> moves = c.mod * c.a2;  // heroes x cells
  const VecT<T> vect = net.wl * c.h + net.bl.col(0);

  NetOutput<T> out;
  const int block = cells + kHeroVectorial;
  out.logits.resize(kNumHeroes * block + 1);
  for (int hero = 0; hero < kNumHeroes; ++hero) {
    for (int cell = 0; cell < cells; ++cell) out.logits[hero * block + cell] = moves(hero, cell) + move_bias[hero];
    for (int k = 0; k < kHeroVectorial; ++k)
      out.logits[hero * block + cells + k] = vect[hero * kHeroVectorial + k];
  }
  out.logits[kNumHeroes * block] = vect[kNumHeroes * kHeroVectorial];
  out.value = (net.wval * c.h)(0, 0) + net.bval(0, 0);
  return out;
}

/// Accumulates d(loss)/d(params) into `grad` given d(loss)/d(logits) and d(loss)/d(value).
template <class T>
void backward(const Network<T>& net, const NetInput<T>& in, const ForwardCache<T>& c, const VecT<T>& dlogits,
              T dvalue, Network<T>& grad) {
  const NetConfig& cfg = net.cfg;
  const int W = cfg.width, H = cfg.height, cells = cfg.cells();
  const int block = cells + kHeroVectorial;

  MatT<T> dmoves(kNumHeroes, cells);
  VecT<T> dvect(kVectorialLogits);
  for (int hero = 0; hero < kNumHeroes; ++hero) {
    for (int cell = 0; cell < cells; ++cell) dmoves(hero, cell) = dlogits[hero * block + cell];
    for (int k = 0; k < kHeroVectorial; ++k) dvect[hero * kHeroVectorial + k] = dlogits[hero * block + cells + k];
  }
  dvect[kNumHeroes * kHeroVectorial] = dlogits[kNumHeroes * block];

  VecT<T> dh = VecT<T>::Zero(c.h.size());
  // Move logits.
  const MatT<T> dmod = dmoves * c.a2.transpose();
  MatT<T> da2 = c.mod.transpose() * dmoves;
  grad.u += dmod;
  VecT<T> dgv(kNumHeroes * cfg.conv2);
  for (int hero = 0; hero < kNumHeroes; ++hero)
    for (int k = 0; k < cfg.conv2; ++k) dgv[hero * cfg.conv2 + k] = dmod(hero, k);
  grad.g += dgv * c.h.transpose();
  dh += net.g.transpose() * dgv;
  const VecT<T> dbias = dmoves.rowwise().sum();
  grad.p += dbias * c.h.transpose();
  grad.pb.col(0) += dbias;
  dh += net.p.transpose() * dbias;
  // Vectorial logits and value.
  grad.wl += dvect * c.h.transpose();
  grad.bl.col(0) += dvect;
  dh += net.wl.transpose() * dvect;
  grad.wval += dvalue * c.h.transpose();
  grad.bval(0, 0) += dvalue;
  dh += net.wval.transpose() * dvalue;
  // Fused layer.
  const VecT<T> dzf = dh.cwiseProduct((c.h.array() > T(0)).matrix().template cast<T>());
  grad.wf += dzf * c.hcat.transpose();
  grad.bf.col(0) += dzf;
  const VecT<T> dcat = net.wf.transpose() * dzf;
  const Eigen::Index nm = c.hm.size();
  const VecT<T> dzm = dcat.head(nm).cwiseProduct((c.hm.array() > T(0)).matrix().template cast<T>());
  const VecT<T> dzv = dcat.tail(c.hv.size()).cwiseProduct((c.hv.array() > T(0)).matrix().template cast<T>());
  // Vector branch.
  grad.wv += dzv * in.vec.transpose();
  grad.bv.col(0) += dzv;
  // Map branch.
  const Eigen::Map<const VecT<T>> flat(c.a2.data(), c.a2.size());
  grad.wm += dzm * flat.transpose();
  grad.bm.col(0) += dzm;
  const VecT<T> dflat = net.wm.transpose() * dzm;
  da2 += Eigen::Map<const MatT<T>>(dflat.data(), c.a2.rows(), c.a2.cols());
  // Conv 2.
  const MatT<T> dz2 = da2.cwiseProduct((c.a2.array() > T(0)).matrix().template cast<T>());
  grad.w2 += dz2 * c.col2.transpose();
  grad.b2.col(0) += dz2.rowwise().sum();
  MatT<T> da1;
  detail::col2im<T>(net.w2.transpose() * dz2, W, H, da1);
  // Conv 1.
  const MatT<T> dz1 = da1.cwiseProduct((c.a1.array() > T(0)).matrix().template cast<T>());
  grad.w1 += dz1 * c.col1.transpose();
  grad.b1.col(0) += dz1.rowwise().sum();
}

/// Softmax restricted to the legal actions; illegal entries get probability 0.
/// Throws carmi::Error when nothing is legal.
template <class T>
VecT<T> masked_softmax(const VecT<T>& logits, const ActionMask& mask) {
  if (mask.size() != logits.size()) throw Error("masked_softmax: mask and logits differ in size");
  T top = -std::numeric_limits<T>::infinity();
  for (int i = 0; i < mask.size(); ++i)
    if (mask[i]) top = std::max(top, logits[i]);
  if (top == -std::numeric_limits<T>::infinity()) throw Error("masked_softmax: no legal action");
  VecT<T> p = VecT<T>::Zero(logits.size());
  T total = 0;
  for (int i = 0; i < mask.size(); ++i)
    if (mask[i]) total += p[i] = std::exp(logits[i] - top);
  return p / total;
}

}  // namespace carmi
