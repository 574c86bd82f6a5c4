#include "carmi/conditioning.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

#include "carmi/error.hpp"

namespace carmi {

void RewardConfig::validate() const {
  auto ok = [](Interval i) { return std::isfinite(i.lo) && std::isfinite(i.hi) && i.lo <= i.hi; };
  for (const auto& i : cari_intervals)
    if (!ok(i)) throw Error("reward config: CARI interval must satisfy lo <= hi");
  if (!ok(win_interval) || !ok(loss_interval)) throw Error("reward config: win/loss interval must satisfy lo <= hi");
}

double distance(std::span<const double> psi, std::span<const double> z, DistanceKind kind) {
  if (psi.size() != z.size()) throw Error("distance: dimension mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < psi.size(); ++i) {
    const double d = psi[i] - z[i];
    acc += kind == DistanceKind::l2 ? d * d : std::abs(d);
  }
  return kind == DistanceKind::l2 ? std::sqrt(acc) : acc;
}

double carmi_step_reward(double d_prev, double d_curr, bool is_terminal) {
  return d_prev - d_curr - (is_terminal ? d_curr : 0.0);
}

EventVector event_vector(std::span<const StepEvent> events, Outcome outcome) {
  EventVector v{};
  const auto counts = count_metric_events(events);
  std::copy(counts.begin(), counts.end(), v.begin());
  v[kWinEvent] = outcome == Outcome::win;
  v[kLossEvent] = outcome == Outcome::loss;
  return v;
}

double cari_reward(std::span<const double> w, const EventVector& events) {
  if (w.size() != events.size())
    throw Error("cari_reward: expected " + std::to_string(events.size()) + " coefficients, got " +
                std::to_string(w.size()));
  double r = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) r += w[i] * events[i];
  return r;
}

std::vector<double> sample_cari_coefficients(const RewardConfig& config, Rng& rng) {
  config.validate();
  std::vector<double> w;
  w.reserve(kNumRewardEvents);
  auto draw = [&](Interval i) { return i.lo == i.hi ? i.lo : rng.uniform(i.lo, i.hi); };
  for (const auto& i : config.cari_intervals) w.push_back(draw(i));
  w.push_back(draw(config.win_interval));
  w.push_back(draw(config.loss_interval));
  return w;
}

double winonly_reward(Outcome outcome, bool is_terminal, double win_value) {
  if (!is_terminal) return 0.0;
  if (outcome == Outcome::win) return win_value;
  if (outcome == Outcome::loss) return -win_value;
  return 0.0;
}

double compute_alp(std::span<const double> z_new, double return_new, std::span<const CurriculumEntry> history) {
  if (history.empty()) return 0.0;
  double best = std::numeric_limits<double>::infinity();
  double closest_return = 0.0;
  for (const auto& e : history) {
    const double d = distance(z_new, e.z);
    if (d < best) {
      best = d;
      closest_return = e.episodic_return;
    }
  }
  return std::abs(return_new - closest_return);
}

namespace {

std::vector<double> uniform_goal(const CurriculumConfig& c, Rng& rng) {
  std::vector<double> z(static_cast<std::size_t>(c.dim));
  for (double& v : z) v = rng.uniform(c.lo, c.hi);
  return z;
}

// Fits the (z, alp) mixture on the window ending at `upto`. On failure the
// state keeps no model and sampling falls back to uniform.
void refit(CurriculumState& s, int upto) {
  const auto& c = s.config;
  s.fitted_at = upto;
  s.gmm.reset();
  s.target_component = -1;
  const int begin = std::max(0, upto - c.window);
  const int n = upto - begin;
  double max_alp = 0.0;
  for (int i = begin; i < upto; ++i) max_alp = std::max(max_alp, s.history[i].alp);
  if (max_alp <= 0.0) return;

  // Goals scaled to [0, 1] and ALP scaled by its window maximum.
  Eigen::MatrixXd data(n, c.dim + 1);
  for (int i = 0; i < n; ++i) {
    const auto& e = s.history[begin + i];
    for (int k = 0; k < c.dim; ++k) data(i, k) = (e.z[k] - c.lo) / (c.hi - c.lo);
    data(i, c.dim) = e.alp / max_alp;
  }
  const GmmOptions opt{.reg = 1e-6, .tol = 1e-6, .max_iter = 200, .restarts = 2};
  const std::uint64_t seed = derive_seed(c.seed, "alp-gmm", {static_cast<std::uint64_t>(upto)});
  double best_bic = std::numeric_limits<double>::infinity();
  try {
    for (int k = c.c_min; k <= c.c_max; ++k) {
      if (n < k * (c.dim + 2)) break;
      ClusterModel m = fit_gmm(data, k, seed, opt);
      const double b = bic(m, data);
      if (b < best_bic) {
        best_bic = b;
        s.gmm = std::move(m);
      }
    }
  } catch (const Error&) {
    s.gmm.reset();
  }
  if (!s.gmm) return;
  double best_alp = -1.0;
  for (int k = 0; k < s.gmm->num_components(); ++k) {
    const auto& comp = s.gmm->components[k];
    if (comp.weight > 0 && comp.mean[c.dim] > best_alp) {
      best_alp = comp.mean[c.dim];
      s.target_component = k;
    }
  }
}

}  // namespace

CurriculumDraw curriculum_sample(CurriculumState& s, Rng& rng) {
  const auto& c = s.config;
  const int n = static_cast<int>(s.history.size());
  const bool explore = rng.uniform() < c.p_rand;
  if (n < c.warmup || explore) return {uniform_goal(c, rng), true};
  if (s.fitted_at < 0 || n - s.fitted_at >= c.refit_period) refit(s, n);
  if (!s.gmm || s.target_component < 0) return {uniform_goal(c, rng), true};

  const auto& comp = s.gmm->components[s.target_component];
  const Eigen::LLT<Eigen::MatrixXd> llt(comp.cov.topLeftCorner(c.dim, c.dim));
  if (llt.info() != Eigen::Success) return {uniform_goal(c, rng), true};
  Eigen::VectorXd eps(c.dim);
  for (int k = 0; k < c.dim; ++k) eps[k] = rng.normal();
  const Eigen::VectorXd unit = comp.mean.head(c.dim) + llt.matrixL() * eps;
  std::vector<double> z(static_cast<std::size_t>(c.dim));
  for (int k = 0; k < c.dim; ++k) z[k] = std::clamp(c.lo + unit[k] * (c.hi - c.lo), c.lo, c.hi);
  return {std::move(z), false};
}

void curriculum_update(CurriculumState& s, std::vector<double> z, double episodic_return) {
  if (static_cast<int>(z.size()) != s.config.dim) throw Error("curriculum_update: goal dimension mismatch");
  const double alp = compute_alp(z, episodic_return, s.history);
  s.history.push_back({std::move(z), episodic_return, alp});
}

void write_curriculum_history(const CurriculumState& s, std::ostream& out) {
  for (std::size_t i = 0; i < s.history.size(); ++i) {
    const auto& e = s.history[i];
    out << nlohmann::json{{"episode", i}, {"z", e.z}, {"return", e.episodic_return}, {"alp", e.alp}}.dump() << '\n';
  }
}

namespace {

std::string_view to_string(DistanceKind k) { return k == DistanceKind::l2 ? "l2" : "l1"; }

DistanceKind distance_from_string(const std::string& s) {
  if (s == "l2") return DistanceKind::l2;
  if (s == "l1") return DistanceKind::l1;
  throw Error("unknown distance kind '" + s + "' (expected l2 or l1)");
}

nlohmann::json interval_json(Interval i) { return nlohmann::json::array({i.lo, i.hi}); }
Interval interval_from(const nlohmann::json& j) { return {j.at(0).get<double>(), j.at(1).get<double>()}; }

}  // namespace

void to_json(nlohmann::json& j, const RewardConfig& c) {
  auto w = nlohmann::json::array();
  for (const auto& i : c.cari_intervals) w.push_back(interval_json(i));
  j = {{"mode", to_string(c.mode)},
       {"distance", to_string(c.distance)},
       {"cari_intervals", w},
       {"win_interval", interval_json(c.win_interval)},
       {"loss_interval", interval_json(c.loss_interval)},
       {"terminal_win_value", c.terminal_win_value}};
}

void from_json(const nlohmann::json& j, RewardConfig& c) {
  c = RewardConfig{};
  if (j.contains("mode")) c.mode = goal_mode_from_string(j.at("mode").get<std::string>());
  if (j.contains("distance")) c.distance = distance_from_string(j.at("distance").get<std::string>());
  if (j.contains("cari_intervals")) {
    const auto& w = j.at("cari_intervals");
    if (w.size() != c.cari_intervals.size()) throw Error("reward config: need one CARI interval per metric");
    for (std::size_t i = 0; i < w.size(); ++i) c.cari_intervals[i] = interval_from(w[i]);
  }
  if (j.contains("win_interval")) c.win_interval = interval_from(j.at("win_interval"));
  if (j.contains("loss_interval")) c.loss_interval = interval_from(j.at("loss_interval"));
  c.terminal_win_value = j.value("terminal_win_value", 1.0);
  c.validate();
}

void to_json(nlohmann::json& j, const CurriculumConfig& c) {
  j = {{"dim", c.dim},         {"lo", c.lo},         {"hi", c.hi},       {"p_rand", c.p_rand},
       {"warmup", c.warmup},   {"refit_period", c.refit_period},          {"window", c.window},
       {"c_min", c.c_min},     {"c_max", c.c_max},   {"seed", c.seed}};
}

void from_json(const nlohmann::json& j, CurriculumConfig& c) {
  const CurriculumConfig d;
  c.dim = j.value("dim", d.dim);
  c.lo = j.value("lo", d.lo);
  c.hi = j.value("hi", d.hi);
  c.p_rand = j.value("p_rand", d.p_rand);
  c.warmup = j.value("warmup", d.warmup);
  c.refit_period = j.value("refit_period", d.refit_period);
  c.window = j.value("window", d.window);
  c.c_min = j.value("c_min", d.c_min);
  c.c_max = j.value("c_max", d.c_max);
  c.seed = j.value("seed", d.seed);
  if (c.lo >= c.hi || c.dim < 1 || c.c_min < 1 || c.c_max < c.c_min || c.refit_period < 1)
    throw Error("curriculum config: invalid bounds or component range");
}

nlohmann::json curriculum_to_json(const CurriculumState& s) {
  auto hist = nlohmann::json::array();
  for (const auto& e : s.history) hist.push_back({e.z, e.episodic_return, e.alp});
  return {{"config", s.config}, {"fitted_at", s.fitted_at}, {"history", hist}};
}

CurriculumState curriculum_from_json(const nlohmann::json& j) {
  CurriculumState s(j.at("config").get<CurriculumConfig>());
  for (const auto& e : j.at("history"))
    s.history.push_back({e.at(0).get<std::vector<double>>(), e.at(1).get<double>(), e.at(2).get<double>()});
  const int fitted_at = j.value("fitted_at", -1);
  if (fitted_at > static_cast<int>(s.history.size())) throw Error("curriculum: fitted_at beyond history");
  if (fitted_at >= 0) refit(s, fitted_at);
  return s;
}

}  // namespace carmi
