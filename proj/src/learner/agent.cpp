#include "carmi/learner/agent.hpp"

#include <algorithm>
#include <cmath>

#include "carmi/error.hpp"
#include "carmi/game/rules.hpp"

namespace carmi {

int condition_dim(GoalMode mode) {
  switch (mode) {
    case GoalMode::carmi: return 4 * kNumMetrics;
    case GoalMode::cari: return kNumRewardEvents;
    case GoalMode::winonly: return 0;
  }
  return 0;
}

std::vector<float> carmi_condition(std::span<const double> z, std::span<const double> psi,
                                   std::span<const double> goal_rates, std::span<const double> rates) {
  std::vector<float> c;
  c.reserve(z.size() + psi.size() + goal_rates.size() + rates.size());
  for (double v : z) c.push_back(static_cast<float>(std::clamp(v, -3.0, 3.0) / 3.0));
  for (double v : psi) c.push_back(static_cast<float>(std::clamp(v, -3.0, 3.0) / 3.0));
  for (double v : goal_rates) c.push_back(static_cast<float>(std::clamp(v, 0.0, 3.0) / 3.0));
  for (double v : rates) c.push_back(static_cast<float>(std::clamp(v, 0.0, 3.0) / 3.0));
  return c;
}

std::vector<float> cari_condition(std::span<const double> w) {
  std::vector<float> c;
  for (double v : w) c.push_back(static_cast<float>(v / 2.0));
  return c;
}

NetConfig make_net_config(int width, int height, GoalMode mode, const NetConfig& sizes) {
  NetConfig c = sizes;
  c.width = width;
  c.height = height;
  c.vector_dim = kObservationVectorSize + condition_dim(mode);
  return c;
}

template <class T>
NetInput<T> build_input(const Observation& obs, std::span<const float> cond) {
  const int cells = obs.width * obs.height;
  NetInput<T> in;
  in.planes = MatT<T>::Zero(kInputPlanes, cells);
  const std::uint8_t* heroes = obs.map.data();
  const std::uint8_t* enemies = heroes + cells;
  const std::uint8_t* statics = enemies + cells;
  std::vector<int> enemy_cells;
  for (int i = 0; i < cells; ++i) {
    if (heroes[i]) in.planes(heroes[i] - 1, i) = T(1);
    if (enemies[i]) {
      in.planes(3, i) = T(1);
      // Enemy hp fraction sits after the turn counter and the hero block.
      in.planes(4, i) = static_cast<T>(obs.vector[1 + kNumHeroes * kHeroFeatures + (enemies[i] - 1) * kEnemyFeatures]);
      enemy_cells.push_back(i);
    }
    if (statics[i] == 1) in.planes(5, i) = T(1);
    if (statics[i] == 2) in.planes(6, i) = T(1);
  }
  const T scale = T(1) / static_cast<T>(std::max(obs.width, obs.height));
  for (int i = 0; i < cells; ++i) {
    int best = std::max(obs.width, obs.height);
    for (int e : enemy_cells)
      best = std::min(best, std::max(std::abs(i % obs.width - e % obs.width), std::abs(i / obs.width - e / obs.width)));
    in.planes(7, i) = static_cast<T>(best) * scale;
  }
  in.vec.resize(static_cast<Eigen::Index>(obs.vector.size() + cond.size()));
  Eigen::Index k = 0;
  for (float v : obs.vector) in.vec[k++] = static_cast<T>(v);
  for (float v : cond) in.vec[k++] = static_cast<T>(v);
  return in;
}

template NetInput<float> build_input<float>(const Observation&, std::span<const float>);
template NetInput<double> build_input<double>(const Observation&, std::span<const float>);

PolicyOutput policy_forward(const Network<float>& net, const Observation& obs, std::span<const float> cond,
                            const ActionMask& mask) {
  if (mask.count() == 0) throw Error("policy_forward: every action is masked");
  ForwardCache<float> cache;
  const auto out = forward(net, build_input<float>(obs, cond), cache);
  return {masked_softmax(out.logits, mask), out.value};
}

namespace {

int sample_action(const VecT<float>& probs, const ActionMask& mask, Rng& rng) {
  double u = rng.uniform();
  int last = -1;
  for (int i = 0; i < mask.size(); ++i) {
    if (!mask[i]) continue;
    last = i;
    u -= probs[i];
    if (u < 0.0) return i;
  }
  return last;  // rounding left a sliver at the end
}

int greedy_action(const VecT<float>& probs, const ActionMask& mask) {
  int best = -1;
  for (int i = 0; i < mask.size(); ++i)
    if (mask[i] && (best < 0 || probs[i] > probs[best])) best = i;
  return best;
}

/// Everything the reward needs about the running summary.
struct Progress {
  SummaryData partial;
  std::optional<MetricVector> psi;  // normalized, when stats are known
};

Progress progress_of(const GameState& s, const LevelStats* stats, int level_id) {
  Progress p;
  p.partial = partial_summarize(s.event_log, s.turns_played(), level_id);
  if (stats) p.psi = normalize_rates(p.partial.rates, *stats);
  return p;
}

}  // namespace

EpisodeRecord run_episode(const Network<float>& net, const LevelSpec& level, const LevelStats* stats,
                          const GoalSpec& goal, const RewardConfig& reward, std::uint64_t seed,
                          EpisodeTrace* trace, ActionSelection selection) {
  if (stats && stats->level_id != level.level_id)
    throw Error("run_episode: stats for level " + std::to_string(stats->level_id) + " given for level " +
                std::to_string(level.level_id));
  if (goal.mode == GoalMode::carmi) {
    if (!stats) throw Error("run_episode: CARMI goals need the level's player stats");
    if (goal.values.size() != kNumMetrics) throw Error("run_episode: CARMI goal must have 5 components");
  }
  if (goal.mode == GoalMode::cari && goal.values.size() != kNumRewardEvents)
    throw Error("run_episode: CARI goal must have 7 coefficients");
  if (net.cfg.width != level.width || net.cfg.height != level.height ||
      net.cfg.vector_dim != kObservationVectorSize + condition_dim(goal.mode))
    throw Error("run_episode: network shape does not match the level and goal mode");

  Rng rng(seed);
  GameState s = reset(level);
  const ActionSpace space(level.width, level.height);

  MetricVector goal_rates{};
  if (goal.mode == GoalMode::carmi) {
    MetricVector z{};
    std::copy(goal.values.begin(), goal.values.end(), z.begin());
    goal_rates = denormalize(z, *stats);
  }
  auto condition = [&](const Progress& p) -> std::vector<float> {
    switch (goal.mode) {
      case GoalMode::carmi: return carmi_condition(goal.values, *p.psi, goal_rates, p.partial.rates);
      case GoalMode::cari: return cari_condition(goal.values);
      case GoalMode::winonly: return {};
    }
    return {};
  };
  auto dist = [&](const Progress& p) { return distance(*p.psi, goal.values, reward.distance); };

  EpisodeRecord rec;
  rec.level_id = level.level_id;
  rec.mode = goal.mode;
  rec.goal = goal;
  rec.seed = seed;

  Progress prog = progress_of(s, stats, level.level_id);
  std::vector<float> cond = condition(prog);
  Observation obs = encode_observation(s);
  double d_prev = goal.mode == GoalMode::carmi ? dist(prog) : 0.0;

  while (!s.terminal()) {
    const ActionMask mask = legal_actions(s);
    const PolicyOutput pol = policy_forward(net, obs, cond, mask);
    const double offset = goal.mode == GoalMode::carmi ? d_prev : 0.0;
    const int a = selection == ActionSelection::greedy ? greedy_action(pol.probs, mask)
                                                         : sample_action(pol.probs, mask, rng);
    if (a < 0 || !mask[a]) throw Error("actor selected a masked action " + std::to_string(a));

    const std::size_t log_before = s.event_log.size();
    step(s, space.decode(a));
    const bool done = s.terminal();
    Progress next = progress_of(s, stats, level.level_id);

    double r = 0.0;
    switch (goal.mode) {
      case GoalMode::carmi: {
        const double d = dist(next);
        r = carmi_step_reward(d_prev, d, done);
        d_prev = d;
        break;
      }
      case GoalMode::cari: {
        const std::span<const StepEvent> fresh(s.event_log.data() + log_before, s.event_log.size() - log_before);
        r = cari_reward(goal.values, event_vector(fresh, done ? s.outcome : Outcome::none));
        break;
      }
      case GoalMode::winonly: r = winonly_reward(s.outcome, done, reward.terminal_win_value); break;
    }
    rec.episodic_return += r;
    ++rec.steps;

    std::vector<float> next_cond = condition(next);
    Observation next_obs = encode_observation(s);
    if (trace) {
      trace->transitions.push_back(Transition{.obs = std::move(obs),
                                              .cond = std::move(cond),
                                              .mask = mask,
                                              .action = a,
                                              .reward = static_cast<float>(r),
                                              .next_obs = next_obs,
                                              .next_cond = next_cond,
                                              .done = done,
                                              .behavior_prob = pol.probs[a],
                                              .behavior_value = static_cast<float>(pol.value + offset),
                                              .value_offset = static_cast<float>(offset),
                                              .next_value_offset =
                                                  static_cast<float>(goal.mode == GoalMode::carmi ? d_prev : 0.0)});
    }
    obs = std::move(next_obs);
    cond = std::move(next_cond);
    prog = std::move(next);
  }

  rec.outcome = s.outcome;
  rec.summary = summarize(Trajectory{level.level_id, s.event_log, s.outcome, s.turns_played()});
  if (stats) rec.normalized = normalize(rec.summary, *stats);
  if (goal.mode == GoalMode::carmi) rec.final_distance = d_prev;
  if (trace) trace->events = std::move(s.event_log);
  return rec;
}

void to_json(nlohmann::json& j, const EpisodeRecord& r) {
  j = {{"level_id", r.level_id},
       {"mode", to_string(r.mode)},
       {"goal", r.goal},
       {"rates", r.summary.rates},
       {"turns_played", r.summary.turns_played},
       {"outcome", to_string(r.outcome)},
       {"seed", r.seed},
       {"return", r.episodic_return},
       {"steps", r.steps}};
  if (r.normalized) j["z"] = r.normalized->z;
  if (r.final_distance) j["final_distance"] = *r.final_distance;
}

void from_json(const nlohmann::json& j, EpisodeRecord& r) {
  r = EpisodeRecord{};
  r.level_id = j.at("level_id").get<int>();
  r.mode = goal_mode_from_string(j.at("mode").get<std::string>());
  r.goal = j.at("goal").get<GoalSpec>();
  r.summary.level_id = r.level_id;
  r.summary.rates = j.at("rates").get<MetricVector>();
  r.summary.turns_played = j.at("turns_played").get<int>();
  r.outcome = outcome_from_string(j.at("outcome").get<std::string>());
  r.seed = j.at("seed").get<std::uint64_t>();
  r.episodic_return = j.at("return").get<double>();
  r.steps = j.value("steps", 0);
  if (j.contains("z")) r.normalized = NormalizedSummary{r.level_id, j.at("z").get<MetricVector>()};
  if (j.contains("final_distance")) r.final_distance = j.at("final_distance").get<double>();
}

}  // namespace carmi
