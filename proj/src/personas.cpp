#include "carmi/personas.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <type_traits>

#include "carmi/error.hpp"
#include "carmi/game/rules.hpp"

namespace carmi {

namespace {

constexpr double kStyleBonus = 1.0;   // melee / ranged preference term
constexpr double kSuperBonus = 1.0;
constexpr double kSuperCost = 0.5;
constexpr double kEmpowerSetup = 1.5;  // per fraction of allies that can still shoot

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

int nearest_enemy_distance(const GameState& s, Cell from) {
  int best = 1 << 20;
  for (int e = 0; e < kMaxEnemies; ++e)
    if (s.enemy(e).alive) best = std::min(best, chebyshev(from, s.enemy(e).pos));
  return best;
}

double cover_fraction(const GameState& s, Cell at) {
  int living = 0, hidden = 0;
  for (int e = 0; e < kMaxEnemies; ++e) {
    if (!s.enemy(e).alive) continue;
    ++living;
    if (!line_of_fire_clear(*s.terrain, at, s.enemy(e).pos)) ++hidden;
  }
  return living ? static_cast<double>(hidden) / living : 0.0;
}

double allies_ready_to_shoot(const GameState& s, int caster) {
  int ready = 0;
  for (int h = 0; h < kNumHeroes; ++h)
    if (h != caster && s.hero(h).alive && !s.hero(h).has_shot) ++ready;
  return ready / static_cast<double>(kNumHeroes - 1);
}

double kill_fraction(const Unit& target, int damage) {
  return std::min(1.0, static_cast<double>(damage) / std::max(1, target.hp));
}

}  // namespace

void validate(const PersonaParams& p) {
  auto ok = [](double v) { return v >= 0.0 && v <= 1.0; };
  bool good = ok(p.aggression) && ok(p.melee_preference) && ok(p.caution);
  for (double v : p.super_propensity) good = good && ok(v);
  if (!good) throw Error("persona parameters must lie in [0, 1]");
}

std::vector<double> persona_action_scores(const GameState& s, const PersonaParams& p, const std::vector<int>& legal) {
  const ActionSpace space(s.terrain->width, s.terrain->height);
  std::vector<double> scores;
  scores.reserve(legal.size());
  for (int index : legal) {
    const Action action = space.decode(index);
    const double score = std::visit(
        [&](const auto& a) -> double {
          using T = std::decay_t<decltype(a)>;
          if constexpr (std::is_same_v<T, Skip>) {
            return 0.0;
          } else if constexpr (std::is_same_v<T, Move>) {
            const Unit& u = s.hero(a.hero);
            // Preferred engagement distance slides from fire range (ranged) to 1 (melee).
            const double target = 1.0 + (1.0 - p.melee_preference) * std::max(0, u.stats.fire_range - 2);
            const double before = std::abs(nearest_enemy_distance(s, u.pos) - target);
            const double after = std::abs(nearest_enemy_distance(s, a.target) - target);
            const double gain = std::clamp((before - after) / std::max(1, u.stats.move_range), -1.0, 1.0);
            return p.aggression * gain + p.caution * cover_fraction(s, a.target);
          } else if constexpr (std::is_same_v<T, Shoot>) {
            const Unit& u = s.hero(a.hero);
            const int damage = u.stats.shot_damage + (u.empowered ? s.rules.empower_bonus : 0);
            return p.aggression * kill_fraction(s.enemy(a.enemy_slot), damage) +
                   p.aggression * (1.0 - p.melee_preference) * kStyleBonus;
          } else if constexpr (std::is_same_v<T, Stab>) {
            const Unit& u = s.hero(a.hero);
            return p.aggression * kill_fraction(s.enemy(a.enemy_slot), u.stats.stab_damage) +
                   p.melee_preference * kStyleBonus;
          } else {
            // Busy personas (aggressive or cautious) treat a cast as time not spent fighting or hiding.
            const double cost = kSuperCost * (p.aggression + p.caution);
            double bonus = kSuperBonus;
            if (a.kind == SuperKind::empower) bonus += kEmpowerSetup * allies_ready_to_shoot(s, a.hero);
            return bonus * p.super_propensity[static_cast<std::size_t>(super_slot(a.kind))] - cost;
          }
        },
        action);
    scores.push_back(score);
  }
  return scores;
}

Action persona_act(const GameState& s, const PersonaParams& p, Rng& rng) {
  const auto legal = legal_actions(s).legal_indices();
  const auto scores = persona_action_scores(s, p, legal);
  const double beta = 3.0 + 5.0 * p.aggression;
  const double top = *std::max_element(scores.begin(), scores.end());
  std::vector<double> weights(scores.size());
  double total = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) total += weights[i] = std::exp(beta * (scores[i] - top));
  double u = rng.uniform() * total;
  std::size_t pick = 0;
  for (; pick + 1 < weights.size(); ++pick) {
    if (u < weights[pick]) break;
    u -= weights[pick];
  }
  return ActionSpace(s.terrain->width, s.terrain->height).decode(legal[pick]);
}

PersonaPrior default_persona_prior() {
  PersonaPrior prior;
  prior.centers = {
      // melee rusher
      PersonaParams{.aggression = 0.9, .melee_preference = 0.9, .super_propensity = {0.15, 0.1, 0.3}, .caution = 0.1},
      // ranged support
      PersonaParams{.aggression = 0.5, .melee_preference = 0.05, .super_propensity = {0.8, 0.9, 0.6}, .caution = 0.8},
      // balanced
      PersonaParams{.aggression = 0.7, .melee_preference = 0.45, .super_propensity = {0.45, 0.45, 0.45}, .caution = 0.4},
  };
  prior.weights = {1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0};
  return prior;
}

PersonaParams sample_persona(const PersonaPrior& prior, Rng& rng) {
  if (prior.centers.empty() || prior.centers.size() != prior.weights.size())
    throw Error("persona prior: centers and weights mismatch");
  double total = 0.0;
  for (double w : prior.weights) total += w;
  double u = rng.uniform() * total;
  std::size_t k = 0;
  for (; k + 1 < prior.weights.size(); ++k) {
    if (u < prior.weights[k]) break;
    u -= prior.weights[k];
  }
  const PersonaParams& c = prior.centers[k];
  PersonaParams p;
  p.archetype = static_cast<int>(k);
  p.aggression = clamp01(rng.normal(c.aggression, prior.jitter));
  p.melee_preference = clamp01(rng.normal(c.melee_preference, prior.jitter));
  for (std::size_t i = 0; i < p.super_propensity.size(); ++i)
    p.super_propensity[i] = clamp01(rng.normal(c.super_propensity[i], prior.jitter));
  p.caution = clamp01(rng.normal(c.caution, prior.jitter));
  return p;
}

Trajectory play_persona_episode(const LevelSpec& level, const PersonaParams& params, std::uint64_t episode_seed) {
  Rng rng(episode_seed);
  GameState s = reset(level);
  while (!s.terminal()) step(s, persona_act(s, params, rng));
  return Trajectory{level.level_id, std::move(s.event_log), s.outcome, s.turns_played()};
}

std::uint64_t persona_episode_seed(std::uint64_t dataset_seed, int player_id, int level_id) {
  return derive_seed(dataset_seed, "persona-episode",
                     {static_cast<std::uint64_t>(player_id), static_cast<std::uint64_t>(level_id)});
}

GeneratedPlayers generate_player_dataset(int n_players, std::span<const LevelSpec> train_levels,
                                         std::span<const LevelSpec> test_levels, std::uint64_t seed,
                                         const PersonaPrior& prior) {
  if (n_players < 2) throw Error("generate_player_dataset: need at least 2 players");
  if (train_levels.size() + test_levels.size() < 2) throw Error("generate_player_dataset: need at least 2 levels");
  GeneratedPlayers out;
  for (int p = 0; p < n_players; ++p) {
    Rng rng(derive_seed(seed, "persona", {static_cast<std::uint64_t>(p)}));
    PersonaParams params = sample_persona(prior, rng);
    params.rng_seed = derive_seed(seed, "persona", {static_cast<std::uint64_t>(p)});
    out.personas.push_back(params);
  }
  auto play_split = [&](std::span<const LevelSpec> levels, Split split) {
    for (const auto& level : levels) {
      for (int p = 0; p < n_players; ++p) {
        const std::uint64_t episode_seed = persona_episode_seed(seed, p, level.level_id);
        Trajectory t;
        try {
          t = play_persona_episode(level, out.personas[p], episode_seed);
        } catch (const std::exception& e) {
          throw Error("persona " + std::to_string(p) + " crashed on level " + std::to_string(level.level_id) +
                      ": " + e.what());
        }
        out.dataset.rows.push_back(PlayerRow{.level_id = level.level_id,
                                             .player_id = p,
                                             .summary = summarize(t),
                                             .outcome = t.outcome,
                                             .split = split,
                                             .seed = episode_seed});
      }
    }
  };
  play_split(train_levels, Split::train);
  play_split(test_levels, Split::test);
  validate(out.dataset);
  return out;
}

void to_json(nlohmann::json& j, const PersonaParams& p) {
  j = {{"aggression", p.aggression}, {"melee_preference", p.melee_preference},
       {"super_propensity", p.super_propensity}, {"caution", p.caution},
       {"rng_seed", p.rng_seed}, {"archetype", p.archetype}};
}

void from_json(const nlohmann::json& j, PersonaParams& p) {
  p.aggression = j.at("aggression").get<double>();
  p.melee_preference = j.at("melee_preference").get<double>();
  p.super_propensity = j.at("super_propensity").get<std::array<double, kNumSuperSlots>>();
  p.caution = j.at("caution").get<double>();
  p.rng_seed = j.value("rng_seed", std::uint64_t{0});
  p.archetype = j.value("archetype", -1);
  validate(p);
}

}  // namespace carmi
