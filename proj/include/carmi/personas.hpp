#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "carmi/game/actions.hpp"
#include "carmi/game/level.hpp"
#include "carmi/game/state.hpp"
#include "carmi/metrics.hpp"
#include "carmi/rng.hpp"

namespace carmi {

/// Scripted stand-in for a human play-tester. All weights live in [0, 1].
struct PersonaParams {
  double aggression = 0.0;
  double melee_preference = 0.0;
  std::array<double, kNumSuperSlots> super_propensity{};  // heal, empower, shield
  double caution = 0.0;
  std::uint64_t rng_seed = 0;
  int archetype = -1;  // prior component that produced it, -1 if hand-made

  friend bool operator==(const PersonaParams&, const PersonaParams&) = default;
};

void validate(const PersonaParams& p);

/// Linear action scores: per-legal-action feature terms, each multiplied by
/// one persona weight, so an all-zero persona scores everything 0.
std::vector<double> persona_action_scores(const GameState& state, const PersonaParams& params,
                                          const std::vector<int>& legal);

/// Softmax over the scores with inverse temperature 3 + 5 * aggression.
/// Always returns a legal action.
Action persona_act(const GameState& state, const PersonaParams& params, Rng& rng);

/// Mixture of archetype centres with Gaussian jitter, clamped to [0, 1].
struct PersonaPrior {
  std::vector<PersonaParams> centers;
  std::vector<double> weights;
  double jitter = 0.07;
};

/// Three archetypes: melee rusher, ranged support, balanced.
PersonaPrior default_persona_prior();

PersonaParams sample_persona(const PersonaPrior& prior, Rng& rng);

/// Plays one full episode; the returned trajectory holds the event log.
Trajectory play_persona_episode(const LevelSpec& level, const PersonaParams& params, std::uint64_t episode_seed);

struct GeneratedPlayers {
  PlayerDataset dataset;
  std::vector<PersonaParams> personas;
};

/// Every persona plays every level once. Episode seeds are derived from
/// (seed, player, level) and stored in the rows.
GeneratedPlayers generate_player_dataset(int n_players, std::span<const LevelSpec> train_levels,
                                         std::span<const LevelSpec> test_levels, std::uint64_t seed,
                                         const PersonaPrior& prior = default_persona_prior());

std::uint64_t persona_episode_seed(std::uint64_t dataset_seed, int player_id, int level_id);

void to_json(nlohmann::json& j, const PersonaParams& p);
void from_json(const nlohmann::json& j, PersonaParams& p);

}  // namespace carmi
