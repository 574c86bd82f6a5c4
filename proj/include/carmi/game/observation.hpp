#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "carmi/game/state.hpp"

namespace carmi {

inline constexpr int kMapPlanes = 3;
inline constexpr int kHeroFeatures = 6;
inline constexpr int kEnemyFeatures = 2;
inline constexpr int kObservationVectorSize = 1 + kNumHeroes * kHeroFeatures + kMaxEnemies * kEnemyFeatures;

/// Two-part agent view of a GameState.
///
/// map is plane-major: map[plane * W * H + y * W + x], with
///   plane 0: hero index + 1 (0 = none)
///   plane 1: enemy slot + 1 (0 = none)
///   plane 2: statics, cover = 1, portal = 2
/// vector is [turns_left / max_turns,
///            per hero: hp_fraction, has_moved, has_shot, has_stabbed, cooldown_fraction, shield,
///            per enemy slot: hp_fraction, alive]
struct Observation {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> map;
  std::vector<float> vector;

  friend bool operator==(const Observation&, const Observation&) = default;
};

Observation encode_observation(const GameState& state);

/// Flattened observation length for a W x H board.
constexpr std::size_t state_size(int width, int height) {
  return static_cast<std::size_t>(width * height * kMapPlanes + kObservationVectorSize);
}

}  // namespace carmi
