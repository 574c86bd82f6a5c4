#include "carmi/game/observation.hpp"

namespace carmi {

Observation encode_observation(const GameState& s) {
  const Terrain& t = *s.terrain;
  const int n = t.num_cells();
  Observation obs;
  obs.width = t.width;
  obs.height = t.height;
  obs.map.assign(static_cast<std::size_t>(kMapPlanes * n), 0);
  for (int i = 0; i < n; ++i) {
    obs.map[2 * n + i] = static_cast<std::uint8_t>(t.statics[i]);
    const int id = s.occupancy[i];
    if (id < 0) continue;
    const Unit& u = s.units[id];
    obs.map[(u.team == Team::hero ? 0 : n) + i] = static_cast<std::uint8_t>(u.slot + 1);
  }

  obs.vector.reserve(kObservationVectorSize);
  const int turns_left = std::max(0, s.max_turns - s.turn_index + 1);
  obs.vector.push_back(static_cast<float>(turns_left) / static_cast<float>(s.max_turns));
  for (int h = 0; h < kNumHeroes; ++h) {
    const Unit& u = s.hero(h);
    const float cd_max = static_cast<float>(std::max(1, u.stats.super_cooldown));
    obs.vector.push_back(u.alive ? static_cast<float>(u.hp) / static_cast<float>(u.stats.max_hp) : 0.0f);
    obs.vector.push_back(u.has_moved ? 1.0f : 0.0f);
    obs.vector.push_back(u.has_shot ? 1.0f : 0.0f);
    obs.vector.push_back(u.has_stabbed ? 1.0f : 0.0f);
    obs.vector.push_back(static_cast<float>(u.cooldown) / cd_max);
    obs.vector.push_back(u.shield_active ? 1.0f : 0.0f);
  }
  for (int e = 0; e < kMaxEnemies; ++e) {
    const Unit& u = s.enemy(e);
    obs.vector.push_back(u.alive ? static_cast<float>(u.hp) / static_cast<float>(u.stats.max_hp) : 0.0f);
    obs.vector.push_back(u.alive ? 1.0f : 0.0f);
  }
  return obs;
}

}  // namespace carmi
