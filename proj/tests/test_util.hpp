#pragma once

#include <set>
#include <vector>

#include "carmi/game/level.hpp"
#include "carmi/game/rules.hpp"
#include "carmi/rng.hpp"

namespace carmi::testing {

/// Empty board with heroes on the left column and enemies on the right one.
inline LevelSpec open_level(int width, int height, int enemies) {
  LevelSpec l;
  l.level_id = 1;
  l.width = width;
  l.height = height;
  for (int h = 0; h < kNumHeroes; ++h) l.hero_spawns[h] = {0, h};
  for (int e = 0; e < enemies; ++e) l.enemy_spawns.push_back({width - 1, e});
  l.enemy_count = enemies;
  return l;
}

/// Moves a unit directly, bypassing the rules (test setup only).
inline void place(GameState& s, int unit_id, Cell c) {
  Unit& u = s.units[unit_id];
  if (u.alive) s.occupancy[s.terrain->index(u.pos)] = -1;
  u.pos = c;
  if (u.alive) s.occupancy[s.terrain->index(c)] = static_cast<std::int8_t>(unit_id);
}

inline void kill(GameState& s, int unit_id) {
  Unit& u = s.units[unit_id];
  if (u.alive) s.occupancy[s.terrain->index(u.pos)] = -1;
  u.alive = false;
  u.hp = 0;
}

/// Plays uniformly random legal actions until the episode ends.
inline GameState play_random(const LevelSpec& level, Rng& rng, std::vector<GameState>* visited = nullptr) {
  GameState s = reset(level);
  const ActionSpace space(level.width, level.height);
  while (!s.terminal()) {
    if (visited) visited->push_back(s);
    const auto legal = legal_actions(s).legal_indices();
    step(s, space.decode(legal[rng.below(legal.size())]));
  }
  return s;
}

}  // namespace carmi::testing
