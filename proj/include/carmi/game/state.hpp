#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <vector>

#include "carmi/game/level.hpp"
#include "carmi/game/types.hpp"

namespace carmi {

enum class Static : std::uint8_t { empty = 0, cover = 1, portal = 2 };

/// Immutable board geometry shared between all copies of a GameState.
struct Terrain {
  int width = 0;
  int height = 0;
  std::vector<Static> statics;    // y * width + x
  std::vector<int> portal_link;   // paired cell index, -1 if not a portal

  int index(Cell c) const { return c.y * width + c.x; }
  Cell cell(int index) const { return {index % width, index / width}; }
  bool in_bounds(Cell c) const { return c.x >= 0 && c.y >= 0 && c.x < width && c.y < height; }
  int num_cells() const { return width * height; }
};

std::shared_ptr<const Terrain> make_terrain(const LevelSpec& level);

enum class EventKind : std::uint8_t {
  shot,
  stab,
  heal,
  shield,
  empower_cast,
  move,
  skip,
  unit_killed,
  episode_end,
};

std::string_view to_string(EventKind k);
EventKind event_kind_from_string(std::string_view s);

/// One entry of the episode event stream. `unit` is the acting unit id,
/// `target` the affected unit id (victim for unit_killed), or -1.
struct StepEvent {
  EventKind kind = EventKind::skip;
  Team team = Team::hero;
  int unit = -1;
  int target = -1;
  int turn = 0;
  bool empowered = false;  // shot only
  bool blocked = false;    // attack absorbed by a shield
  Cell to{};               // move destination
  Outcome outcome = Outcome::none;  // episode_end only

  friend bool operator==(const StepEvent&, const StepEvent&) = default;
};

struct Unit {
  Team team = Team::hero;
  int slot = 0;  // hero index or enemy slot
  UnitStats stats;
  Cell pos{};
  int hp = 0;
  bool alive = false;
  bool has_moved = false;
  bool has_shot = false;
  bool has_stabbed = false;
  int cooldown = 0;
  bool shield_active = false;
  bool empowered = false;

  friend bool operator==(const Unit&, const Unit&) = default;
};

inline constexpr int hero_id(int hero_index) { return hero_index; }
inline constexpr int enemy_id(int slot) { return kNumHeroes + slot; }

/// Full state of one episode. Unit ids: heroes 0..2, enemy slot s at 3 + s.
struct GameState {
  std::shared_ptr<const Terrain> terrain;
  int level_id = 0;
  int turn_index = 1;
  int max_turns = kDefaultMaxTurns;
  Team acting_team = Team::hero;
  RuleParams rules;
  std::array<Unit, kNumUnits> units{};
  std::vector<std::int8_t> occupancy;  // unit id per cell, -1 if empty
  std::vector<StepEvent> event_log;
  Outcome outcome = Outcome::none;

  const Unit& hero(int i) const { return units[hero_id(i)]; }
  const Unit& enemy(int slot) const { return units[enemy_id(slot)]; }
  bool terminal() const { return outcome != Outcome::none; }
  /// Hero phases started so far, capped at max_turns.
  int turns_played() const { return std::min(turn_index, max_turns); }
  bool empty_cell(int index) const {
    return occupancy[index] < 0 && terrain->statics[index] != Static::cover;
  }
};

bool operator==(const GameState& a, const GameState& b);

GameState reset(const LevelSpec& level);

}  // namespace carmi
