#pragma once

#include <vector>

#include "carmi/game/actions.hpp"
#include "carmi/game/state.hpp"

namespace carmi {

/// True when no cover cell lies strictly between `from` and `to` on the
/// traced line. Symmetric in its endpoints.
bool line_of_fire_clear(const Terrain& terrain, Cell from, Cell to);

/// BFS distances from `source` over empty cells (8-neighbourhood, portal
/// jumps cost 1). `ignore_unit` is treated as absent. Unreachable cells are -1.
std::vector<int> distance_field(const GameState& state, Cell source, int ignore_unit = -1);

/// Empty destination cells within the unit's move range. Empty once the
/// unit has moved or shot this turn.
std::vector<Cell> reachable_cells(const GameState& state, int hero_index);

/// Same expansion for any unit, ignoring per-turn flags.
std::vector<Cell> reachable_from(const GameState& state, int unit_id);

bool can_shoot(const GameState& state, int shooter_id, int target_id);

/// Throws carmi::Error on terminal states or outside the hero phase.
ActionMask legal_actions(const GameState& state);

bool is_legal(const GameState& state, const Action& action);

struct StepResult {
  std::vector<StepEvent> events;
  Outcome outcome = Outcome::none;
  bool turn_ended = false;  // the hero phase ended and the enemies played
};

/// Applies a hero action in place. Illegal actions throw IllegalActionError
/// and leave the state untouched. When the heroes run out of non-Skip
/// options the hero phase ends automatically.
StepResult step(GameState& state, const Action& action);

/// Runs the scripted enemy behaviour tree for every living enemy, then
/// advances the turn counter. Requires acting_team == enemy.
void enemy_turn(GameState& state);

}  // namespace carmi
