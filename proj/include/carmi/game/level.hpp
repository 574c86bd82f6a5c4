#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "carmi/game/types.hpp"

namespace carmi {

/// Static description of one level: board, spawns, stats.
///
/// JSON layout (one file per level):
///   {"level_id": 3, "width": 10, "height": 10, "max_turns": 10, "rng_seed": 42,
///    "cover_cells": [[x, y], ...], "portal_pairs": [[[x, y], [x, y]], ...],
///    "hero_spawns": [[x, y] x3], "enemy_spawns": [[x, y], ...], "enemy_count": 4,
///    "rules": {"empower_bonus": 2, "heal_amount": 3, "super_radius": 2},
///    "stat_overrides": {"hero0": {...UnitStats...}, "enemy2": {...}}}
struct LevelSpec {
  int level_id = 0;
  int width = 10;
  int height = 10;
  std::vector<Cell> cover_cells;
  std::vector<std::pair<Cell, Cell>> portal_pairs;
  std::array<Cell, kNumHeroes> hero_spawns{};
  std::vector<Cell> enemy_spawns;
  int enemy_count = 0;
  /// Keyed by unit id: 0..2 heroes, 3..10 enemy slots 0..7.
  std::map<int, UnitStats> stat_overrides;
  std::uint64_t rng_seed = 0;
  int max_turns = kDefaultMaxTurns;
  RuleParams rules;

  friend bool operator==(const LevelSpec&, const LevelSpec&) = default;
};

/// Throws carmi::Error describing the first violated invariant.
void validate(const LevelSpec& level);

UnitStats unit_stats(const LevelSpec& level, int unit_id);

struct IntRange {
  int lo = 0;
  int hi = 0;
};

struct RealRange {
  double lo = 0.0;
  double hi = 0.0;
};

struct LevelGenParams {
  IntRange width{10, 10};
  IntRange height{10, 10};
  IntRange enemy_count{3, 5};
  IntRange portal_pairs{0, 2};
  RealRange cover_density{0.06, 0.14};
  int max_turns = kDefaultMaxTurns;
};

/// Random level whose enemies are all reachable from the hero spawns.
/// Same (seed, params, level_id) gives the same spec. Throws GenerationError
/// when the ranges are infeasible.
LevelSpec generate_level(std::uint64_t seed, const LevelGenParams& params, int level_id = 0);

void to_json(nlohmann::json& j, const Cell& c);
void from_json(const nlohmann::json& j, Cell& c);
void to_json(nlohmann::json& j, const UnitStats& s);
void from_json(const nlohmann::json& j, UnitStats& s);
void to_json(nlohmann::json& j, const LevelSpec& level);
void from_json(const nlohmann::json& j, LevelSpec& level);
void to_json(nlohmann::json& j, const LevelGenParams& p);
void from_json(const nlohmann::json& j, LevelGenParams& p);

LevelSpec load_level(const std::string& path);
void save_level(const LevelSpec& level, const std::string& path);

}  // namespace carmi
