#pragma once

#include <algorithm>
#include <compare>
#include <cstdint>
#include <cstdlib>
#include <string_view>

namespace carmi {

inline constexpr int kNumHeroes = 3;
inline constexpr int kMaxEnemies = 8;
inline constexpr int kNumUnits = kNumHeroes + kMaxEnemies;
inline constexpr int kNumSuperSlots = 3;  // heal, empower, shield
inline constexpr int kDefaultMaxTurns = 10;

struct Cell {
  int x = 0;
  int y = 0;
  friend auto operator<=>(const Cell&, const Cell&) = default;
};

inline int chebyshev(Cell a, Cell b) { return std::max(std::abs(a.x - b.x), std::abs(a.y - b.y)); }

enum class Team : std::uint8_t { hero, enemy };
enum class SuperKind : std::uint8_t { none, heal, empower, shield };
enum class Outcome : std::uint8_t { none, win, loss, draw };

std::string_view to_string(Team t);
std::string_view to_string(SuperKind k);
std::string_view to_string(Outcome o);
SuperKind super_kind_from_string(std::string_view s);
Outcome outcome_from_string(std::string_view s);

/// Super slot within a hero's action block: heal=0, empower=1, shield=2.
inline constexpr int super_slot(SuperKind k) { return static_cast<int>(k) - 1; }
inline constexpr SuperKind super_from_slot(int slot) { return static_cast<SuperKind>(slot + 1); }

struct UnitStats {
  int max_hp = 10;
  int move_range = 4;
  int fire_range = 6;
  int shot_damage = 3;
  int stab_damage = 4;
  SuperKind super_kind = SuperKind::none;
  int super_cooldown = 2;

  friend bool operator==(const UnitStats&, const UnitStats&) = default;
};

/// Hero i owns super i: heal, empower, shield.
UnitStats default_hero_stats(int hero_index);
UnitStats default_enemy_stats();

/// Per-level tunables for the super capacities.
struct RuleParams {
  int empower_bonus = 2;
  int heal_amount = 3;
  int super_radius = 2;  // Chebyshev

  friend bool operator==(const RuleParams&, const RuleParams&) = default;
};

}  // namespace carmi
