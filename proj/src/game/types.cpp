#include "carmi/game/types.hpp"

#include <string>

#include "carmi/error.hpp"

namespace carmi {

std::string_view to_string(Team t) { return t == Team::hero ? "hero" : "enemy"; }

std::string_view to_string(SuperKind k) {
  switch (k) {
    case SuperKind::heal: return "heal";
    case SuperKind::empower: return "empower";
    case SuperKind::shield: return "shield";
    case SuperKind::none: break;
  }
  return "none";
}

std::string_view to_string(Outcome o) {
  switch (o) {
    case Outcome::win: return "win";
    case Outcome::loss: return "loss";
    case Outcome::draw: return "draw";
    case Outcome::none: break;
  }
  return "none";
}

SuperKind super_kind_from_string(std::string_view s) {
  if (s == "heal") return SuperKind::heal;
  if (s == "empower") return SuperKind::empower;
  if (s == "shield") return SuperKind::shield;
  if (s == "none") return SuperKind::none;
  throw Error("unknown super kind '" + std::string(s) + "'");
}

Outcome outcome_from_string(std::string_view s) {
  if (s == "win") return Outcome::win;
  if (s == "loss") return Outcome::loss;
  if (s == "draw") return Outcome::draw;
  if (s == "none") return Outcome::none;
  throw Error("unknown outcome '" + std::string(s) + "'");
}

UnitStats default_hero_stats(int hero_index) {
  UnitStats s{.max_hp = 10, .move_range = 4, .fire_range = 6, .shot_damage = 3, .stab_damage = 4};
  s.super_kind = super_from_slot(hero_index);
  return s;
}

UnitStats default_enemy_stats() {
  return UnitStats{.max_hp = 6,
                   .move_range = 3,
                   .fire_range = 5,
                   .shot_damage = 2,
                   .stab_damage = 3,
                   .super_kind = SuperKind::none};
}

}  // namespace carmi
