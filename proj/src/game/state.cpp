#include "carmi/game/state.hpp"

#include <string>

#include "carmi/error.hpp"

namespace carmi {

std::shared_ptr<const Terrain> make_terrain(const LevelSpec& level) {
  auto t = std::make_shared<Terrain>();
  t->width = level.width;
  t->height = level.height;
  t->statics.assign(static_cast<std::size_t>(level.width * level.height), Static::empty);
  t->portal_link.assign(static_cast<std::size_t>(level.width * level.height), -1);
  for (Cell c : level.cover_cells) t->statics[t->index(c)] = Static::cover;
  for (auto [a, b] : level.portal_pairs) {
    t->statics[t->index(a)] = Static::portal;
    t->statics[t->index(b)] = Static::portal;
    t->portal_link[t->index(a)] = t->index(b);
    t->portal_link[t->index(b)] = t->index(a);
  }
  return t;
}

std::string_view to_string(EventKind k) {
  switch (k) {
    case EventKind::shot: return "shot";
    case EventKind::stab: return "stab";
    case EventKind::heal: return "heal";
    case EventKind::shield: return "shield";
    case EventKind::empower_cast: return "empower_cast";
    case EventKind::move: return "move";
    case EventKind::skip: return "skip";
    case EventKind::unit_killed: return "unit_killed";
    case EventKind::episode_end: return "episode_end";
  }
  return "skip";
}

EventKind event_kind_from_string(std::string_view s) {
  for (int k = 0; k <= static_cast<int>(EventKind::episode_end); ++k)
    if (to_string(static_cast<EventKind>(k)) == s) return static_cast<EventKind>(k);
  throw Error("unknown event kind '" + std::string(s) + "'");
}

bool operator==(const GameState& a, const GameState& b) {
  const bool same_terrain = a.terrain == b.terrain ||
                            (a.terrain && b.terrain && a.terrain->width == b.terrain->width &&
                             a.terrain->height == b.terrain->height && a.terrain->statics == b.terrain->statics &&
                             a.terrain->portal_link == b.terrain->portal_link);
  return same_terrain && a.level_id == b.level_id && a.turn_index == b.turn_index &&
         a.max_turns == b.max_turns && a.acting_team == b.acting_team && a.rules == b.rules &&
         a.units == b.units && a.occupancy == b.occupancy && a.event_log == b.event_log &&
         a.outcome == b.outcome;
}

GameState reset(const LevelSpec& level) {
  validate(level);
  GameState s;
  s.terrain = make_terrain(level);
  s.level_id = level.level_id;
  s.max_turns = level.max_turns;
  s.rules = level.rules;
  s.occupancy.assign(static_cast<std::size_t>(level.width * level.height), -1);
  for (int id = 0; id < kNumUnits; ++id) {
    Unit& u = s.units[id];
    const bool is_hero = id < kNumHeroes;
    u.team = is_hero ? Team::hero : Team::enemy;
    u.slot = is_hero ? id : id - kNumHeroes;
    u.stats = unit_stats(level, id);
    const bool present = is_hero || u.slot < level.enemy_count;
    if (!present) continue;
    u.pos = is_hero ? level.hero_spawns[u.slot] : level.enemy_spawns[u.slot];
    u.hp = u.stats.max_hp;
    u.alive = true;
    s.occupancy[s.terrain->index(u.pos)] = static_cast<std::int8_t>(id);
  }
  return s;
}

}  // namespace carmi
