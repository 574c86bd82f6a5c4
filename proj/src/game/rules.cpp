#include "carmi/game/rules.hpp"

#include <algorithm>
#include <deque>
#include <tuple>
#include <type_traits>
#include <utility>

#include "carmi/error.hpp"

namespace carmi {

namespace {

constexpr int kDx[8] = {-1, 0, 1, -1, 1, -1, 0, 1};
constexpr int kDy[8] = {-1, -1, -1, 0, 0, 1, 1, 1};

// Breadth-first expansion from `source`. Cells are enterable when `passable`
// says so; the source cell itself never needs to be. Stops at `max_cost`.
template <typename Passable>
std::vector<int> expand(const Terrain& t, int source, int max_cost, Passable passable) {
  std::vector<int> dist(static_cast<std::size_t>(t.num_cells()), -1);
  std::deque<int> queue;
  dist[source] = 0;
  queue.push_back(source);
  while (!queue.empty()) {
    const int cur = queue.front();
    queue.pop_front();
    const int d = dist[cur];
    if (d >= max_cost) continue;
    const Cell c = t.cell(cur);
    auto visit = [&](int next) {
      if (dist[next] < 0 && passable(next)) {
        dist[next] = d + 1;
        queue.push_back(next);
      }
    };
    for (int k = 0; k < 8; ++k) {
      const Cell n{c.x + kDx[k], c.y + kDy[k]};
      if (t.in_bounds(n)) visit(t.index(n));
    }
    if (t.portal_link[cur] >= 0) visit(t.portal_link[cur]);
  }
  return dist;
}

void emit(GameState& s, std::vector<StepEvent>* out, StepEvent ev) {
  ev.turn = s.turn_index;
  s.event_log.push_back(ev);
  if (out) out->push_back(ev);
}

void check_outcome(GameState& s, std::vector<StepEvent>* out) {
  if (s.outcome != Outcome::none) return;
  bool heroes_alive = false, enemies_alive = false;
  for (const Unit& u : s.units) {
    if (!u.alive) continue;
    (u.team == Team::hero ? heroes_alive : enemies_alive) = true;
  }
  if (enemies_alive && heroes_alive) return;
  s.outcome = enemies_alive ? Outcome::loss : Outcome::win;
  emit(s, out, {.kind = EventKind::episode_end, .team = s.acting_team, .outcome = s.outcome});
}

// Resolves one attack. A shield absorbs the whole hit and is consumed.
void attack(GameState& s, std::vector<StepEvent>* out, EventKind kind, int attacker, int target, int damage,
            bool empowered) {
  Unit& victim = s.units[target];
  const bool blocked = victim.shield_active;
  emit(s, out,
       {.kind = kind,
        .team = s.units[attacker].team,
        .unit = attacker,
        .target = target,
        .empowered = empowered,
        .blocked = blocked});
  if (blocked) {
    victim.shield_active = false;
    return;
  }
  victim.hp -= damage;
  if (victim.hp <= 0) {
    victim.hp = 0;
    victim.alive = false;
    s.occupancy[s.terrain->index(victim.pos)] = -1;
    emit(s, out,
         {.kind = EventKind::unit_killed, .team = s.units[attacker].team, .unit = attacker, .target = target});
    check_outcome(s, out);
  }
}

void move_unit(GameState& s, std::vector<StepEvent>* out, int id, Cell to) {
  Unit& u = s.units[id];
  s.occupancy[s.terrain->index(u.pos)] = -1;
  u.pos = to;
  s.occupancy[s.terrain->index(to)] = static_cast<std::int8_t>(id);
  emit(s, out, {.kind = EventKind::move, .team = u.team, .unit = id, .to = to});
}

void cast_super(GameState& s, std::vector<StepEvent>* out, int hero) {
  Unit& caster = s.units[hero_id(hero)];
  const int radius = s.rules.super_radius;
  for (int i = 0; i < kNumHeroes; ++i) {
    Unit& ally = s.units[hero_id(i)];
    if (!ally.alive || chebyshev(ally.pos, caster.pos) > radius) continue;
    switch (caster.stats.super_kind) {
      case SuperKind::heal:
        ally.hp = std::min(ally.stats.max_hp, ally.hp + s.rules.heal_amount);
        break;
      case SuperKind::empower:
        if (i != hero) ally.empowered = true;
        break;
      case SuperKind::shield:
        ally.shield_active = true;
        break;
      case SuperKind::none:
        break;
    }
  }
  const EventKind kind = caster.stats.super_kind == SuperKind::heal      ? EventKind::heal
                         : caster.stats.super_kind == SuperKind::empower ? EventKind::empower_cast
                                                                         : EventKind::shield;
  emit(s, out, {.kind = kind, .team = Team::hero, .unit = hero_id(hero)});
  caster.cooldown = caster.stats.super_cooldown;
}

bool adjacent(const GameState& s, int a, int b) { return chebyshev(s.units[a].pos, s.units[b].pos) == 1; }

bool has_non_skip_action(const GameState& s) {
  for (int h = 0; h < kNumHeroes; ++h) {
    const Unit& u = s.hero(h);
    if (!u.alive) continue;
    if (u.stats.super_kind != SuperKind::none && u.cooldown == 0) return true;
    for (int e = 0; e < kMaxEnemies; ++e) {
      if (!s.enemy(e).alive) continue;
      if (!u.has_stabbed && adjacent(s, hero_id(h), enemy_id(e))) return true;
      if (!u.has_shot && can_shoot(s, hero_id(h), enemy_id(e))) return true;
    }
    if (!reachable_cells(s, h).empty()) return true;
  }
  return false;
}

void advance_turn(GameState& s, std::vector<StepEvent>* out) {
  if (s.outcome != Outcome::none) return;
  ++s.turn_index;
  if (s.turn_index > s.max_turns) {
    s.outcome = Outcome::draw;
    emit(s, out, {.kind = EventKind::episode_end, .team = Team::enemy, .outcome = Outcome::draw});
    return;
  }
  for (int h = 0; h < kNumHeroes; ++h) {
    Unit& u = s.units[hero_id(h)];
    u.has_moved = u.has_shot = u.has_stabbed = false;
    u.cooldown = std::max(0, u.cooldown - 1);
  }
  s.acting_team = Team::hero;
}

// Lowest-hp living hero satisfying `pred`, lowest index on ties; -1 if none.
template <typename Pred>
int weakest_hero(const GameState& s, Pred pred) {
  int best = -1;
  for (int h = 0; h < kNumHeroes; ++h) {
    const int id = hero_id(h);
    if (!s.units[id].alive || !pred(id)) continue;
    if (best < 0 || s.units[id].hp < s.units[best].hp) best = id;
  }
  return best;
}

void enemy_act(GameState& s, std::vector<StepEvent>* out, int id) {
  const Unit& e = s.units[id];
  if (int target = weakest_hero(s, [&](int h) { return adjacent(s, id, h); }); target >= 0) {
    attack(s, out, EventKind::stab, id, target, e.stats.stab_damage, false);
    return;
  }
  if (int target = weakest_hero(s, [&](int h) { return can_shoot(s, id, h); }); target >= 0) {
    attack(s, out, EventKind::shot, id, target, e.stats.shot_damage, false);
    return;
  }
  // Approach the nearest hero by path length.
  int nearest = -1, nearest_dist = -1;
  std::vector<int> nearest_field;
  for (int h = 0; h < kNumHeroes; ++h) {
    if (!s.hero(h).alive) continue;
    auto field = distance_field(s, s.hero(h).pos, id);
    const int d = field[s.terrain->index(e.pos)];
    if (d > 0 && (nearest < 0 || d < nearest_dist)) {
      nearest = hero_id(h);
      nearest_dist = d;
      nearest_field = std::move(field);
    }
  }
  if (nearest < 0) return;
  const Cell hero_pos = s.units[nearest].pos;
  std::tuple<int, int, int> best_key{2, nearest_dist, -1};
  Cell best{};
  for (Cell c : reachable_from(s, id)) {
    const int idx = s.terrain->index(c);
    const int d = nearest_field[idx];
    if (d < 0 || d >= nearest_dist) continue;
    const int exposed = line_of_fire_clear(*s.terrain, c, hero_pos) ? 1 : 0;
    const std::tuple<int, int, int> key{exposed, d, idx};
    if (key < best_key) {
      best_key = key;
      best = c;
    }
  }
  if (std::get<2>(best_key) >= 0) move_unit(s, out, id, best);
}

void run_enemy_phase(GameState& s, std::vector<StepEvent>* out) {
  if (s.acting_team != Team::enemy) throw Error("enemy_turn called outside the enemy phase");
  for (int slot = 0; slot < kMaxEnemies && s.outcome == Outcome::none; ++slot)
    if (s.enemy(slot).alive) enemy_act(s, out, enemy_id(slot));
  advance_turn(s, out);
}

void end_hero_phase(GameState& s, std::vector<StepEvent>* out) {
  for (int h = 0; h < kNumHeroes; ++h) s.units[hero_id(h)].empowered = false;
  s.acting_team = Team::enemy;
  run_enemy_phase(s, out);
}

}  // namespace

bool line_of_fire_clear(const Terrain& t, Cell a, Cell b) {
  if (b < a) std::swap(a, b);
  const int dx = std::abs(b.x - a.x), sx = a.x < b.x ? 1 : -1;
  const int dy = -std::abs(b.y - a.y), sy = a.y < b.y ? 1 : -1;
  int err = dx + dy;
  Cell c = a;
  for (;;) {
    if (c == b) return true;
    if (c != a && t.statics[t.index(c)] == Static::cover) return false;
    const int e2 = 2 * err;
    if (e2 >= dy) {
      err += dy;
      c.x += sx;
    }
    if (e2 <= dx) {
      err += dx;
      c.y += sy;
    }
  }
}

std::vector<int> distance_field(const GameState& s, Cell source, int ignore_unit) {
  const Terrain& t = *s.terrain;
  return expand(t, t.index(source), t.num_cells(), [&](int idx) {
    return t.statics[idx] != Static::cover && (s.occupancy[idx] < 0 || s.occupancy[idx] == ignore_unit);
  });
}

std::vector<Cell> reachable_from(const GameState& s, int unit_id) {
  const Unit& u = s.units[unit_id];
  std::vector<Cell> cells;
  if (!u.alive) return cells;
  const Terrain& t = *s.terrain;
  const auto dist = expand(t, t.index(u.pos), u.stats.move_range, [&](int idx) { return s.empty_cell(idx); });
  for (int i = 0; i < t.num_cells(); ++i)
    if (dist[i] > 0) cells.push_back(t.cell(i));
  return cells;
}

std::vector<Cell> reachable_cells(const GameState& s, int hero_index) {
  const Unit& u = s.hero(hero_index);
  if (!u.alive || u.has_moved || u.has_shot) return {};
  return reachable_from(s, hero_id(hero_index));
}

bool can_shoot(const GameState& s, int shooter_id, int target_id) {
  const Unit& a = s.units[shooter_id];
  const Unit& b = s.units[target_id];
  return a.alive && b.alive && a.team != b.team && chebyshev(a.pos, b.pos) <= a.stats.fire_range &&
         line_of_fire_clear(*s.terrain, a.pos, b.pos);
}

ActionMask legal_actions(const GameState& s) {
  if (s.outcome != Outcome::none) throw Error("legal_actions called on a terminal state");
  if (s.acting_team != Team::hero) throw Error("legal_actions called outside the hero phase");
  const ActionSpace space(s.terrain->width, s.terrain->height);
  ActionMask mask(space.size());
  for (int h = 0; h < kNumHeroes; ++h) {
    const Unit& u = s.hero(h);
    if (!u.alive) continue;
    for (Cell c : reachable_cells(s, h)) mask.set(space.move_index(h, c));
    for (int e = 0; e < kMaxEnemies; ++e) {
      if (!s.enemy(e).alive) continue;
      if (!u.has_shot && can_shoot(s, hero_id(h), enemy_id(e))) mask.set(space.shoot_index(h, e));
      if (!u.has_stabbed && adjacent(s, hero_id(h), enemy_id(e))) mask.set(space.stab_index(h, e));
    }
    if (u.stats.super_kind != SuperKind::none && u.cooldown == 0) mask.set(space.super_index(h, u.stats.super_kind));
  }
  mask.set(space.skip_index());
  return mask;
}

bool is_legal(const GameState& s, const Action& action) {
  if (s.outcome != Outcome::none || s.acting_team != Team::hero) return false;
  auto valid_hero = [&](int h) { return h >= 0 && h < kNumHeroes && s.hero(h).alive; };
  auto valid_enemy = [&](int e) { return e >= 0 && e < kMaxEnemies && s.enemy(e).alive; };
  return std::visit(
      [&](const auto& a) -> bool {
        using T = std::decay_t<decltype(a)>;
        if constexpr (std::is_same_v<T, Skip>) {
          return true;
        } else if constexpr (std::is_same_v<T, Move>) {
          if (!valid_hero(a.hero)) return false;
          const auto cells = reachable_cells(s, a.hero);
          return std::find(cells.begin(), cells.end(), a.target) != cells.end();
        } else if constexpr (std::is_same_v<T, Shoot>) {
          return valid_hero(a.hero) && valid_enemy(a.enemy_slot) && !s.hero(a.hero).has_shot &&
                 can_shoot(s, hero_id(a.hero), enemy_id(a.enemy_slot));
        } else if constexpr (std::is_same_v<T, Stab>) {
          return valid_hero(a.hero) && valid_enemy(a.enemy_slot) && !s.hero(a.hero).has_stabbed &&
                 adjacent(s, hero_id(a.hero), enemy_id(a.enemy_slot));
        } else {
          return valid_hero(a.hero) && a.kind != SuperKind::none && s.hero(a.hero).stats.super_kind == a.kind &&
                 s.hero(a.hero).cooldown == 0;
        }
      },
      action);
}

StepResult step(GameState& s, const Action& action) {
  if (s.outcome != Outcome::none) throw IllegalActionError("step called on a finished episode");
  if (!is_legal(s, action)) throw IllegalActionError("illegal action rejected");
  StepResult result;
  auto* out = &result.events;
  bool phase_over = false;
  std::visit(
      [&](const auto& a) {
        using T = std::decay_t<decltype(a)>;
        if constexpr (std::is_same_v<T, Skip>) {
          emit(s, out, {.kind = EventKind::skip, .team = Team::hero});
          phase_over = true;
        } else if constexpr (std::is_same_v<T, Move>) {
          move_unit(s, out, hero_id(a.hero), a.target);
          s.units[hero_id(a.hero)].has_moved = true;
        } else if constexpr (std::is_same_v<T, Shoot>) {
          Unit& u = s.units[hero_id(a.hero)];
          u.has_shot = true;
          const int damage = u.stats.shot_damage + (u.empowered ? s.rules.empower_bonus : 0);
          attack(s, out, EventKind::shot, hero_id(a.hero), enemy_id(a.enemy_slot), damage, u.empowered);
        } else if constexpr (std::is_same_v<T, Stab>) {
          Unit& u = s.units[hero_id(a.hero)];
          u.has_stabbed = true;
          attack(s, out, EventKind::stab, hero_id(a.hero), enemy_id(a.enemy_slot), u.stats.stab_damage, false);
        } else {
          cast_super(s, out, a.hero);
        }
      },
      action);
  if (s.outcome == Outcome::none && (phase_over || !has_non_skip_action(s))) {
    end_hero_phase(s, out);
    result.turn_ended = true;
  }
  result.outcome = s.outcome;
  return result;
}

void enemy_turn(GameState& s) { run_enemy_phase(s, nullptr); }

}  // namespace carmi
