#include <gtest/gtest.h>

#include <algorithm>
#include <functional>
#include <set>
#include <sstream>

#include "carmi/error.hpp"
#include "carmi/game/event_log.hpp"
#include "carmi/game/level.hpp"
#include "carmi/game/observation.hpp"
#include "carmi/game/rules.hpp"
#include "test_util.hpp"

namespace carmi {
namespace {

using testing::kill;
using testing::open_level;
using testing::place;

TEST(GenerateLevel, SameSeedSameSpec) {
  const LevelGenParams params;
  const auto a = generate_level(7, params);
  const auto b = generate_level(7, params);
  EXPECT_EQ(a, b);
  EXPECT_EQ(nlohmann::json(a).dump(), nlohmann::json(b).dump());
}

TEST(GenerateLevel, ForcedEnemyCount) {
  LevelGenParams params;
  params.enemy_count = {3, 3};
  const auto l = generate_level(7, params);
  EXPECT_EQ(l.enemy_count, 3);
  EXPECT_EQ(l.enemy_spawns.size(), 3u);
}

TEST(GenerateLevel, SeedSweepNeverFails) {
  const LevelGenParams params;
  for (std::uint64_t seed = 0; seed < 100; ++seed) EXPECT_NO_THROW(validate(generate_level(seed, params)));
}

TEST(GenerateLevel, InfeasibleParamsRejected) {
  LevelGenParams params;
  params.width = {4, 4};
  params.height = {4, 4};
  params.enemy_count = {8, 8};
  EXPECT_THROW(generate_level(1, params), GenerationError);
  params.enemy_count = {5, 2};
  EXPECT_THROW(generate_level(1, params), GenerationError);
}

TEST(LevelSpec, JsonRoundTrip) {
  auto l = generate_level(11, LevelGenParams{});
  l.stat_overrides[enemy_id(1)] = UnitStats{.max_hp = 9, .super_kind = SuperKind::none};
  const auto back = nlohmann::json::parse(nlohmann::json(l).dump()).get<LevelSpec>();
  EXPECT_EQ(back, l);
}

TEST(LevelSpec, ValidationCatchesOverlap) {
  auto l = open_level(6, 6, 2);
  l.cover_cells.push_back(l.hero_spawns[0]);
  EXPECT_THROW(validate(l), Error);
  l = open_level(6, 6, 2);
  l.enemy_count = 3;
  EXPECT_THROW(validate(l), Error);
}

TEST(Reset, InitialState) {
  const auto l = open_level(10, 10, 5);
  const auto s = reset(l);
  EXPECT_EQ(s.turn_index, 1);
  EXPECT_EQ(s.acting_team, Team::hero);
  EXPECT_TRUE(s.event_log.empty());
  EXPECT_EQ(s.outcome, Outcome::none);
  for (int h = 0; h < kNumHeroes; ++h) {
    EXPECT_EQ(s.hero(h).hp, s.hero(h).stats.max_hp);
    EXPECT_EQ(s.hero(h).cooldown, 0);
  }
  for (int e = 0; e < kMaxEnemies; ++e) EXPECT_EQ(s.enemy(e).alive, e < 5);
  EXPECT_EQ(reset(l), s);
}

TEST(ReachableCells, OpenBoardChebyshevDisk) {
  auto l = open_level(10, 10, 1);
  l.hero_spawns = {Cell{5, 5}, Cell{0, 0}, Cell{0, 9}};
  l.stat_overrides[0] = default_hero_stats(0);
  l.stat_overrides[0].move_range = 2;
  const auto s = reset(l);
  const auto cells = reachable_cells(s, 0);
  EXPECT_EQ(cells.size(), 24u);
  for (Cell c : cells) EXPECT_LE(chebyshev(c, {5, 5}), 2);
}

TEST(ReachableCells, WalledInIsEmpty) {
  auto l = open_level(10, 10, 1);
  l.hero_spawns = {Cell{5, 5}, Cell{0, 0}, Cell{0, 9}};
  for (int dy = -1; dy <= 1; ++dy)
    for (int dx = -1; dx <= 1; ++dx)
      if (dx || dy) l.cover_cells.push_back({5 + dx, 5 + dy});
  EXPECT_TRUE(reachable_cells(reset(l), 0).empty());
}

TEST(ReachableCells, EmptyAfterShooting) {
  auto s = reset(open_level(6, 6, 1));
  s.units[hero_id(0)].has_shot = true;
  EXPECT_TRUE(reachable_cells(s, 0).empty());
}

// Exhaustive walk enumeration: every sequence of <= range steps through empty
// cells, where a step is a king move or, from a portal, the jump to its pair.
std::set<Cell> enumerate_walk_endpoints(const GameState& s, Cell start, int range) {
  const Terrain& t = *s.terrain;
  std::set<Cell> out;
  std::function<void(Cell, int)> walk = [&](Cell c, int left) {
    if (c != start) out.insert(c);
    if (left == 0) return;
    std::vector<Cell> next;
    for (int dy = -1; dy <= 1; ++dy)
      for (int dx = -1; dx <= 1; ++dx)
        if (dx || dy) next.push_back({c.x + dx, c.y + dy});
    if (t.portal_link[t.index(c)] >= 0) next.push_back(t.cell(t.portal_link[t.index(c)]));
    for (Cell n : next)
      if (t.in_bounds(n) && s.empty_cell(t.index(n))) walk(n, left - 1);
  };
  walk(start, range);
  return out;
}

TEST(ReachableCells, PortalShortcutMatchesExhaustiveOracle) {
  LevelSpec l = open_level(6, 6, 1);
  l.hero_spawns = {Cell{0, 1}, Cell{0, 4}, Cell{2, 4}};
  l.enemy_spawns = {Cell{3, 0}};
  l.portal_pairs = {{Cell{0, 0}, Cell{5, 5}}};
  l.cover_cells = {Cell{1, 1}, Cell{1, 2}, Cell{4, 4}};
  l.stat_overrides[0] = default_hero_stats(0);
  l.stat_overrides[0].move_range = 2;
  ASSERT_GT(chebyshev({0, 0}, {5, 5}), 2 * 2);
  const auto s = reset(l);
  const auto cells = reachable_cells(s, 0);
  const std::set<Cell> got(cells.begin(), cells.end());
  EXPECT_EQ(got, enumerate_walk_endpoints(s, {0, 1}, 2));
  EXPECT_TRUE(got.count({5, 5}));

  // Longer range: pair-side neighbours become reachable too.
  l.stat_overrides[0].move_range = 3;
  const auto s3 = reset(l);
  const auto cells3 = reachable_cells(s3, 0);
  const std::set<Cell> got3(cells3.begin(), cells3.end());
  EXPECT_EQ(got3, enumerate_walk_endpoints(s3, {0, 1}, 3));
  EXPECT_TRUE(got3.count({5, 4}));
}

TEST(ActionSpace, PaperCountAndDesk) {
  EXPECT_EQ(ActionSpace(20, 20).size(), 1258);
  EXPECT_EQ(ActionSpace(10, 10).size(), 358);
  EXPECT_EQ(legal_actions(reset(open_level(20, 20, 3))).size(), 1258);
  EXPECT_EQ(legal_actions(reset(open_level(10, 10, 3))).size(), 358);
  for (int w = 2; w <= 12; ++w)
    for (int h = 2; h <= 12; ++h) EXPECT_EQ(ActionSpace(w, h).size(), 3 * (w * h + 8 + 8 + 3) + 1);
}

TEST(ActionSpace, EncodeDecodeIsABijection) {
  const ActionSpace space(7, 5);
  for (int i = 0; i < space.size(); ++i) EXPECT_EQ(space.encode(space.decode(i)), i);
  EXPECT_THROW(space.decode(space.size()), Error);
}

TEST(LegalActions, FreshStateAllowsSkipAndOwnedSupers) {
  const auto s = reset(open_level(10, 10, 3));
  const auto mask = legal_actions(s);
  const ActionSpace space(10, 10);
  EXPECT_TRUE(mask[space.skip_index()]);
  EXPECT_TRUE(mask[space.super_index(0, SuperKind::heal)]);
  EXPECT_FALSE(mask[space.super_index(0, SuperKind::shield)]);
  EXPECT_TRUE(mask[space.super_index(2, SuperKind::shield)]);
  EXPECT_FALSE(mask[space.super_index(1, SuperKind::heal)]);
}

TEST(LegalActions, TerminalStateIsAnError) {
  auto s = reset(open_level(10, 10, 1));
  s.outcome = Outcome::win;
  EXPECT_THROW(legal_actions(s), Error);
}

TEST(LegalActions, CoverBlocksShots) {
  auto l = open_level(10, 10, 1);
  l.hero_spawns = {Cell{2, 5}, Cell{0, 0}, Cell{0, 9}};
  l.enemy_spawns = {Cell{6, 5}};
  const ActionSpace space(10, 10);
  EXPECT_TRUE(legal_actions(reset(l))[space.shoot_index(0, 0)]);
  l.cover_cells = {Cell{4, 5}};
  EXPECT_FALSE(legal_actions(reset(l))[space.shoot_index(0, 0)]);
}

TEST(Step, ShieldBlocksOneAttack) {
  auto s = reset(open_level(10, 10, 2));
  place(s, hero_id(0), {4, 4});
  place(s, enemy_id(0), {6, 4});
  s.units[enemy_id(0)].shield_active = true;
  const int hp = s.enemy(0).hp;
  const auto r = step(s, Shoot{0, 0});
  EXPECT_EQ(s.enemy(0).hp, hp);
  EXPECT_FALSE(s.enemy(0).shield_active);
  ASSERT_FALSE(r.events.empty());
  EXPECT_TRUE(r.events.front().blocked);
}

TEST(Step, EmpoweredShotDealsBonus) {
  auto l = open_level(10, 10, 2);
  l.hero_spawns = {Cell{3, 3}, Cell{3, 4}, Cell{0, 9}};
  l.enemy_spawns = {Cell{7, 3}, Cell{9, 9}};
  l.stat_overrides[enemy_id(0)] = default_enemy_stats();
  l.stat_overrides[enemy_id(0)].max_hp = 20;
  auto s = reset(l);
  step(s, Super{1, SuperKind::empower});
  EXPECT_TRUE(s.hero(0).empowered);
  EXPECT_FALSE(s.hero(1).empowered);  // caster excluded
  const auto r = step(s, Shoot{0, 0});
  EXPECT_EQ(s.enemy(0).hp, 20 - (s.hero(0).stats.shot_damage + s.rules.empower_bonus));
  EXPECT_EQ(r.events.front().kind, EventKind::shot);
  EXPECT_TRUE(r.events.front().empowered);
}

TEST(Step, HealRestoresUpToMax) {
  auto l = open_level(10, 10, 1);
  l.hero_spawns = {Cell{3, 3}, Cell{4, 4}, Cell{8, 0}};
  auto s = reset(l);
  s.units[hero_id(1)].hp = 5;
  s.units[hero_id(2)].hp = 5;  // out of radius
  step(s, Super{0, SuperKind::heal});
  EXPECT_EQ(s.hero(1).hp, 8);
  EXPECT_EQ(s.hero(2).hp, 5);
  EXPECT_EQ(s.hero(0).hp, s.hero(0).stats.max_hp);
  EXPECT_EQ(s.hero(0).cooldown, 2);
}

TEST(Step, PassiveGameIsADraw) {
  auto l = open_level(12, 12, 1);
  // Enemy boxed in by covers: nobody can ever engage.
  l.enemy_spawns = {Cell{11, 11}};
  l.cover_cells = {Cell{10, 10}, Cell{10, 11}, Cell{11, 10}};
  auto s = reset(l);
  int skips = 0;
  while (!s.terminal()) {
    step(s, Skip{});
    ++skips;
  }
  EXPECT_EQ(skips, 10);
  EXPECT_EQ(s.outcome, Outcome::draw);
  EXPECT_GT(s.turn_index, s.max_turns);
  EXPECT_EQ(s.turns_played(), 10);
  EXPECT_EQ(s.event_log.back().kind, EventKind::episode_end);
}

TEST(Step, IllegalActionRejectedWithoutSideEffects) {
  auto s = reset(open_level(10, 10, 2));
  const auto before = s;
  EXPECT_THROW(step(s, Stab{0, 0}), IllegalActionError);
  EXPECT_THROW(step(s, Move{0, Cell{9, 9}}), IllegalActionError);
  EXPECT_THROW(step(s, Super{0, SuperKind::shield}), IllegalActionError);
  EXPECT_EQ(s, before);
}

TEST(Step, NoMoveAfterShooting) {
  auto s = reset(open_level(10, 10, 1));
  place(s, hero_id(0), {5, 5});
  place(s, enemy_id(0), {8, 5});
  step(s, Shoot{0, 0});
  EXPECT_THROW(step(s, Move{0, Cell{4, 4}}), IllegalActionError);
  EXPECT_THROW(step(s, Shoot{0, 0}), IllegalActionError);
}

TEST(Step, KillingLastEnemyWins) {
  auto s = reset(open_level(10, 10, 1));
  place(s, hero_id(0), {5, 5});
  place(s, enemy_id(0), {6, 5});
  s.units[enemy_id(0)].hp = 2;
  const auto r = step(s, Stab{0, 0});
  EXPECT_EQ(r.outcome, Outcome::win);
  EXPECT_FALSE(s.enemy(0).alive);
  EXPECT_EQ(s.occupancy[s.terrain->index({6, 5})], -1);
}

TEST(EnemyTurn, StabsWeakestAdjacentHero) {
  auto s = reset(open_level(10, 10, 1));
  place(s, enemy_id(0), {5, 5});
  place(s, hero_id(0), {4, 5});
  place(s, hero_id(1), {6, 5});
  place(s, hero_id(2), {0, 9});
  s.units[hero_id(0)].hp = 7;
  s.units[hero_id(1)].hp = 3;
  s.acting_team = Team::enemy;
  enemy_turn(s);
  EXPECT_EQ(s.hero(1).hp, 0);
  EXPECT_EQ(s.hero(0).hp, 7);
}

TEST(EnemyTurn, ApproachesNearestHero) {
  // Independent BFS oracle over the same passability rules.
  auto bfs = [](const GameState& s, Cell from, Cell to, int ignore) {
    const Terrain& t = *s.terrain;
    std::vector<int> d(t.num_cells(), -1);
    std::vector<int> q{t.index(from)};
    d[t.index(from)] = 0;
    for (std::size_t i = 0; i < q.size(); ++i) {
      const Cell c = t.cell(q[i]);
      std::vector<Cell> nb;
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx)
          if (dx || dy) nb.push_back({c.x + dx, c.y + dy});
      if (t.portal_link[q[i]] >= 0) nb.push_back(t.cell(t.portal_link[q[i]]));
      for (Cell n : nb) {
        if (!t.in_bounds(n)) continue;
        const int ni = t.index(n);
        const bool ok = n == to || (t.statics[ni] != Static::cover &&
                                    (s.occupancy[ni] < 0 || s.occupancy[ni] == ignore));
        if (ok && d[ni] < 0) {
          d[ni] = d[q[i]] + 1;
          q.push_back(ni);
        }
      }
    }
    return d[t.index(to)];
  };
  Rng rng(3);
  int checked = 0;
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    LevelGenParams p;
    p.width = {12, 12};
    p.height = {12, 12};
    auto l = generate_level(seed, p);
    for (int slot = 0; slot < l.enemy_count; ++slot) l.stat_overrides[enemy_id(slot)] = default_enemy_stats();
    for (auto& [id, st] : l.stat_overrides) st.fire_range = 0;  // force movement
    auto s = reset(l);
    for (int slot = 1; slot < l.enemy_count; ++slot) kill(s, enemy_id(slot));
    const int e = enemy_id(0);
    int before = 1 << 30;
    for (int h = 0; h < kNumHeroes; ++h) {
      const int d = bfs(s, s.units[e].pos, s.hero(h).pos, e);
      if (d > 0) before = std::min(before, d);
    }
    if (before <= 1 || before == (1 << 30)) continue;
    s.acting_team = Team::enemy;
    enemy_turn(s);
    int after = 1 << 30;
    for (int h = 0; h < kNumHeroes; ++h) {
      const int d = bfs(s, s.units[e].pos, s.hero(h).pos, e);
      if (d > 0) after = std::min(after, d);
    }
    EXPECT_LT(after, before) << "seed " << seed;
    ++checked;
  }
  EXPECT_GT(checked, 20);
}

TEST(EnemyTurn, Deterministic) {
  const auto l = generate_level(5, LevelGenParams{});
  auto a = reset(l);
  auto b = reset(l);
  a.acting_team = b.acting_team = Team::enemy;
  enemy_turn(a);
  enemy_turn(b);
  EXPECT_EQ(a, b);
}

TEST(EnemyTurn, WrongPhaseIsAnError) {
  auto s = reset(open_level(10, 10, 1));
  EXPECT_THROW(enemy_turn(s), Error);
}

TEST(Observation, Layout) {
  auto l = open_level(20, 20, 5);
  l.cover_cells = {Cell{10, 10}, Cell{3, 17}};
  l.portal_pairs = {{Cell{1, 15}, Cell{18, 2}}};
  auto s = reset(l);
  kill(s, enemy_id(2));
  const auto obs = encode_observation(s);
  const int n = 400;
  EXPECT_EQ(obs.map.size() + obs.vector.size(), state_size(20, 20));
  for (int i = 0; i < n; ++i) {
    const Cell c{i % 20, i / 20};
    const int expected = (c == Cell{10, 10} || c == Cell{3, 17}) ? 1 : (c == Cell{1, 15} || c == Cell{18, 2}) ? 2 : 0;
    EXPECT_EQ(obs.map[2 * n + i], expected);
  }
  EXPECT_EQ(obs.map[0 * n + 1 * 20 + 0], 2);  // hero 1 at (0, 1)
  EXPECT_EQ(obs.map[1 * n + 0 * 20 + 19], 1);  // enemy slot 0 at (19, 0)
  EXPECT_FLOAT_EQ(obs.vector[0], 1.0f);
  EXPECT_FLOAT_EQ(obs.vector[1], 1.0f);  // hero 0 hp fraction
  const std::size_t enemy2 = 1 + kNumHeroes * kHeroFeatures + 2 * kEnemyFeatures;
  EXPECT_FLOAT_EQ(obs.vector[enemy2], 0.0f);
  EXPECT_FLOAT_EQ(obs.vector[enemy2 + 1], 0.0f);
  for (float v : obs.vector) EXPECT_TRUE(std::isfinite(v));
}

// ---- whole-episode properties ----

TEST(GameProperties, RandomPlayInvariants) {
  Rng rng(17);
  for (std::uint64_t seed = 0; seed < 60; ++seed) {
    const auto level = generate_level(seed, LevelGenParams{});
    const ActionSpace space(level.width, level.height);
    GameState s = reset(level);
    std::array<int, kNumUnits> prev_hp{};
    for (int i = 0; i < kNumUnits; ++i) prev_hp[i] = s.units[i].hp;
    while (!s.terminal()) {
      const auto legal = legal_actions(s).legal_indices();
      const int turn = s.turn_index;
      const auto r = step(s, space.decode(legal[rng.below(legal.size())]));
      bool healed = false;
      for (const auto& e : r.events) healed |= e.kind == EventKind::heal;
      for (int i = 0; i < kNumUnits; ++i) {
        EXPECT_LE(s.units[i].hp, s.units[i].stats.max_hp);
        if (!healed) EXPECT_LE(s.units[i].hp, prev_hp[i]);
        prev_hp[i] = s.units[i].hp;
      }
      EXPECT_LE(s.turn_index, turn + 1);
      // one unit per cell
      std::vector<int> seen(level.width * level.height, 0);
      for (const auto& u : s.units)
        if (u.alive) EXPECT_EQ(++seen[s.terrain->index(u.pos)], 1);
    }
    EXPECT_LE(s.turns_played(), s.max_turns);
    EXPECT_NE(s.outcome, Outcome::none);
    if (s.outcome == Outcome::draw) EXPECT_GT(s.turn_index, s.max_turns);

    // Per-turn limits on the hero side.
    std::map<std::pair<int, int>, std::array<int, 2>> per_turn;  // (turn, unit) -> shots, stabs
    std::set<std::pair<int, int>> shot_before;
    for (const auto& e : s.event_log) {
      if (e.team != Team::hero) continue;
      const auto key = std::make_pair(e.turn, e.unit);
      if (e.kind == EventKind::shot) {
        EXPECT_LE(++per_turn[key][0], 1);
        shot_before.insert(key);
      }
      if (e.kind == EventKind::stab) EXPECT_LE(++per_turn[key][1], 1);
      if (e.kind == EventKind::move) EXPECT_FALSE(shot_before.count(key));
    }
  }
}

TEST(GameProperties, SameActionsSameLog) {
  const auto level = generate_level(23, LevelGenParams{});
  Rng a(5), b(5);
  const auto sa = testing::play_random(level, a);
  const auto sb = testing::play_random(level, b);
  EXPECT_EQ(sa.event_log, sb.event_log);
}

TEST(GameProperties, MaskSoundnessSample) {
  Rng rng(99);
  int states = 0;
  for (std::uint64_t seed = 0; states < 400; ++seed) {
    const auto level = generate_level(seed, LevelGenParams{});
    const ActionSpace space(level.width, level.height);
    std::vector<GameState> visited;
    testing::play_random(level, rng, &visited);
    for (const auto& s : visited) {
      const auto mask = legal_actions(s);
      for (int i = 0; i < mask.size(); ++i) {
        GameState copy = s;
        if (mask[i]) {
          EXPECT_NO_THROW(step(copy, space.decode(i)));
        } else {
          EXPECT_THROW(step(copy, space.decode(i)), IllegalActionError);
        }
      }
      ++states;
    }
  }
}

TEST(EventLog, JsonLinesRoundTrip) {
  const auto level = generate_level(4, LevelGenParams{});
  Rng rng(1);
  const auto s = testing::play_random(level, rng);
  std::stringstream io;
  EpisodeHeader h{.level_id = level.level_id, .seed = 9, .mode = "persona", .turns_played = s.turns_played(),
                  .outcome = s.outcome, .num_events = s.event_log.size()};
  write_episode_log(io, h, s.event_log);
  write_episode_log(io, h, s.event_log);
  const auto back = read_episode_logs(io);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0].header, h);
  EXPECT_EQ(back[1].events, s.event_log);
}

}  // namespace
}  // namespace carmi
