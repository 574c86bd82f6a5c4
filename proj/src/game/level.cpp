#include "carmi/game/level.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <set>
#include <string>

#include "carmi/error.hpp"
#include "carmi/rng.hpp"

namespace carmi {

namespace {

bool in_bounds(const LevelSpec& l, Cell c) {
  return c.x >= 0 && c.y >= 0 && c.x < l.width && c.y < l.height;
}

std::string describe(Cell c) { return "(" + std::to_string(c.x) + "," + std::to_string(c.y) + ")"; }

std::string unit_key(int unit_id) {
  return unit_id < kNumHeroes ? "hero" + std::to_string(unit_id)
                              : "enemy" + std::to_string(unit_id - kNumHeroes);
}

int unit_id_from_key(const std::string& key) {
  if (key.rfind("hero", 0) == 0) return std::stoi(key.substr(4));
  if (key.rfind("enemy", 0) == 0) return kNumHeroes + std::stoi(key.substr(5));
  throw Error("bad stat_overrides key '" + key + "'");
}

// Every spawn reachable from hero spawn 0 through non-cover cells.
bool spawns_connected(const LevelSpec& l) {
  const int n = l.width * l.height;
  std::vector<char> blocked(static_cast<std::size_t>(n), 0);
  std::vector<int> link(static_cast<std::size_t>(n), -1);
  for (Cell c : l.cover_cells) blocked[c.y * l.width + c.x] = 1;
  for (auto [a, b] : l.portal_pairs) {
    link[a.y * l.width + a.x] = b.y * l.width + b.x;
    link[b.y * l.width + b.x] = a.y * l.width + a.x;
  }
  std::vector<char> seen(static_cast<std::size_t>(n), 0);
  std::deque<int> queue;
  const int start = l.hero_spawns[0].y * l.width + l.hero_spawns[0].x;
  seen[start] = 1;
  queue.push_back(start);
  while (!queue.empty()) {
    const int cur = queue.front();
    queue.pop_front();
    const int cx = cur % l.width, cy = cur / l.width;
    auto visit = [&](int idx) {
      if (!seen[idx] && !blocked[idx]) {
        seen[idx] = 1;
        queue.push_back(idx);
      }
    };
    for (int dy = -1; dy <= 1; ++dy)
      for (int dx = -1; dx <= 1; ++dx) {
        const int nx = cx + dx, ny = cy + dy;
        if ((dx || dy) && nx >= 0 && ny >= 0 && nx < l.width && ny < l.height) visit(ny * l.width + nx);
      }
    if (link[cur] >= 0) visit(link[cur]);
  }
  auto ok = [&](Cell c) { return seen[c.y * l.width + c.x] != 0; };
  return std::all_of(l.hero_spawns.begin(), l.hero_spawns.end(), ok) &&
         std::all_of(l.enemy_spawns.begin(), l.enemy_spawns.end(), ok);
}

void check_range(const IntRange& r, int min_lo, int max_hi, const char* name) {
  if (r.lo > r.hi || r.lo < min_lo || r.hi > max_hi)
    throw GenerationError(std::string("level generation: bad ") + name + " range [" +
                          std::to_string(r.lo) + "," + std::to_string(r.hi) + "]");
}

}  // namespace

void validate(const LevelSpec& l) {
  if (l.width < 2 || l.height < 2) throw Error("level: board must be at least 2x2");
  if (l.max_turns < 1) throw Error("level: max_turns must be >= 1");
  if (l.enemy_count < 1 || l.enemy_count > kMaxEnemies)
    throw Error("level: enemy_count must be in [1, 8]");
  if (static_cast<int>(l.enemy_spawns.size()) != l.enemy_count)
    throw Error("level: enemy_count != number of enemy spawns");
  std::set<Cell> used;
  auto claim = [&](Cell c, const char* what) {
    if (!in_bounds(l, c)) throw Error(std::string("level: ") + what + " out of bounds at " + describe(c));
    if (!used.insert(c).second)
      throw Error(std::string("level: ") + what + " overlaps another feature at " + describe(c));
  };
  for (Cell c : l.hero_spawns) claim(c, "hero spawn");
  for (Cell c : l.enemy_spawns) claim(c, "enemy spawn");
  for (Cell c : l.cover_cells) claim(c, "cover");
  for (auto [a, b] : l.portal_pairs) {
    claim(a, "portal");
    claim(b, "portal");
  }
  for (const auto& [id, s] : l.stat_overrides) {
    if (id < 0 || id >= kNumUnits) throw Error("level: stat override for unknown unit");
    if (s.max_hp <= 0 || s.move_range < 0 || s.fire_range < 0 || s.shot_damage < 0 ||
        s.stab_damage < 0 || s.super_cooldown < 0)
      throw Error("level: stat override has negative values for " + unit_key(id));
  }
}

UnitStats unit_stats(const LevelSpec& level, int unit_id) {
  if (auto it = level.stat_overrides.find(unit_id); it != level.stat_overrides.end()) return it->second;
  return unit_id < kNumHeroes ? default_hero_stats(unit_id) : default_enemy_stats();
}

LevelSpec generate_level(std::uint64_t seed, const LevelGenParams& p, int level_id) {
  check_range(p.width, 4, 64, "width");
  check_range(p.height, 4, 64, "height");
  check_range(p.enemy_count, 1, kMaxEnemies, "enemy_count");
  check_range(p.portal_pairs, 0, 32, "portal_pairs");
  if (p.cover_density.lo > p.cover_density.hi || p.cover_density.lo < 0.0 || p.cover_density.hi > 0.9)
    throw GenerationError("level generation: bad cover_density range");

  Rng rng(derive_seed(seed, "level", {static_cast<std::uint64_t>(level_id)}));
  constexpr int kMaxAttempts = 200;
  for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
    LevelSpec l;
    l.level_id = level_id;
    l.rng_seed = derive_seed(seed, "level-spec", {static_cast<std::uint64_t>(level_id)});
    l.max_turns = p.max_turns;
    l.width = rng.uniform_int(p.width.lo, p.width.hi);
    l.height = rng.uniform_int(p.height.lo, p.height.hi);
    l.enemy_count = rng.uniform_int(p.enemy_count.lo, p.enemy_count.hi);
    const int n_portals = rng.uniform_int(p.portal_pairs.lo, p.portal_pairs.hi);
    const double density = rng.uniform(p.cover_density.lo, p.cover_density.hi);
    const int n_cells = l.width * l.height;
    const int band = std::max(1, l.width / 3);
    if (band * l.height < kNumHeroes || band * l.height < l.enemy_count ||
        kNumHeroes + l.enemy_count + 2 * n_portals > n_cells)
      throw GenerationError("level generation: spawns exceed free cells on a " + std::to_string(l.width) +
                            "x" + std::to_string(l.height) + " board");

    std::set<Cell> used;
    auto draw_in = [&](int x_lo, int x_hi) {
      for (;;) {
        Cell c{rng.uniform_int(x_lo, x_hi), rng.uniform_int(0, l.height - 1)};
        if (used.insert(c).second) return c;
      }
    };
    for (auto& c : l.hero_spawns) c = draw_in(0, band - 1);
    for (int i = 0; i < l.enemy_count; ++i) l.enemy_spawns.push_back(draw_in(l.width - band, l.width - 1));

    const int free_cells = n_cells - static_cast<int>(used.size());
    const int n_cover = std::min(static_cast<int>(std::lround(density * n_cells)), free_cells - 2 * n_portals);
    for (int i = 0; i < n_cover; ++i) l.cover_cells.push_back(draw_in(0, l.width - 1));
    for (int i = 0; i < n_portals; ++i) {
      const Cell a = draw_in(0, l.width - 1);
      const Cell b = draw_in(0, l.width - 1);
      l.portal_pairs.emplace_back(a, b);
    }
    std::sort(l.cover_cells.begin(), l.cover_cells.end());
    if (spawns_connected(l)) {
      validate(l);
      return l;
    }
  }
  throw GenerationError("level generation: no connected layout after " + std::to_string(kMaxAttempts) +
                        " attempts (cover density too high?)");
}

void to_json(nlohmann::json& j, const Cell& c) { j = nlohmann::json::array({c.x, c.y}); }
void from_json(const nlohmann::json& j, Cell& c) {
  c.x = j.at(0).get<int>();
  c.y = j.at(1).get<int>();
}

void to_json(nlohmann::json& j, const UnitStats& s) {
  j = {{"max_hp", s.max_hp},           {"move_range", s.move_range},
       {"fire_range", s.fire_range},   {"shot_damage", s.shot_damage},
       {"stab_damage", s.stab_damage}, {"super_kind", std::string(to_string(s.super_kind))},
       {"super_cooldown", s.super_cooldown}};
}

void from_json(const nlohmann::json& j, UnitStats& s) {
  s.max_hp = j.at("max_hp").get<int>();
  s.move_range = j.at("move_range").get<int>();
  s.fire_range = j.at("fire_range").get<int>();
  s.shot_damage = j.at("shot_damage").get<int>();
  s.stab_damage = j.at("stab_damage").get<int>();
  s.super_kind = super_kind_from_string(j.value("super_kind", std::string("none")));
  s.super_cooldown = j.value("super_cooldown", 2);
}

void to_json(nlohmann::json& j, const LevelSpec& l) {
  nlohmann::json portals = nlohmann::json::array();
  for (auto [a, b] : l.portal_pairs) portals.push_back({a, b});
  nlohmann::json overrides = nlohmann::json::object();
  for (const auto& [id, s] : l.stat_overrides) overrides[unit_key(id)] = s;
  j = {{"level_id", l.level_id},
       {"width", l.width},
       {"height", l.height},
       {"max_turns", l.max_turns},
       {"rng_seed", l.rng_seed},
       {"cover_cells", l.cover_cells},
       {"portal_pairs", portals},
       {"hero_spawns", l.hero_spawns},
       {"enemy_spawns", l.enemy_spawns},
       {"enemy_count", l.enemy_count},
       {"rules",
        {{"empower_bonus", l.rules.empower_bonus},
         {"heal_amount", l.rules.heal_amount},
         {"super_radius", l.rules.super_radius}}},
       {"stat_overrides", overrides}};
}

void from_json(const nlohmann::json& j, LevelSpec& l) {
  l = LevelSpec{};
  l.level_id = j.at("level_id").get<int>();
  l.width = j.at("width").get<int>();
  l.height = j.at("height").get<int>();
  l.max_turns = j.value("max_turns", kDefaultMaxTurns);
  l.rng_seed = j.value("rng_seed", std::uint64_t{0});
  l.cover_cells = j.value("cover_cells", std::vector<Cell>{});
  const auto portals = j.value("portal_pairs", nlohmann::json::array());
  for (const auto& pair : portals)
    l.portal_pairs.emplace_back(pair.at(0).get<Cell>(), pair.at(1).get<Cell>());
  const auto heroes = j.at("hero_spawns").get<std::vector<Cell>>();
  if (heroes.size() != kNumHeroes) throw Error("level: exactly 3 hero spawns required");
  std::copy(heroes.begin(), heroes.end(), l.hero_spawns.begin());
  l.enemy_spawns = j.at("enemy_spawns").get<std::vector<Cell>>();
  l.enemy_count = j.value("enemy_count", static_cast<int>(l.enemy_spawns.size()));
  if (j.contains("rules")) {
    const auto& r = j.at("rules");
    l.rules.empower_bonus = r.value("empower_bonus", 2);
    l.rules.heal_amount = r.value("heal_amount", 3);
    l.rules.super_radius = r.value("super_radius", 2);
  }
  const auto overrides = j.value("stat_overrides", nlohmann::json::object());
  for (const auto& [key, value] : overrides.items()) l.stat_overrides[unit_id_from_key(key)] = value.get<UnitStats>();
  validate(l);
}

void to_json(nlohmann::json& j, const LevelGenParams& p) {
  j = {{"width", {p.width.lo, p.width.hi}},
       {"height", {p.height.lo, p.height.hi}},
       {"enemy_count", {p.enemy_count.lo, p.enemy_count.hi}},
       {"portal_pairs", {p.portal_pairs.lo, p.portal_pairs.hi}},
       {"cover_density", {p.cover_density.lo, p.cover_density.hi}},
       {"max_turns", p.max_turns}};
}

void from_json(const nlohmann::json& j, LevelGenParams& p) {
  auto int_range = [&](const char* key, IntRange& r) {
    if (j.contains(key)) r = {j.at(key).at(0).get<int>(), j.at(key).at(1).get<int>()};
  };
  int_range("width", p.width);
  int_range("height", p.height);
  int_range("enemy_count", p.enemy_count);
  int_range("portal_pairs", p.portal_pairs);
  if (j.contains("cover_density"))
    p.cover_density = {j.at("cover_density").at(0).get<double>(), j.at("cover_density").at(1).get<double>()};
  p.max_turns = j.value("max_turns", p.max_turns);
}

LevelSpec load_level(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open level file " + path);
  return nlohmann::json::parse(in).get<LevelSpec>();
}

void save_level(const LevelSpec& level, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write level file " + path);
  out << nlohmann::json(level).dump(2) << '\n';
}

}  // namespace carmi
