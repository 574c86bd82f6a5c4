#include "carmi/game/actions.hpp"

#include <algorithm>
#include <type_traits>

#include "carmi/error.hpp"

namespace carmi {

int ActionSpace::encode(const Action& action) const {
  return std::visit(
      [&](const auto& a) -> int {
        using T = std::decay_t<decltype(a)>;
        if constexpr (std::is_same_v<T, Skip>) {
          return skip_index();
        } else {
          if (a.hero < 0 || a.hero >= kNumHeroes) throw Error("action: hero index out of range");
          if constexpr (std::is_same_v<T, Move>) {
            if (a.target.x < 0 || a.target.y < 0 || a.target.x >= width_ || a.target.y >= height_)
              throw Error("action: move target out of bounds");
            return move_index(a.hero, a.target);
          } else if constexpr (std::is_same_v<T, Super>) {
            if (a.kind == SuperKind::none) throw Error("action: super kind 'none'");
            return super_index(a.hero, a.kind);
          } else {
            if (a.enemy_slot < 0 || a.enemy_slot >= kMaxEnemies) throw Error("action: enemy slot out of range");
            if constexpr (std::is_same_v<T, Shoot>) return shoot_index(a.hero, a.enemy_slot);
            else return stab_index(a.hero, a.enemy_slot);
          }
        }
      },
      action);
}

Action ActionSpace::decode(int index) const {
  if (index < 0 || index >= size()) throw Error("action index out of range");
  if (index == skip_index()) return Skip{};
  const int hero = index / hero_block();
  const int local = index % hero_block();
  if (local < cells()) return Move{hero, Cell{local % width_, local / width_}};
  const int rest = local - cells();
  if (rest < kMaxEnemies) return Shoot{hero, rest};
  if (rest < 2 * kMaxEnemies) return Stab{hero, rest - kMaxEnemies};
  return Super{hero, super_from_slot(rest - 2 * kMaxEnemies)};
}

int ActionMask::count() const {
  return static_cast<int>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
}

std::vector<int> ActionMask::legal_indices() const {
  std::vector<int> out;
  for (int i = 0; i < size(); ++i)
    if (bits_[static_cast<std::size_t>(i)]) out.push_back(i);
  return out;
}

}  // namespace carmi
