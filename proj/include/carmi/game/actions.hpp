#pragma once

#include <cstdint>
#include <variant>
#include <vector>

#include "carmi/game/types.hpp"

namespace carmi {

struct Move {
  int hero = 0;
  Cell target{};
  friend bool operator==(const Move&, const Move&) = default;
};

struct Shoot {
  int hero = 0;
  int enemy_slot = 0;
  friend bool operator==(const Shoot&, const Shoot&) = default;
};

struct Stab {
  int hero = 0;
  int enemy_slot = 0;
  friend bool operator==(const Stab&, const Stab&) = default;
};

struct Super {
  int hero = 0;
  SuperKind kind = SuperKind::heal;
  friend bool operator==(const Super&, const Super&) = default;
};

struct Skip {
  friend bool operator==(const Skip&, const Skip&) = default;
};

using Action = std::variant<Move, Shoot, Stab, Super, Skip>;

/// Flat action indexing for a W x H board.
///
/// Each hero owns a contiguous block of W*H + 19 indices:
///   [0, W*H)            move to cell y*W + x
///   [W*H, W*H+8)        shoot enemy slot
///   [W*H+8, W*H+16)     stab enemy slot
///   [W*H+16, W*H+19)    super heal / empower / shield
/// followed by a single Skip index at the very end.
class ActionSpace {
 public:
  ActionSpace(int width, int height) : width_(width), height_(height) {}

  int width() const { return width_; }
  int height() const { return height_; }
  int cells() const { return width_ * height_; }
  int hero_block() const { return cells() + 2 * kMaxEnemies + kNumSuperSlots; }
  int size() const { return kNumHeroes * hero_block() + 1; }
  int skip_index() const { return size() - 1; }

  int move_index(int hero, Cell c) const { return hero * hero_block() + c.y * width_ + c.x; }
  int shoot_index(int hero, int slot) const { return hero * hero_block() + cells() + slot; }
  int stab_index(int hero, int slot) const {
    return hero * hero_block() + cells() + kMaxEnemies + slot;
  }
  int super_index(int hero, SuperKind k) const {
    return hero * hero_block() + cells() + 2 * kMaxEnemies + super_slot(k);
  }

  int encode(const Action& a) const;
  Action decode(int index) const;

 private:
  int width_;
  int height_;
};

/// Legal-action bits over the flat index space.
class ActionMask {
 public:
  ActionMask() = default;
  explicit ActionMask(int size) : bits_(static_cast<std::size_t>(size), 0) {}

  int size() const { return static_cast<int>(bits_.size()); }
  bool operator[](int i) const { return bits_[static_cast<std::size_t>(i)] != 0; }
  void set(int i, bool v = true) { bits_[static_cast<std::size_t>(i)] = v ? 1 : 0; }
  int count() const;
  std::vector<int> legal_indices() const;
  const std::vector<std::uint8_t>& bits() const { return bits_; }

  friend bool operator==(const ActionMask&, const ActionMask&) = default;

 private:
  std::vector<std::uint8_t> bits_;
};

}  // namespace carmi
