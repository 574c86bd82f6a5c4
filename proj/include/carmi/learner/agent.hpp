#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <json.hpp>

#include "carmi/conditioning.hpp"
#include "carmi/game/level.hpp"
#include "carmi/game/observation.hpp"
#include "carmi/goal.hpp"
#include "carmi/learner/network.hpp"
#include "carmi/learner/replay.hpp"
#include "carmi/metrics.hpp"

namespace carmi {

/// Condition width fed to the network: CARMI gets z and the running
/// summary, each in normalized and in per-turn rate units; CARI gets w,
/// WinOnly nothing.
int condition_dim(GoalMode mode);

/// Normalized parts clipped to [-3, 3], rates to [0, 3]; all divided by 3.
std::vector<float> carmi_condition(std::span<const double> z, std::span<const double> psi,
                                   std::span<const double> goal_rates, std::span<const double> rates);
std::vector<float> cari_condition(std::span<const double> w);

NetConfig make_net_config(int width, int height, GoalMode mode, const NetConfig& sizes = {});

template <class T>
NetInput<T> build_input(const Observation& obs, std::span<const float> cond);

struct PolicyOutput {
  VecT<float> probs;  // zero on every masked action
  float value = 0.0f;  // network output, before any goal-distance offset
};

/// Throws carmi::Error when the mask is empty.
PolicyOutput policy_forward(const Network<float>& net, const Observation& obs, std::span<const float> cond,
                            const ActionMask& mask);

/// Result of one agent episode; the row type of every evaluation table.
struct EpisodeRecord {
  int level_id = -1;
  GoalMode mode = GoalMode::winonly;
  GoalSpec goal;
  SummaryData summary;
  std::optional<NormalizedSummary> normalized;
  Outcome outcome = Outcome::none;
  std::uint64_t seed = 0;
  double episodic_return = 0.0;
  std::optional<double> final_distance;  // CARMI only
  int steps = 0;

  friend bool operator==(const EpisodeRecord&, const EpisodeRecord&) = default;
};

void to_json(nlohmann::json& j, const EpisodeRecord& r);
void from_json(const nlohmann::json& j, EpisodeRecord& r);

struct EpisodeTrace {
  std::vector<Transition> transitions;
  std::vector<StepEvent> events;
};

enum class ActionSelection { sample, greedy };

/// Plays one game by sampling from the masked policy (or taking its most
/// likely action). `stats` is required for CARMI goals and optional
/// otherwise (it fills `normalized`).
EpisodeRecord run_episode(const Network<float>& net, const LevelSpec& level, const LevelStats* stats,
                          const GoalSpec& goal, const RewardConfig& reward, std::uint64_t seed,
                          EpisodeTrace* trace = nullptr, ActionSelection selection = ActionSelection::sample);

}  // namespace carmi
