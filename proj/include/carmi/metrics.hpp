#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "carmi/game/state.hpp"

namespace carmi {

inline constexpr int kNumMetrics = 5;
using MetricVector = std::array<double, kNumMetrics>;

/// Order of the play-mode metrics in every MetricVector.
enum Metric : int { kStabs = 0, kShots = 1, kEmpoweredShots = 2, kHeals = 3, kShields = 4 };

inline constexpr std::array<std::string_view, kNumMetrics> kMetricNames = {
    "stabs_per_turn", "shots_per_turn", "empowered_shots_per_turn", "heals_per_turn", "shields_per_turn"};

/// Per-turn rates of the hero team's play-mode events over one episode.
struct SummaryData {
  int level_id = -1;
  MetricVector rates{};
  int turns_played = 1;

  /// Event counts recovered from the rates.
  std::array<long, kNumMetrics> counts() const;
  friend bool operator==(const SummaryData&, const SummaryData&) = default;
};

/// Mean and (population) standard deviation of player summaries on one level.
struct LevelStats {
  int level_id = -1;
  MetricVector mu{};
  MetricVector sigma{};
  int n_samples = 0;
  friend bool operator==(const LevelStats&, const LevelStats&) = default;
};

struct NormalizedSummary {
  int level_id = -1;
  MetricVector z{};
  friend bool operator==(const NormalizedSummary&, const NormalizedSummary&) = default;
};

struct Trajectory {
  int level_id = -1;
  std::vector<StepEvent> events;
  Outcome outcome = Outcome::none;
  int turns_played = 1;
};

inline constexpr double kSigmaFloor = 1e-6;

std::array<int, kNumMetrics> count_metric_events(std::span<const StepEvent> events);

SummaryData summarize(const Trajectory& trajectory);

/// Rates so far, divided by max(1, turns_elapsed).
SummaryData partial_summarize(std::span<const StepEvent> events, int turns_elapsed, int level_id = -1);

/// Throws carmi::Error with fewer than two samples or mixed levels.
LevelStats fit_level_stats(std::span<const SummaryData> summaries);

/// Throws carmi::Error when the summary and stats disagree on the level.
NormalizedSummary normalize(const SummaryData& summary, const LevelStats& stats);
MetricVector normalize_rates(const MetricVector& rates, const LevelStats& stats);
MetricVector denormalize(const MetricVector& z, const LevelStats& stats);

void to_json(nlohmann::json& j, const LevelStats& s);
void from_json(const nlohmann::json& j, LevelStats& s);

using LevelStatsTable = std::map<int, LevelStats>;
void save_level_stats(const LevelStatsTable& table, const std::string& path);
LevelStatsTable load_level_stats(const std::string& path);

// ---- player summary dataset ----

enum class Split : std::uint8_t { train, test };
std::string_view to_string(Split s);

struct PlayerRow {
  int level_id = 0;
  int player_id = 0;
  SummaryData summary;
  Outcome outcome = Outcome::none;
  Split split = Split::train;
  std::uint64_t seed = 0;  // episode seed, replays the row
  friend bool operator==(const PlayerRow&, const PlayerRow&) = default;
};

struct PlayerDataset {
  std::vector<PlayerRow> rows;

  std::vector<int> levels(Split split) const;
  std::vector<PlayerRow> rows_for(Split split) const;
};

/// CSV header: level_id,player_id,stabs_per_turn,shots_per_turn,
/// empowered_shots_per_turn,heals_per_turn,shields_per_turn,turns_played,outcome,split,seed
void write_dataset_csv(const PlayerDataset& dataset, std::ostream& out);
PlayerDataset read_dataset_csv(std::istream& in);

/// Throws if any (level, player) pair repeats or a level appears in both splits.
void validate(const PlayerDataset& dataset);

/// One LevelStats per level present in the dataset.
LevelStatsTable fit_level_stats(const PlayerDataset& dataset);

}  // namespace carmi
