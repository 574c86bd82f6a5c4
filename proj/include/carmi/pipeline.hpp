#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "carmi/evaluation.hpp"
#include "carmi/game/level.hpp"
#include "carmi/learner/trainer.hpp"
#include "carmi/personas.hpp"
#include "carmi/playstyle.hpp"

namespace carmi {

/// Whole-pipeline settings, read from one JSON file. `seed` fixes the world
/// (levels, personas, clusters, evaluation draws); `train.seed` picks the
/// training run within that world.
struct PipelineConfig {
  std::uint64_t seed = 0;
  std::string out_dir = "carmi_out";
  std::string levels_dir;  // empty: <out_dir>/levels
  LevelGenParams level_gen;
  int n_train_levels = 7;
  int n_test_levels = 2;
  int first_level_id = 2;
  int n_players = 25;
  PersonaPrior prior = default_persona_prior();
  int clusters = 3;
  GmmOptions gmm;
  TrainConfig train;
  int coverage_episodes = 2500;
  std::optional<double> coverage_z_clip;
  int emulate_per_cell = 20;

  void validate() const;
};

void to_json(nlohmann::json& j, const PipelineConfig& c);
void from_json(const nlohmann::json& j, PipelineConfig& c);
PipelineConfig load_pipeline_config(const std::string& path);

/// Artifact locations under out_dir.
struct PipelinePaths {
  std::string root;
  std::string levels;
  std::string levels_dir() const;
  std::string split_manifest() const;
  std::string dataset() const;
  std::string level_stats() const;
  std::string personas() const;
  std::string clusters() const;
  std::string checkpoint(GoalMode mode) const;
  std::string learning_curve(GoalMode mode) const;
  std::string curriculum_log() const;
  std::string coverage_records(GoalMode mode, Split split) const;
  std::string emulation_records() const;
  std::string reports_dir() const;
};

PipelinePaths pipeline_paths(const PipelineConfig& cfg);

struct LevelSplit {
  std::vector<LevelSpec> train;
  std::vector<LevelSpec> test;
};

/// Levels in memory, without touching the disk.
LevelSplit generate_levels(const PipelineConfig& cfg);
GeneratedPlayers generate_players(const PipelineConfig& cfg, const LevelSplit& levels);
ClusterModel fit_clusters(const PipelineConfig& cfg, const PlayerDataset& dataset, const LevelStatsTable& stats);
/// Training config for `mode` with its derived seed.
TrainConfig train_config_for(const PipelineConfig& cfg, GoalMode mode);

/// Goal-matching check: mean final distance over CARMI coverage records.
double mean_final_distance(const std::vector<EpisodeRecord>& records);

/// Rounded train-to-test win-rate change per cluster: sign in {-1, 0, 1}.
int rounded_change_sign(double train_pct, double test_pct);

struct ClusterDirection {
  std::optional<int> players;  // empty when the cluster has no rows on one split
  std::optional<int> agent;
  bool agree() const { return players && agent && *players == *agent; }
};
std::vector<ClusterDirection> win_rate_directions(const EmulationReport& report);

// ---- commands; each reads its inputs from and writes its outputs to out_dir ----

LevelSplit cmd_gen_levels(const PipelineConfig& cfg);
LevelSplit load_level_split(const PipelineConfig& cfg);
GeneratedPlayers cmd_gen_players(const PipelineConfig& cfg);
ClusterModel cmd_fit_clusters(const PipelineConfig& cfg);
/// Trains `mode` to its budget; with `resume` continues from the saved checkpoint.
void cmd_train(const PipelineConfig& cfg, GoalMode mode, bool resume);

enum class EvalKind { coverage, emulate, divergence };
EvalKind eval_kind_from_string(std::string_view s);
void cmd_evaluate(const PipelineConfig& cfg, EvalKind kind);
/// Collects the evaluation outputs into reports/report.txt and figures.
void cmd_report(const PipelineConfig& cfg);
/// Every stage in order: levels, players, clusters, the three models, evaluations, report.
void cmd_all(const PipelineConfig& cfg);

}  // namespace carmi
