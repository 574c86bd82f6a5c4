#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "carmi/conditioning.hpp"
#include "carmi/game/level.hpp"
#include "carmi/learner/agent.hpp"
#include "carmi/learner/trainer.hpp"
#include "carmi/metrics.hpp"
#include "carmi/playstyle.hpp"

namespace carmi {

/// Plays one evaluation episode. The default runs the trained policy; tests
/// swap in scripted players.
using EpisodeRunner = std::function<EpisodeRecord(const LevelSpec& level, const LevelStats* stats,
                                                  const GoalSpec& goal, std::uint64_t seed)>;

EpisodeRunner policy_runner(const Network<float>& net, const RewardConfig& reward = {},
                            ActionSelection selection = ActionSelection::sample);

// ---- coverage ----

struct CoverageOptions {
  int n_episodes = 2500;
  std::optional<double> z_clip;  // clip standard-normal goals to [-clip, clip]
  std::uint64_t seed = 0;
};

/// Fresh goal every episode: z ~ N(0, 1) for CARMI, w ~ U(W) for CARI, none
/// for WinOnly. Episode i plays level i mod |levels|.
std::vector<EpisodeRecord> coverage_run(const EpisodeRunner& runner, GoalMode mode,
                                        const std::vector<LevelSpec>& levels, const LevelStatsTable& stats,
                                        const CoverageOptions& opt, const RewardConfig& reward = {});

// ---- divergence ----

/// Per-axis bins: (-inf, lo), `inner` uniform bins on [lo, hi], (hi, inf).
struct Binning {
  double lo = -3.0;
  double hi = 3.0;
  int inner = 12;
  double epsilon = 1e-4;

  int bins() const { return inner + 2; }
  int bin_of(double v) const;
};

struct Divergence {
  double kl = 0.0;  // KL(p || q), bits
  double js = 0.0;  // bits
};

/// Joint histogram divergence between two point sets of equal dimension.
/// Throws carmi::Error on empty input or mismatched dimensions.
Divergence estimate_divergence(const std::vector<std::vector<double>>& p, const std::vector<std::vector<double>>& q,
                               const Binning& binning = {});

std::vector<std::vector<double>> normalized_points(const std::vector<EpisodeRecord>& records);
std::vector<std::vector<double>> normalized_points(const std::vector<PlayerRow>& rows, const LevelStatsTable& stats);

// ---- confidence intervals and emulation ----

struct MeanCI {
  double mean = 0.0;
  double halfwidth = 0.0;
};

/// mean +- 1.96 s / sqrt(n), s the sample standard deviation. Needs n >= 2.
MeanCI confidence_interval(const std::vector<double>& samples);

struct EmulationCell {
  int n = 0;
  std::array<MeanCI, kNumMetrics> metrics{};  // raw per-turn rates
  double win_pct = 0.0;
  double loss_pct = 0.0;
  double draw_pct = 0.0;
};

/// Columns are clusters 0..C-1 then "All"; blocks are split x source.
struct EmulationReport {
  int clusters = 0;
  // [split][column]
  std::array<std::vector<EmulationCell>, 2> agent;
  std::array<std::vector<EmulationCell>, 2> players;
};

struct EmulationOptions {
  int n_per_cell = 10;
  std::uint64_t seed = 0;
};

/// Every (level, cluster) pair plays n_per_cell episodes with goals drawn
/// from that cluster's Gaussian.
std::vector<EpisodeRecord> emulation_episodes(const EpisodeRunner& runner, const ClusterModel& model,
                                              const std::vector<LevelSpec>& levels, const LevelStatsTable& stats,
                                              const EmulationOptions& opt);

/// Aggregates agent records and player rows (assigned to clusters by
/// maximum responsibility) into the report. `test_levels` decides the split.
EmulationReport aggregate_emulation(const std::vector<EpisodeRecord>& records, const std::vector<PlayerRow>& players,
                                    const ClusterModel& model, const LevelStatsTable& stats,
                                    const std::vector<int>& test_levels);

EmulationReport emulate_clusters(const EpisodeRunner& runner, const ClusterModel& model,
                                 const std::vector<LevelSpec>& train_levels, const std::vector<LevelSpec>& test_levels,
                                 const LevelStatsTable& stats, const std::vector<PlayerRow>& players,
                                 const EmulationOptions& opt);

void write_emulation_csv(const EmulationReport& report, std::ostream& out);
void write_emulation_table(const EmulationReport& report, std::ostream& out);

// ---- persistence and figures ----

void write_records(const std::vector<EpisodeRecord>& records, std::ostream& out);
std::vector<EpisodeRecord> read_records(std::istream& in);

struct LabeledRecords {
  std::string source;  // e.g. "players", "carmi"
  std::vector<std::vector<double>> points;  // normalized metrics
};

/// Writes scatter.csv (normalized stabs vs shots), histograms.csv (per-metric
/// masses over the divergence bins) and scatter.svg into out_dir.
void export_figures(const std::vector<LabeledRecords>& sets, const std::string& out_dir,
                    const Binning& binning = {});

}  // namespace carmi
