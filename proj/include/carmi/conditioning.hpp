#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include <json.hpp>

#include "carmi/game/state.hpp"
#include "carmi/goal.hpp"
#include "carmi/metrics.hpp"
#include "carmi/playstyle.hpp"
#include "carmi/rng.hpp"

namespace carmi {

enum class DistanceKind { l2, l1 };

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  friend bool operator==(const Interval&, const Interval&) = default;
};

/// Event vector layout: the 5 metric events, then win and loss indicators.
inline constexpr int kNumRewardEvents = kNumMetrics + 2;
inline constexpr int kWinEvent = kNumMetrics;
inline constexpr int kLossEvent = kNumMetrics + 1;
using EventVector = std::array<int, kNumRewardEvents>;

struct RewardConfig {
  GoalMode mode = GoalMode::carmi;
  DistanceKind distance = DistanceKind::l2;
  std::array<Interval, kNumMetrics> cari_intervals{
      {{-1, 1}, {-1, 1}, {-1, 1}, {-1, 1}, {-1, 1}}};
  Interval win_interval{0, 2};
  Interval loss_interval{-2, 0};
  double terminal_win_value = 1.0;

  void validate() const;
  friend bool operator==(const RewardConfig&, const RewardConfig&) = default;
};

double distance(std::span<const double> psi, std::span<const double> z, DistanceKind kind = DistanceKind::l2);

/// d_prev - d_curr, minus d_curr again on the terminal step.
double carmi_step_reward(double d_prev, double d_curr, bool is_terminal);

/// Counts of metric events among `events` plus the terminal indicators for `outcome`.
EventVector event_vector(std::span<const StepEvent> events, Outcome outcome);

/// Throws on a size mismatch between w and the event vector.
double cari_reward(std::span<const double> w, const EventVector& events);

std::vector<double> sample_cari_coefficients(const RewardConfig& config, Rng& rng);

double winonly_reward(Outcome outcome, bool is_terminal, double win_value = 1.0);

// ---- ALP-GMM goal curriculum ----

struct CurriculumConfig {
  int dim = kNumMetrics;
  double lo = -3.0;
  double hi = 3.0;
  double p_rand = 0.2;
  int warmup = 50;
  int refit_period = 250;
  int window = 500;
  int c_min = 2;
  int c_max = 5;
  std::uint64_t seed = 0;
  friend bool operator==(const CurriculumConfig&, const CurriculumConfig&) = default;
};

struct CurriculumEntry {
  std::vector<double> z;
  double episodic_return = 0.0;
  double alp = 0.0;
  friend bool operator==(const CurriculumEntry&, const CurriculumEntry&) = default;
};

struct CurriculumState {
  CurriculumConfig config;
  std::vector<CurriculumEntry> history;
  // Derived from history; rebuilt deterministically after a reload.
  std::optional<ClusterModel> gmm;
  int fitted_at = -1;  // history size at the last refit
  int target_component = -1;

  explicit CurriculumState(CurriculumConfig c = {}) : config(c) {}
};

struct CurriculumDraw {
  std::vector<double> z;
  bool exploration = true;  // uniform draw (warm-up, p_rand or fallback)
};

/// |return_new - return of the Euclidean-nearest previous z|; 0 on empty history.
double compute_alp(std::span<const double> z_new, double return_new, std::span<const CurriculumEntry> history);

CurriculumDraw curriculum_sample(CurriculumState& state, Rng& rng);
void curriculum_update(CurriculumState& state, std::vector<double> z, double episodic_return);

/// One JSON object per history entry.
void write_curriculum_history(const CurriculumState& state, std::ostream& out);

void to_json(nlohmann::json& j, const RewardConfig& c);
void from_json(const nlohmann::json& j, RewardConfig& c);
void to_json(nlohmann::json& j, const CurriculumConfig& c);
void from_json(const nlohmann::json& j, CurriculumConfig& c);
/// History and config only; the GMM is refit on load.
nlohmann::json curriculum_to_json(const CurriculumState& s);
CurriculumState curriculum_from_json(const nlohmann::json& j);

}  // namespace carmi
