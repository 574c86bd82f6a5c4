#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "carmi/conditioning.hpp"
#include "carmi/game/level.hpp"
#include "carmi/learner/agent.hpp"
#include "carmi/learner/network.hpp"
#include "carmi/learner/replay.hpp"
#include "carmi/learner/update.hpp"
#include "carmi/metrics.hpp"

namespace carmi {

struct TrainConfig {
  GoalMode mode = GoalMode::carmi;
  int n_actors = 3;
  int episodes_per_actor = 12500;
  double learning_rate = 5e-4;
  double gamma = 1.0;
  double gae_lambda = 0.95;
  int episodes_per_update = 4;
  ReplayConfig replay;
  int batch_size = 64;
  double replay_ratio = 0.5;  // replayed batches per on-policy update
  double max_grad_norm = 5.0;
  LossConfig loss;
  NetConfig net;  // layer sizes; board and input widths come from the levels and mode
  CurriculumConfig curriculum;
  RewardConfig reward;
  int checkpoint_every = 0;  // episodes, 0 = only at the end
  std::string checkpoint_path;
  std::uint64_t seed = 0;

  int total_episodes() const { return n_actors * episodes_per_actor; }
  void validate() const;
  /// Hash of everything that shapes the run except budgets and actor count.
  std::uint64_t identity_hash() const;
};

void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);

/// One row of the learning curve.
struct CurvePoint {
  int episode = 0;
  int level_id = -1;
  double episodic_return = 0.0;
  std::optional<double> final_distance;
  Outcome outcome = Outcome::none;
  GoalMode mode = GoalMode::winonly;
  friend bool operator==(const CurvePoint&, const CurvePoint&) = default;
};

/// Header: episode,level_id,return,d_T,outcome,mode
void write_learning_curve(const std::vector<CurvePoint>& curve, std::ostream& out);

struct UpdateStats {
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double grad_norm = 0.0;
  int samples = 0;
};

/// Single learner fed by n_actors episode generators. With one actor the
/// episodes run on the calling thread and the run is bit-reproducible.
class Trainer {
 public:
  Trainer(TrainConfig cfg, std::vector<LevelSpec> levels, LevelStatsTable stats);
  ~Trainer();
  Trainer(Trainer&&) noexcept;

  /// Trains until `stop_after` episodes are done in total (default: the
  /// configured budget). Returns the number of episodes completed.
  int run(std::optional<int> stop_after = std::nullopt);

  void save_checkpoint(const std::string& path) const;
  /// Restores a run written by save_checkpoint with the same identity hash.
  static Trainer resume(const std::string& path, TrainConfig cfg, std::vector<LevelSpec> levels,
                        LevelStatsTable stats);

  const TrainConfig& config() const;
  const Network<float>& network() const;
  const std::vector<CurvePoint>& curve() const;
  const CurriculumState& curriculum() const;
  const ReplayBuffer& replay() const;
  const UpdateStats& last_update() const;
  int episodes_done() const;

 private:
  struct Impl;
  explicit Trainer(std::unique_ptr<Impl> impl);
  std::unique_ptr<Impl> impl_;
};

/// Checkpoint body shared by the trainer and the evaluation tools.
struct PolicyCheckpoint {
  TrainConfig config;
  Network<float> net;
};
/// Reads only the network and config from a training checkpoint.
PolicyCheckpoint load_policy(const std::string& path);

}  // namespace carmi
