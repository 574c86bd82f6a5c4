#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "carmi/goal.hpp"
#include "carmi/metrics.hpp"
#include "carmi/rng.hpp"

namespace carmi {

struct GmmComponent {
  double weight = 0.0;
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;  // includes the diagonal regularization
};

struct ClusterModel {
  std::vector<GmmComponent> components;
  double reg = 1e-6;
  std::uint64_t seed = 0;
  int iterations = 0;
  bool converged = false;
  std::vector<double> log_likelihood_trace;  // one entry per EM iteration of the kept restart

  int num_components() const { return static_cast<int>(components.size()); }
  int dim() const { return components.empty() ? 0 : static_cast<int>(components.front().mean.size()); }
};

struct GmmOptions {
  double reg = 1e-6;
  double tol = 1e-6;
  int max_iter = 500;
  int restarts = 5;
};

/// EM with k-means++ seeding and full covariances; rows of `data` are points.
/// Keeps the restart with the highest final log-likelihood.
ClusterModel fit_gmm(const Eigen::MatrixXd& data, int n_components, std::uint64_t seed, const GmmOptions& opt = {});

double gmm_log_likelihood(const ClusterModel& model, const Eigen::MatrixXd& data);

/// Posterior component probabilities for one point.
std::vector<double> responsibilities(const ClusterModel& model, const Eigen::VectorXd& point);
int most_likely_component(const ClusterModel& model, const Eigen::VectorXd& point);

/// Bayesian information criterion, lower is better.
double bic(const ClusterModel& model, const Eigen::MatrixXd& data);

struct BicSweepEntry {
  int n_components;
  double bic;
};

/// Fits C = c_min..c_max and reports BIC for each. Not used by the default pipeline.
std::vector<BicSweepEntry> bic_sweep(const Eigen::MatrixXd& data, int c_min, int c_max, std::uint64_t seed,
                                     const GmmOptions& opt = {});

/// z ~ N(mu_c, Sigma_c), Sigma_c taken without the fitting regularization.
/// Throws when that covariance is not positive semi-definite.
GoalSpec sample_cluster_goal(const ClusterModel& model, int c, Rng& rng);

/// z ~ N(0, I) over the play-mode metrics.
GoalSpec sample_standard_goal(Rng& rng);

/// Train-split rows normalized against their level stats, one row per player episode.
Eigen::MatrixXd normalized_matrix(const std::vector<PlayerRow>& rows, const LevelStatsTable& stats);

/// Fits the player clusters; refuses any test-split row.
ClusterModel fit_player_clusters(const std::vector<PlayerRow>& rows, const LevelStatsTable& stats, int n_components,
                                 std::uint64_t seed);

void to_json(nlohmann::json& j, const ClusterModel& m);
void from_json(const nlohmann::json& j, ClusterModel& m);
void save_cluster_model(const ClusterModel& m, const std::string& path);
ClusterModel load_cluster_model(const std::string& path);

}  // namespace carmi
