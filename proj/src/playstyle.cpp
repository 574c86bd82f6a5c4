#include "carmi/playstyle.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>

#include "carmi/error.hpp"

namespace carmi {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;  // log(2 pi)

struct Factor {
  Eigen::LLT<Eigen::MatrixXd> llt;
  double log_norm = 0.0;  // -(d log 2pi + log det) / 2
};

Factor factorize(const Eigen::MatrixXd& cov) {
  Factor f;
  f.llt.compute(cov);
  if (f.llt.info() != Eigen::Success) throw Error("gmm: covariance is not positive definite");
  const auto diag = f.llt.matrixL().toDenseMatrix().diagonal();
  double log_det = 0.0;
  for (int i = 0; i < diag.size(); ++i) log_det += 2.0 * std::log(diag[i]);
  f.log_norm = -0.5 * (static_cast<double>(cov.rows()) * kLog2Pi + log_det);
  return f;
}

double log_density(const Factor& f, const Eigen::VectorXd& mean, const Eigen::VectorXd& x) {
  const Eigen::VectorXd y = f.llt.matrixL().solve(x - mean);
  return f.log_norm - 0.5 * y.squaredNorm();
}

double log_sum_exp(const std::vector<double>& v) {
  const double top = *std::max_element(v.begin(), v.end());
  if (!std::isfinite(top)) return top;
  double s = 0.0;
  for (double x : v) s += std::exp(x - top);
  return top + std::log(s);
}

/// log(pi_c) + log N(x | c) for every component.
std::vector<double> joint_log(const ClusterModel& m, const std::vector<Factor>& factors, const Eigen::VectorXd& x) {
  std::vector<double> out(m.components.size());
  for (std::size_t c = 0; c < out.size(); ++c) {
    const auto& comp = m.components[c];
    out[c] = comp.weight > 0 ? std::log(comp.weight) + log_density(factors[c], comp.mean, x)
                             : -std::numeric_limits<double>::infinity();
  }
  return out;
}

std::vector<Factor> factorize_all(const ClusterModel& m) {
  std::vector<Factor> f;
  for (const auto& c : m.components) f.push_back(factorize(c.cov));
  return f;
}

Eigen::MatrixXd population_cov(const Eigen::MatrixXd& data) {
  const Eigen::RowVectorXd mean = data.colwise().mean();
  const Eigen::MatrixXd centered = data.rowwise() - mean;
  return centered.transpose() * centered / static_cast<double>(data.rows());
}

std::vector<Eigen::VectorXd> kmeanspp(const Eigen::MatrixXd& data, int k, Rng& rng) {
  const auto n = static_cast<std::size_t>(data.rows());
  std::vector<Eigen::VectorXd> centers{data.row(static_cast<Eigen::Index>(rng.below(n))).transpose()};
  std::vector<double> d2(n, std::numeric_limits<double>::infinity());
  while (static_cast<int>(centers.size()) < k) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      d2[i] = std::min(d2[i], (data.row(static_cast<Eigen::Index>(i)).transpose() - centers.back()).squaredNorm());
      total += d2[i];
    }
    std::size_t pick = n - 1;
    if (total <= 0.0) {
      pick = rng.below(n);
    } else {
      double u = rng.uniform() * total;
      for (std::size_t i = 0; i < n; ++i) {
        if (u < d2[i]) {
          pick = i;
          break;
        }
        u -= d2[i];
      }
    }
    centers.push_back(data.row(static_cast<Eigen::Index>(pick)).transpose());
  }
  return centers;
}

ClusterModel run_em(const Eigen::MatrixXd& data, int k, Rng& rng, const GmmOptions& opt) {
  const Eigen::Index n = data.rows(), d = data.cols();
  const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(d, d);
  ClusterModel m;
  m.reg = opt.reg;
  const Eigen::MatrixXd init_cov = population_cov(data) + opt.reg * eye;
  for (auto& c : kmeanspp(data, k, rng)) m.components.push_back({1.0 / k, std::move(c), init_cov});

  Eigen::MatrixXd resp(n, k);
  double prev = -std::numeric_limits<double>::infinity();
  for (int it = 0;; ++it) {
    // E-step, also yields the log-likelihood of the current parameters.
    const auto factors = factorize_all(m);
    double ll = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto lj = joint_log(m, factors, data.row(i).transpose());
      const double lse = log_sum_exp(lj);
      ll += lse;
      for (int c = 0; c < k; ++c) resp(i, c) = std::exp(lj[c] - lse);
    }
    if (!std::isfinite(ll)) throw Error("gmm: non-finite log-likelihood");
    m.log_likelihood_trace.push_back(ll);
    m.iterations = it + 1;
    if (it > 0 && ll - prev < opt.tol) {
      m.converged = true;
      break;
    }
    if (it + 1 >= opt.max_iter) break;
    prev = ll;

    // M-step.
    for (int c = 0; c < k; ++c) {
      const double nc = resp.col(c).sum();
      auto& comp = m.components[c];
      comp.weight = nc / static_cast<double>(n);
      if (nc < 1e-12) continue;  // empty component keeps its shape with zero weight
      comp.mean = (data.transpose() * resp.col(c)) / nc;
      const Eigen::MatrixXd centered = data.rowwise() - comp.mean.transpose();
      comp.cov = (centered.transpose() * resp.col(c).asDiagonal() * centered) / nc + opt.reg * eye;
      comp.cov = 0.5 * (comp.cov + comp.cov.transpose());
    }
  }
  return m;
}

}  // namespace

ClusterModel fit_gmm(const Eigen::MatrixXd& data, int n_components, std::uint64_t seed, const GmmOptions& opt) {
  if (n_components < 1) throw Error("fit_gmm: need at least one component");
  if (data.rows() < static_cast<Eigen::Index>(n_components) * (data.cols() + 1))
    throw Error("fit_gmm: " + std::to_string(data.rows()) + " rows is too few for " + std::to_string(n_components) +
                " components in " + std::to_string(data.cols()) + " dimensions");
  if (!data.allFinite()) throw Error("fit_gmm: data contains non-finite values");
  ClusterModel best;
  double best_ll = -std::numeric_limits<double>::infinity();
  for (int r = 0; r < std::max(1, opt.restarts); ++r) {
    Rng rng(derive_seed(seed, "gmm-restart", {static_cast<std::uint64_t>(r)}));
    ClusterModel m = run_em(data, n_components, rng, opt);
    if (m.log_likelihood_trace.back() > best_ll) {
      best_ll = m.log_likelihood_trace.back();
      best = std::move(m);
    }
  }
  best.seed = seed;
  return best;
}

double gmm_log_likelihood(const ClusterModel& model, const Eigen::MatrixXd& data) {
  const auto factors = factorize_all(model);
  double ll = 0.0;
  for (Eigen::Index i = 0; i < data.rows(); ++i) ll += log_sum_exp(joint_log(model, factors, data.row(i).transpose()));
  return ll;
}

std::vector<double> responsibilities(const ClusterModel& model, const Eigen::VectorXd& point) {
  auto lj = joint_log(model, factorize_all(model), point);
  const double lse = log_sum_exp(lj);
  for (double& v : lj) v = std::exp(v - lse);
  return lj;
}

int most_likely_component(const ClusterModel& model, const Eigen::VectorXd& point) {
  const auto r = responsibilities(model, point);
  return static_cast<int>(std::max_element(r.begin(), r.end()) - r.begin());
}

double bic(const ClusterModel& model, const Eigen::MatrixXd& data) {
  const double k = model.num_components(), d = model.dim();
  const double params = (k - 1) + k * d + k * d * (d + 1) / 2;
  return -2.0 * gmm_log_likelihood(model, data) + params * std::log(static_cast<double>(data.rows()));
}

std::vector<BicSweepEntry> bic_sweep(const Eigen::MatrixXd& data, int c_min, int c_max, std::uint64_t seed,
                                     const GmmOptions& opt) {
  std::vector<BicSweepEntry> out;
  for (int c = c_min; c <= c_max; ++c) {
    if (data.rows() < static_cast<Eigen::Index>(c) * (data.cols() + 1)) break;
    out.push_back({c, bic(fit_gmm(data, c, seed, opt), data)});
  }
  return out;
}

GoalSpec sample_cluster_goal(const ClusterModel& model, int c, Rng& rng) {
  if (c < 0 || c >= model.num_components()) throw Error("sample_cluster_goal: no component " + std::to_string(c));
  const auto& comp = model.components[c];
  const Eigen::Index d = comp.mean.size();
  const Eigen::MatrixXd sigma = comp.cov - model.reg * Eigen::MatrixXd::Identity(d, d);
  const Eigen::LDLT<Eigen::MatrixXd> ldlt(sigma);
  const double scale = 1.0 + sigma.cwiseAbs().maxCoeff();
  if (ldlt.info() != Eigen::Success || !sigma.allFinite() || ldlt.vectorD().minCoeff() < -1e-9 * scale)
    throw Error("sample_cluster_goal: covariance of component " + std::to_string(c) + " is not positive semi-definite");
  Eigen::VectorXd eps(d);
  for (Eigen::Index i = 0; i < d; ++i) eps[i] = rng.normal();
  const Eigen::VectorXd root_d = ldlt.vectorD().cwiseMax(0.0).cwiseSqrt();
  const Eigen::MatrixXd lower = ldlt.matrixL();
  const Eigen::VectorXd z = comp.mean + ldlt.transpositionsP().transpose() * (lower * root_d.cwiseProduct(eps));
  return GoalSpec::carmi(std::vector<double>(z.data(), z.data() + d), GoalProvenance::cluster, c);
}

GoalSpec sample_standard_goal(Rng& rng) {
  std::vector<double> z(kNumMetrics);
  for (double& v : z) v = rng.normal();
  return GoalSpec::carmi(std::move(z), GoalProvenance::standard_normal);
}

Eigen::MatrixXd normalized_matrix(const std::vector<PlayerRow>& rows, const LevelStatsTable& stats) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), kNumMetrics);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto it = stats.find(rows[i].level_id);
    if (it == stats.end()) throw Error("no level stats for level " + std::to_string(rows[i].level_id));
    const auto z = normalize(rows[i].summary, it->second).z;
    for (int m = 0; m < kNumMetrics; ++m) out(static_cast<Eigen::Index>(i), m) = z[m];
  }
  return out;
}

ClusterModel fit_player_clusters(const std::vector<PlayerRow>& rows, const LevelStatsTable& stats, int n_components,
                                 std::uint64_t seed) {
  for (const auto& r : rows)
    if (r.split != Split::train)
      throw Error("player clusters are fit on train levels only; got a row from test level " +
                  std::to_string(r.level_id));
  return fit_gmm(normalized_matrix(rows, stats), n_components, seed);
}

namespace {

nlohmann::json matrix_json(const Eigen::MatrixXd& m) {
  auto j = nlohmann::json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    std::vector<double> row(static_cast<std::size_t>(m.cols()));
    for (Eigen::Index c = 0; c < m.cols(); ++c) row[static_cast<std::size_t>(c)] = m(r, c);
    j.push_back(row);
  }
  return j;
}

}  // namespace

void to_json(nlohmann::json& j, const ClusterModel& m) {
  auto comps = nlohmann::json::array();
  for (const auto& c : m.components)
    comps.push_back({{"weight", c.weight},
                     {"mean", std::vector<double>(c.mean.data(), c.mean.data() + c.mean.size())},
                     {"cov", matrix_json(c.cov)}});
  j = {{"n_components", m.num_components()}, {"dim", m.dim()},   {"reg", m.reg},
       {"seed", m.seed},                      {"iterations", m.iterations}, {"converged", m.converged},
       {"log_likelihood_trace", m.log_likelihood_trace}, {"components", comps}};
}

void from_json(const nlohmann::json& j, ClusterModel& m) {
  m = ClusterModel{};
  m.reg = j.at("reg").get<double>();
  m.seed = j.value("seed", std::uint64_t{0});
  m.iterations = j.value("iterations", 0);
  m.converged = j.value("converged", false);
  m.log_likelihood_trace = j.value("log_likelihood_trace", std::vector<double>{});
  const int d = j.at("dim").get<int>();
  for (const auto& jc : j.at("components")) {
    GmmComponent c;
    c.weight = jc.at("weight").get<double>();
    const auto mean = jc.at("mean").get<std::vector<double>>();
    const auto cov = jc.at("cov").get<std::vector<std::vector<double>>>();
    if (static_cast<int>(mean.size()) != d || static_cast<int>(cov.size()) != d)
      throw Error("cluster model: component dimension mismatch");
    c.mean = Eigen::Map<const Eigen::VectorXd>(mean.data(), d);
    c.cov.resize(d, d);
    for (int r = 0; r < d; ++r) {
      if (static_cast<int>(cov[r].size()) != d) throw Error("cluster model: covariance is not square");
      for (int k = 0; k < d; ++k) c.cov(r, k) = cov[r][k];
    }
    m.components.push_back(std::move(c));
  }
  if (static_cast<int>(m.components.size()) != j.at("n_components").get<int>())
    throw Error("cluster model: n_components does not match the component list");
  double total = 0.0;
  for (const auto& c : m.components) total += c.weight;
  if (std::abs(total - 1.0) > 1e-9) throw Error("cluster model: weights do not sum to 1");
}

void save_cluster_model(const ClusterModel& m, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  out << nlohmann::json(m).dump(2) << '\n';
}

ClusterModel load_cluster_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read " + path);
  return nlohmann::json::parse(in).get<ClusterModel>();
}

}  // namespace carmi
