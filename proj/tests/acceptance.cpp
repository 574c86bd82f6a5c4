// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits nonzero if any fails. Usage: acceptance [work_dir] [criterion ...]

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <iterator>
#include <numbers>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "carmi/conditioning.hpp"
#include "carmi/error.hpp"
#include "carmi/evaluation.hpp"
#include "carmi/game/actions.hpp"
#include "carmi/game/rules.hpp"
#include "carmi/metrics.hpp"
#include "carmi/personas.hpp"
#include "carmi/pipeline.hpp"
#include "carmi/playstyle.hpp"
#include "landscape.hpp"

using namespace carmi;
namespace fs = std::filesystem;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string num(double v, int prec = 4) {
  std::ostringstream s;
  s.precision(prec);
  s << v;
  return s.str();
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---- 1: action-space size ----

Verdict action_space() {
  const ActionSpace space(20, 20);
  // Independent count: per hero one move per cell, a shot and a stab per enemy
  // slot and one entry per super slot; plus the global skip.
  const int expected = kNumHeroes * (20 * 20 + 2 * kMaxEnemies + kNumSuperSlots) + 1;
  bool bijective = true;
  for (int i = 0; i < space.size(); ++i) bijective &= space.encode(space.decode(i)) == i;
  const bool pass = space.size() == 1258 && expected == 1258 && bijective;
  return {pass, "size " + std::to_string(space.size()) + ", bijective " + (bijective ? "yes" : "no")};
}

// ---- 2: telescoping reward ----

Verdict telescoping() {
  Rng rng(2);
  double worst = 0.0;
  for (int k = 0; k < 1000; ++k) {
    const int len = 1 + static_cast<int>(rng.below(40));
    std::vector<double> d(len + 1);
    for (double& v : d) v = rng.uniform(0.0, 10.0);
    double sum = 0.0;
    for (int t = 1; t <= len; ++t) sum += carmi_step_reward(d[t - 1], d[t], t == len);
    worst = std::max(worst, std::abs(sum - ((d[0] - d[len]) - d[len])));
  }
  return {worst <= 1e-9, "max |error| " + num(worst)};
}

// ---- 3: mask soundness fuzz ----

Verdict mask_fuzz() {
  Rng rng(3);
  int states = 0, legal_failures = 0, masked_accepted = 0;
  for (std::uint64_t seed = 0; states < 10000; ++seed) {
    const auto level = generate_level(derive_seed(3, "fuzz-level", {seed}), LevelGenParams{});
    const ActionSpace space(level.width, level.height);
    GameState s = reset(level);
    while (!s.terminal() && states < 10000) {
      const auto mask = legal_actions(s);
      for (int i = 0; i < mask.size(); ++i) {
        GameState copy = s;
        try {
          step(copy, space.decode(i));
          masked_accepted += !mask[i];
        } catch (const IllegalActionError&) {
          legal_failures += mask[i];
        }
      }
      ++states;
      const auto legal = mask.legal_indices();
      step(s, space.decode(legal[rng.below(legal.size())]));
    }
  }
  return {legal_failures == 0 && masked_accepted == 0,
          std::to_string(states) + " states, " + std::to_string(legal_failures) + " legal failures, " +
              std::to_string(masked_accepted) + " masked accepted"};
}

// ---- 4: normalization ----

Verdict normalization() {
  std::vector<LevelSpec> train, test;
  for (int i = 0; i < 4; ++i) train.push_back(generate_level(derive_seed(4, "level", {std::uint64_t(i)}), {}, i + 1));
  test.push_back(generate_level(derive_seed(4, "level", {9}), {}, 9));
  const auto players = generate_player_dataset(25, train, test, 4);
  const auto stats = fit_level_stats(players.dataset);
  double worst_mean = 0.0, worst_std = 0.0;
  int checked = 0;
  for (const auto& [id, st] : stats) {
    std::vector<MetricVector> z;
    for (const auto& r : players.dataset.rows)
      if (r.level_id == id) z.push_back(normalize(r.summary, st).z);
    for (int m = 0; m < kNumMetrics; ++m) {
      if (st.sigma[m] <= kSigmaFloor) continue;  // constant metric: normalized to 0, no unit spread
      double mean = 0.0;
      for (const auto& v : z) mean += v[m];
      mean /= z.size();
      double var = 0.0;
      for (const auto& v : z) var += (v[m] - mean) * (v[m] - mean);
      worst_mean = std::max(worst_mean, std::abs(mean));
      worst_std = std::max(worst_std, std::abs(std::sqrt(var / z.size()) - 1.0));
      ++checked;
    }
  }
  return {checked > 0 && worst_mean < 1e-9 && worst_std < 1e-9,
          std::to_string(checked) + " (level, metric) pairs, max |mean| " + num(worst_mean) + ", max |std-1| " +
              num(worst_std)};
}

// ---- 5: GMM recovery ----

Verdict gmm_recovery() {
  const std::vector<std::vector<double>> centers{{-3, -3, 0, 0, 0}, {3, 0, 3, 0, 0}, {0, 3, -3, 2, 0}};
  Rng rng(5);
  Eigen::MatrixXd data(1500, 5);
  for (int c = 0; c < 3; ++c)
    for (int i = 0; i < 500; ++i)
      for (int k = 0; k < 5; ++k) data(c * 500 + i, k) = centers[c][k] + 0.5 * rng.normal();
  const auto model = fit_gmm(data, 3, 5);
  bool monotone = true;
  const auto& trace = model.log_likelihood_trace;
  for (std::size_t i = 1; i < trace.size(); ++i) monotone &= trace[i] >= trace[i - 1];
  std::vector<int> perm{0, 1, 2};
  double best = 1e300;
  do {
    double worst = 0.0;
    for (int c = 0; c < 3; ++c)
      for (int k = 0; k < 5; ++k)
        worst = std::max(worst, std::abs(model.components[perm[c]].mean[k] - centers[c][k]));
    best = std::min(best, worst);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return {monotone && best <= 0.1,
          "max mean error " + num(best) + ", log-likelihood " + (monotone ? "monotone" : "DECREASED") + " over " +
              std::to_string(trace.size()) + " iterations"};
}

// ---- 6: divergence estimator ----

Verdict divergence_estimator() {
  Rng rng(6);
  std::vector<std::vector<double>> p(50000, std::vector<double>(1)), q(50000, std::vector<double>(1));
  for (auto& v : p) v[0] = rng.normal();
  for (auto& v : q) v[0] = 1.0 + rng.normal();
  const double truth = 0.5 / std::numbers::ln2;
  const auto pq = estimate_divergence(p, q), qp = estimate_divergence(q, p), pp = estimate_divergence(p, p);
  const double rel = std::abs(pq.kl - truth) / truth;
  const bool pass = rel <= 0.2 && std::abs(pp.js) <= 1e-9 && std::abs(pq.js - qp.js) <= 1e-9;
  return {pass, "KL " + num(pq.kl) + " bits vs " + num(truth) + " (rel err " + num(rel, 3) + "), JS(p,p) " +
                    num(pp.js) + ", |JS asym| " + num(std::abs(pq.js - qp.js))};
}

// ---- 7: curriculum concentrates on the learnable orthant ----

Verdict curriculum() {
  bool pass = true;
  std::string detail;
  for (std::uint64_t seed : {1, 2, 3}) {
    const auto r = testing::run_orthant_curriculum(seed);
    pass &= r.fraction() >= 0.6;
    detail += "seed " + std::to_string(seed) + ": " + num(r.fraction(), 3) + "  ";
  }
  detail += "(uniform " + num(1.0 / (1 << kNumMetrics), 3) + ")";
  return {pass, detail};
}

// ---- 8-10: trained models ----

constexpr int kRuns = 3;

PipelineConfig desk_config(const fs::path& dir, int run) {
  PipelineConfig cfg;
  cfg.seed = 2024;
  cfg.out_dir = (dir / ("run" + std::to_string(run))).string();
  cfg.level_gen = LevelGenParams{};  // 10x10, 3-5 enemies
  cfg.n_train_levels = 5;
  cfg.n_test_levels = 2;
  cfg.n_players = 25;
  cfg.clusters = 3;
  cfg.train.n_actors = 1;
  cfg.train.episodes_per_actor = 60000;
  cfg.train.learning_rate = 1e-3;
  cfg.train.curriculum.lo = -2.0;
  cfg.train.curriculum.hi = 2.0;
  cfg.train.seed = static_cast<std::uint64_t>(run);
  cfg.coverage_episodes = 2500;
  cfg.emulate_per_cell = 20;
  return cfg;
}

struct Runs {
  std::vector<PipelineConfig> configs;
  bool ready = false;
};

void ensure_trained(Runs& runs, const fs::path& dir) {
  if (runs.ready) return;
  for (int r = 1; r <= kRuns; ++r) {
    const auto cfg = desk_config(dir, r);
    const auto t0 = std::chrono::steady_clock::now();
    cmd_all(cfg);
    std::cout << "  [run " << r << " trained and evaluated in " << num(seconds_since(t0) / 60.0, 3) << " min]"
              << std::endl;
    runs.configs.push_back(cfg);
  }
  runs.ready = true;
}

Verdict goal_matching(Runs& runs, const fs::path& dir) {
  ensure_trained(runs, dir);
  const auto& cfg = runs.configs.front();
  const auto levels = load_level_split(cfg);
  const auto stats = load_level_stats(pipeline_paths(cfg).level_stats());
  const auto policy = load_policy(pipeline_paths(cfg).checkpoint(GoalMode::carmi));
  CoverageOptions opt{.n_episodes = 500, .z_clip = 2.0, .seed = derive_seed(cfg.seed, "goal-matching")};
  const auto records = coverage_run(policy_runner(policy.net, policy.config.reward), GoalMode::carmi, levels.train,
                                    stats, opt, policy.config.reward);
  const double d = mean_final_distance(records);
  const double bound = 0.6 * std::sqrt(static_cast<double>(kNumMetrics));
  const int episodes = policy.config.total_episodes();
  return {d <= bound && episodes <= 60000,
          "mean d_T " + num(d) + " (bound " + num(bound) + ") after " + std::to_string(episodes) + " episodes"};
}

std::map<std::string, double> train_js(const PipelineConfig& cfg) {
  std::ifstream in(pipeline_paths(cfg).reports_dir() + "/divergence.csv");
  std::string line;
  std::getline(in, line);
  std::map<std::string, double> js;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    for (std::string c; std::getline(ss, c, ',');) cells.push_back(c);
    if (cells.size() >= 4 && cells[1] == "train") js[cells[0]] = std::stod(cells[3]);
  }
  return js;
}

Verdict coverage_ordering(Runs& runs, const fs::path& dir) {
  ensure_trained(runs, dir);
  int holds = 0;
  std::string detail;
  for (const auto& cfg : runs.configs) {
    auto js = train_js(cfg);
    const bool ok = js.at("carmi") < js.at("cari") && js.at("carmi") < js.at("winonly");
    holds += ok;
    detail += "[carmi " + num(js["carmi"], 3) + ", cari " + num(js["cari"], 3) + ", winonly " + num(js["winonly"], 3) +
              (ok ? "] " : "]x ");
  }
  return {holds >= 2, std::to_string(holds) + "/" + std::to_string(kRuns) + " runs ordered " + detail};
}

Verdict generalization(Runs& runs, const fs::path& dir) {
  ensure_trained(runs, dir);
  const auto& cfg = runs.configs.front();
  const auto p = pipeline_paths(cfg);
  const auto levels = load_level_split(cfg);
  std::ifstream din(p.dataset());
  const auto dataset = read_dataset_csv(din);
  const auto stats = load_level_stats(p.level_stats());
  const auto model = load_cluster_model(p.clusters());
  std::ifstream rin(p.emulation_records());
  const auto records = read_records(rin);
  std::vector<int> test_ids;
  for (const auto& l : levels.test) test_ids.push_back(l.level_id);
  const auto report = aggregate_emulation(records, dataset.rows, model, stats, test_ids);
  const auto dirs = win_rate_directions(report);
  int agree = 0;
  std::string detail;
  for (int c = 0; c < report.clusters; ++c) {
    agree += dirs[c].agree();
    auto pct = [](const EmulationCell& cell) { return cell.n ? num(cell.win_pct, 3) : std::string("-"); };
    detail += "c" + std::to_string(c) + " players " + pct(report.players[0][c]) + "->" + pct(report.players[1][c]) +
              " agent " + pct(report.agent[0][c]) + "->" + pct(report.agent[1][c]) + (dirs[c].agree() ? "  " : " x  ");
  }
  return {agree >= 2, std::to_string(agree) + "/" + std::to_string(report.clusters) + " clusters agree: " + detail};
}

// ---- 11: determinism ----

std::map<std::string, std::string> read_tree(const fs::path& root) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (!e.is_regular_file()) continue;
    std::ifstream in(e.path(), std::ios::binary);
    files[fs::relative(e.path(), root).string()] =
        std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  }
  return files;
}

Verdict determinism(const fs::path& dir) {
  std::vector<std::map<std::string, std::string>> trees;
  std::vector<double> times;
  for (int k = 0; k < 2; ++k) {
    PipelineConfig cfg;
    cfg.seed = 11;
    cfg.out_dir = (dir / ("determinism" + std::to_string(k))).string();
    fs::remove_all(cfg.out_dir);
    cfg.n_train_levels = 3;
    cfg.n_test_levels = 2;
    cfg.n_players = 25;
    cfg.train.n_actors = 1;
    cfg.train.episodes_per_actor = 300;
    cfg.train.checkpoint_every = 100;
    cfg.coverage_episodes = 200;
    cfg.emulate_per_cell = 4;
    const auto t0 = std::chrono::steady_clock::now();
    cmd_all(cfg);
    times.push_back(seconds_since(t0));
    trees.push_back(read_tree(cfg.out_dir));
  }
  int differing = 0;
  for (const auto& [name, bytes] : trees[0]) {
    auto it = trees[1].find(name);
    differing += it == trees[1].end() || it->second != bytes;
  }
  differing += static_cast<int>(trees[1].size()) - static_cast<int>(trees[0].size());
  const bool has_reports = trees[0].count("reports/report.txt") && trees[0].count("reports/divergence.csv");
  return {differing == 0 && has_reports,
          std::to_string(trees[0].size()) + " files compared, " + std::to_string(differing) + " differ; runs took " +
              num(times[0], 3) + " s and " + num(times[1], 3) + " s"};
}

}  // namespace

int main(int argc, char** argv) {
  const fs::path dir = argc > 1 ? fs::path(argv[1]) : fs::current_path() / "acceptance_work";
  std::set<int> wanted;
  for (int i = 2; i < argc; ++i) wanted.insert(std::stoi(argv[i]));
  fs::create_directories(dir);

  Runs runs;
  const std::vector<std::pair<int, std::function<Verdict()>>> criteria = {
      {1, action_space},
      {2, telescoping},
      {3, mask_fuzz},
      {4, normalization},
      {5, gmm_recovery},
      {6, divergence_estimator},
      {7, curriculum},
      {11, [&] { return determinism(dir); }},
      {8, [&] { return goal_matching(runs, dir); }},
      {9, [&] { return coverage_ordering(runs, dir); }},
      {10, [&] { return generalization(runs, dir); }},
  };

  int failed = 0;
  for (const auto& [id, check] : criteria) {
    if (!wanted.empty() && !wanted.count(id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Verdict r;
    try {
      r = check();
    } catch (const std::exception& e) {
      r = {false, std::string("error: ") + e.what()};
    }
    failed += !r.pass;
    std::printf("criterion %2d: %s  %s  (%.1f s)\n", id, r.pass ? "PASS" : "FAIL", r.detail.c_str(),
                seconds_since(t0));
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
