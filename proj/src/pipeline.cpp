#include "carmi/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "carmi/error.hpp"

namespace carmi {

namespace fs = std::filesystem;

namespace {

constexpr GoalMode kModes[] = {GoalMode::carmi, GoalMode::cari, GoalMode::winonly};

std::uint64_t mode_index(GoalMode m) { return static_cast<std::uint64_t>(m); }

std::string fmt(double v, const char* spec = "%.6f") {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

void require_file(const std::string& path, std::string_view producer) {
  if (!fs::exists(path))
    throw Error("missing " + path + "; run `carmi " + std::string(producer) + "` with the same config first");
}

std::ofstream open_out(const std::string& path) {
  fs::create_directories(fs::path(path).parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  return out;
}

std::ifstream open_in(const std::string& path, std::string_view producer) {
  require_file(path, producer);
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path);
  return in;
}

nlohmann::json prior_json(const PersonaPrior& p) {
  return {{"centers", p.centers}, {"weights", p.weights}, {"jitter", p.jitter}};
}

PersonaPrior prior_from(const nlohmann::json& j) {
  PersonaPrior p = default_persona_prior();
  if (j.contains("centers")) p.centers = j.at("centers").get<std::vector<PersonaParams>>();
  if (j.contains("weights")) p.weights = j.at("weights").get<std::vector<double>>();
  p.jitter = j.value("jitter", p.jitter);
  if (p.centers.empty() || p.centers.size() != p.weights.size())
    throw Error("pipeline config: persona prior needs one weight per centre");
  return p;
}

std::vector<int> level_ids(const std::vector<LevelSpec>& levels) {
  std::vector<int> ids;
  for (const auto& l : levels) ids.push_back(l.level_id);
  return ids;
}

struct World {
  LevelSplit levels;
  PlayerDataset dataset;
  LevelStatsTable stats;
};

World load_world(const PipelineConfig& cfg) {
  const auto p = pipeline_paths(cfg);
  World w;
  w.levels = load_level_split(cfg);
  auto in = open_in(p.dataset(), "gen-players");
  w.dataset = read_dataset_csv(in);
  validate(w.dataset);
  require_file(p.level_stats(), "gen-players");
  w.stats = load_level_stats(p.level_stats());
  return w;
}

std::vector<EpisodeRecord> read_records_file(const std::string& path, std::string_view producer) {
  auto in = open_in(path, producer);
  return read_records(in);
}

void write_records_file(const std::vector<EpisodeRecord>& records, const std::string& path) {
  auto out = open_out(path);
  write_records(records, out);
}

}  // namespace

// ---- config ----

void PipelineConfig::validate() const {
  if (out_dir.empty()) throw Error("pipeline config: out_dir must not be empty");
  if (n_train_levels < 1 || n_test_levels < 1) throw Error("pipeline config: need at least one train and one test level");
  if (n_players < 2) throw Error("pipeline config: need at least two players for level statistics");
  if (clusters < 1) throw Error("pipeline config: clusters must be positive");
  if (coverage_episodes < 1 || emulate_per_cell < 2)
    throw Error("pipeline config: coverage_episodes >= 1 and emulate_per_cell >= 2 required");
  if (coverage_z_clip && !(*coverage_z_clip > 0.0)) throw Error("pipeline config: coverage_z_clip must be positive");
  train.validate();
}

void to_json(nlohmann::json& j, const PipelineConfig& c) {
  j = {{"seed", c.seed},
       {"out_dir", c.out_dir},
       {"levels_dir", c.levels_dir},
       {"level_gen", c.level_gen},
       {"n_train_levels", c.n_train_levels},
       {"n_test_levels", c.n_test_levels},
       {"first_level_id", c.first_level_id},
       {"n_players", c.n_players},
       {"persona_prior", prior_json(c.prior)},
       {"clusters", c.clusters},
       {"gmm", {{"reg", c.gmm.reg}, {"tol", c.gmm.tol}, {"max_iter", c.gmm.max_iter}, {"restarts", c.gmm.restarts}}},
       {"train", c.train},
       {"coverage_episodes", c.coverage_episodes},
       {"coverage_z_clip", c.coverage_z_clip ? nlohmann::json(*c.coverage_z_clip) : nlohmann::json()},
       {"emulate_per_cell", c.emulate_per_cell}};
}

void from_json(const nlohmann::json& j, PipelineConfig& c) {
  static const std::vector<std::string> known = {
      "seed", "out_dir", "levels_dir", "level_gen", "n_train_levels", "n_test_levels",     "first_level_id",  "n_players",
      "persona_prior", "clusters", "gmm", "train", "coverage_episodes", "coverage_z_clip", "emulate_per_cell"};
  for (const auto& [k, v] : j.items())
    if (std::find(known.begin(), known.end(), k) == known.end())
      throw Error("pipeline config: unknown key '" + k + "'");
  const PipelineConfig d;
  c = d;
  c.seed = j.value("seed", d.seed);
  c.out_dir = j.value("out_dir", d.out_dir);
  c.levels_dir = j.value("levels_dir", d.levels_dir);
  if (j.contains("level_gen")) c.level_gen = j.at("level_gen").get<LevelGenParams>();
  c.n_train_levels = j.value("n_train_levels", d.n_train_levels);
  c.n_test_levels = j.value("n_test_levels", d.n_test_levels);
  c.first_level_id = j.value("first_level_id", d.first_level_id);
  c.n_players = j.value("n_players", d.n_players);
  if (j.contains("persona_prior")) c.prior = prior_from(j.at("persona_prior"));
  c.clusters = j.value("clusters", d.clusters);
  if (j.contains("gmm")) {
    const auto& g = j.at("gmm");
    c.gmm.reg = g.value("reg", d.gmm.reg);
    c.gmm.tol = g.value("tol", d.gmm.tol);
    c.gmm.max_iter = g.value("max_iter", d.gmm.max_iter);
    c.gmm.restarts = g.value("restarts", d.gmm.restarts);
  }
  if (j.contains("train")) c.train = j.at("train").get<TrainConfig>();
  c.coverage_episodes = j.value("coverage_episodes", d.coverage_episodes);
  if (j.contains("coverage_z_clip") && !j.at("coverage_z_clip").is_null())
    c.coverage_z_clip = j.at("coverage_z_clip").get<double>();
  c.emulate_per_cell = j.value("emulate_per_cell", d.emulate_per_cell);
  c.validate();
}

PipelineConfig load_pipeline_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config file " + path);
  try {
    return nlohmann::json::parse(in, nullptr, true, true).get<PipelineConfig>();
  } catch (const nlohmann::json::exception& e) {
    throw Error("config " + path + ": " + e.what());
  }
}

// ---- paths ----

std::string PipelinePaths::levels_dir() const { return levels.empty() ? root + "/levels" : levels; }
std::string PipelinePaths::split_manifest() const { return levels_dir() + "/splits.json"; }
std::string PipelinePaths::dataset() const { return root + "/players/players.csv"; }
std::string PipelinePaths::level_stats() const { return root + "/players/level_stats.json"; }
std::string PipelinePaths::personas() const { return root + "/players/personas.json"; }
std::string PipelinePaths::clusters() const { return root + "/clusters.json"; }
std::string PipelinePaths::checkpoint(GoalMode m) const {
  return root + "/models/" + std::string(to_string(m)) + ".ckpt";
}
std::string PipelinePaths::learning_curve(GoalMode m) const {
  return root + "/models/" + std::string(to_string(m)) + "_curve.csv";
}
std::string PipelinePaths::curriculum_log() const { return root + "/models/carmi_curriculum.jsonl"; }
std::string PipelinePaths::coverage_records(GoalMode m, Split s) const {
  return root + "/eval/coverage_" + std::string(to_string(m)) + "_" + std::string(to_string(s)) + ".jsonl";
}
std::string PipelinePaths::emulation_records() const { return root + "/eval/emulation_carmi.jsonl"; }
std::string PipelinePaths::reports_dir() const { return root + "/reports"; }

PipelinePaths pipeline_paths(const PipelineConfig& cfg) { return {cfg.out_dir, cfg.levels_dir}; }

// ---- in-memory stages ----

LevelSplit generate_levels(const PipelineConfig& cfg) {
  const std::uint64_t seed = derive_seed(cfg.seed, "levels");
  LevelSplit s;
  for (int i = 0; i < cfg.n_train_levels + cfg.n_test_levels; ++i) {
    const int id = cfg.first_level_id + i;
    auto level = generate_level(derive_seed(seed, "level", {static_cast<std::uint64_t>(id)}), cfg.level_gen, id);
    (i < cfg.n_train_levels ? s.train : s.test).push_back(std::move(level));
  }
  return s;
}

GeneratedPlayers generate_players(const PipelineConfig& cfg, const LevelSplit& levels) {
  return generate_player_dataset(cfg.n_players, levels.train, levels.test, derive_seed(cfg.seed, "players"),
                                 cfg.prior);
}

ClusterModel fit_clusters(const PipelineConfig& cfg, const PlayerDataset& dataset, const LevelStatsTable& stats) {
  const auto rows = dataset.rows_for(Split::train);
  const Eigen::MatrixXd data = normalized_matrix(rows, stats);
  auto model = fit_gmm(data, cfg.clusters, derive_seed(cfg.seed, "clusters"), cfg.gmm);
  return model;
}

TrainConfig train_config_for(const PipelineConfig& cfg, GoalMode mode) {
  TrainConfig t = cfg.train;
  t.mode = mode;
  t.reward.mode = mode;
  // train.seed selects the run; the world stays fixed by the root seed.
  t.seed = derive_seed(cfg.seed, "train", {mode_index(mode), cfg.train.seed});
  t.checkpoint_path = pipeline_paths(cfg).checkpoint(mode);
  t.validate();
  return t;
}

double mean_final_distance(const std::vector<EpisodeRecord>& records) {
  double sum = 0.0;
  int n = 0;
  for (const auto& r : records)
    if (r.final_distance) {
      sum += *r.final_distance;
      ++n;
    }
  if (n == 0) throw Error("mean_final_distance: no goal-conditioned records");
  return sum / n;
}

int rounded_change_sign(double train_pct, double test_pct) {
  const long delta = std::lround(test_pct) - std::lround(train_pct);
  return (delta > 0) - (delta < 0);
}

std::vector<ClusterDirection> win_rate_directions(const EmulationReport& r) {
  std::vector<ClusterDirection> out(static_cast<std::size_t>(r.clusters));
  for (int c = 0; c < r.clusters; ++c) {
    auto sign = [c](const std::array<std::vector<EmulationCell>, 2>& block) -> std::optional<int> {
      if (block[0][c].n == 0 || block[1][c].n == 0) return std::nullopt;
      return rounded_change_sign(block[0][c].win_pct, block[1][c].win_pct);
    };
    out[c] = {sign(r.players), sign(r.agent)};
  }
  return out;
}

// ---- commands ----

LevelSplit cmd_gen_levels(const PipelineConfig& cfg) {
  const auto p = pipeline_paths(cfg);
  auto split = generate_levels(cfg);
  fs::create_directories(p.levels_dir());
  nlohmann::json manifest = {{"train", nlohmann::json::array()}, {"test", nlohmann::json::array()}};
  for (const auto* set : {&split.train, &split.test})
    for (const auto& l : *set) {
      const std::string name = "level_" + std::to_string(l.level_id) + ".json";
      save_level(l, p.levels_dir() + "/" + name);
      manifest[set == &split.train ? "train" : "test"].push_back({{"level_id", l.level_id}, {"file", name}});
    }
  auto out = open_out(p.split_manifest());
  out << manifest.dump(2) << '\n';
  return split;
}

LevelSplit load_level_split(const PipelineConfig& cfg) {
  const auto p = pipeline_paths(cfg);
  auto in = open_in(p.split_manifest(), "gen-levels");
  const auto manifest = nlohmann::json::parse(in);
  LevelSplit s;
  for (const char* key : {"train", "test"})
    for (const auto& e : manifest.at(key)) {
      auto level = load_level(p.levels_dir() + "/" + e.at("file").get<std::string>());
      if (level.level_id != e.at("level_id").get<int>())
        throw Error("split manifest disagrees with level file " + e.at("file").get<std::string>());
      (std::string(key) == "train" ? s.train : s.test).push_back(std::move(level));
    }
  for (const auto& a : s.train)
    for (const auto& b : s.test)
      if (a.level_id == b.level_id) throw Error("split manifest lists level " + std::to_string(a.level_id) + " twice");
  if (s.train.empty() || s.test.empty()) throw Error("split manifest needs train and test levels");
  return s;
}

GeneratedPlayers cmd_gen_players(const PipelineConfig& cfg) {
  const auto p = pipeline_paths(cfg);
  const auto levels = load_level_split(cfg);
  auto players = generate_players(cfg, levels);
  {
    auto out = open_out(p.dataset());
    write_dataset_csv(players.dataset, out);
  }
  save_level_stats(fit_level_stats(players.dataset), p.level_stats());
  auto out = open_out(p.personas());
  out << nlohmann::json(players.personas).dump(2) << '\n';
  return players;
}

ClusterModel cmd_fit_clusters(const PipelineConfig& cfg) {
  const auto w = load_world(cfg);
  auto model = fit_clusters(cfg, w.dataset, w.stats);
  save_cluster_model(model, pipeline_paths(cfg).clusters());
  return model;
}

void cmd_train(const PipelineConfig& cfg, GoalMode mode, bool resume) {
  const auto p = pipeline_paths(cfg);
  const auto w = load_world(cfg);
  const TrainConfig tc = train_config_for(cfg, mode);
  fs::create_directories(fs::path(tc.checkpoint_path).parent_path());
  auto trainer = [&] {
    if (!resume) return Trainer(tc, w.levels.train, w.stats);
    require_file(tc.checkpoint_path, "train --mode " + std::string(to_string(mode)));
    return Trainer::resume(tc.checkpoint_path, tc, w.levels.train, w.stats);
  }();
  trainer.run();
  trainer.save_checkpoint(tc.checkpoint_path);
  {
    auto out = open_out(p.learning_curve(mode));
    write_learning_curve(trainer.curve(), out);
  }
  if (mode == GoalMode::carmi) {
    auto out = open_out(p.curriculum_log());
    write_curriculum_history(trainer.curriculum(), out);
  }
}

EvalKind eval_kind_from_string(std::string_view s) {
  if (s == "coverage") return EvalKind::coverage;
  if (s == "emulate") return EvalKind::emulate;
  if (s == "divergence") return EvalKind::divergence;
  throw Error("unknown evaluation '" + std::string(s) + "' (expected coverage, emulate or divergence)");
}

namespace {

void evaluate_coverage(const PipelineConfig& cfg, const World& w) {
  const auto p = pipeline_paths(cfg);
  int evaluated = 0;
  for (GoalMode mode : kModes) {
    if (!fs::exists(p.checkpoint(mode))) continue;
    const auto policy = load_policy(p.checkpoint(mode));
    const auto runner = policy_runner(policy.net, policy.config.reward);
    for (Split split : {Split::train, Split::test}) {
      CoverageOptions opt;
      opt.n_episodes = cfg.coverage_episodes;
      opt.z_clip = cfg.coverage_z_clip;
      opt.seed = derive_seed(cfg.seed, "coverage", {mode_index(mode), static_cast<std::uint64_t>(split)});
      const auto& levels = split == Split::train ? w.levels.train : w.levels.test;
      write_records_file(coverage_run(runner, mode, levels, w.stats, opt, policy.config.reward),
                         p.coverage_records(mode, split));
    }
    ++evaluated;
  }
  if (evaluated == 0) throw Error("no trained models under " + p.root + "/models; run `carmi train --mode carmi` first");
}

void evaluate_emulate(const PipelineConfig& cfg, const World& w) {
  const auto p = pipeline_paths(cfg);
  require_file(p.checkpoint(GoalMode::carmi), "train --mode carmi");
  require_file(p.clusters(), "fit-clusters");
  const auto model = load_cluster_model(p.clusters());
  const auto policy = load_policy(p.checkpoint(GoalMode::carmi));
  const auto runner = policy_runner(policy.net, policy.config.reward);
  EmulationOptions opt{.n_per_cell = cfg.emulate_per_cell, .seed = derive_seed(cfg.seed, "emulate", {0})};
  auto records = emulation_episodes(runner, model, w.levels.train, w.stats, opt);
  opt.seed = derive_seed(cfg.seed, "emulate", {1});
  for (auto& r : emulation_episodes(runner, model, w.levels.test, w.stats, opt)) records.push_back(std::move(r));
  write_records_file(records, p.emulation_records());

  const auto report = aggregate_emulation(records, w.dataset.rows, model, w.stats, level_ids(w.levels.test));
  {
    auto out = open_out(p.reports_dir() + "/emulation.csv");
    write_emulation_csv(report, out);
  }
  auto out = open_out(p.reports_dir() + "/emulation.txt");
  write_emulation_table(report, out);
}

void evaluate_divergence(const PipelineConfig& cfg, const World& w) {
  const auto p = pipeline_paths(cfg);
  auto out = open_out(p.reports_dir() + "/divergence.csv");
  out << "mode,split,kl_players_agent,js,n_agent,n_players\n";
  for (GoalMode mode : kModes)
    for (Split split : {Split::train, Split::test}) {
      const auto records = read_records_file(p.coverage_records(mode, split), "evaluate coverage");
      const auto agent = normalized_points(records);
      const auto players = normalized_points(w.dataset.rows_for(split), w.stats);
      const auto d = estimate_divergence(players, agent);
      out << to_string(mode) << ',' << to_string(split) << ',' << fmt(d.kl, "%.17g") << ',' << fmt(d.js, "%.17g")
          << ',' << agent.size() << ',' << players.size() << '\n';
    }
}

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

CsvTable read_csv(const std::string& path, std::string_view producer) {
  auto in = open_in(path, producer);
  CsvTable t;
  std::string line;
  auto split_line = [](const std::string& l) {
    std::vector<std::string> cells;
    std::stringstream ss(l);
    std::string c;
    while (std::getline(ss, c, ',')) cells.push_back(c);
    if (!l.empty() && l.back() == ',') cells.emplace_back();
    return cells;
  };
  if (std::getline(in, line)) t.header = split_line(line);
  while (std::getline(in, line))
    if (!line.empty()) t.rows.push_back(split_line(line));
  return t;
}

}  // namespace

void cmd_evaluate(const PipelineConfig& cfg, EvalKind kind) {
  const auto w = load_world(cfg);
  switch (kind) {
    case EvalKind::coverage: evaluate_coverage(cfg, w); break;
    case EvalKind::emulate: evaluate_emulate(cfg, w); break;
    case EvalKind::divergence: evaluate_divergence(cfg, w); break;
  }
}

void cmd_report(const PipelineConfig& cfg) {
  const auto p = pipeline_paths(cfg);
  const auto w = load_world(cfg);
  auto out = open_out(p.reports_dir() + "/report.txt");
  out << "root seed " << cfg.seed << ", run " << cfg.train.seed << "\n";
  out << "levels: train";
  for (const auto& l : w.levels.train) out << ' ' << l.level_id;
  out << ", test";
  for (const auto& l : w.levels.test) out << ' ' << l.level_id;
  out << "\nplayers: " << cfg.n_players << " (" << w.dataset.rows.size() << " rows)\n\n";

  out << "training (last 10% of episodes)\n";
  out << "mode      episodes  mean_return  mean_d_T  win%\n";
  for (GoalMode mode : kModes) {
    if (!fs::exists(p.learning_curve(mode))) continue;
    const auto t = read_csv(p.learning_curve(mode), "train");
    const std::size_t n = t.rows.size();
    const std::size_t from = n - std::max<std::size_t>(1, n / 10);
    double ret = 0.0, dist = 0.0, wins = 0.0;
    int nd = 0;
    for (std::size_t i = from; i < n; ++i) {
      ret += std::stod(t.rows[i].at(2));
      if (!t.rows[i].at(3).empty()) {
        dist += std::stod(t.rows[i].at(3));
        ++nd;
      }
      wins += t.rows[i].at(4) == "win";
    }
    const double k = static_cast<double>(n - from);
    char line[160];
    std::snprintf(line, sizeof line, "%-9s %8zu  %11.4f  %8s  %5.1f\n", std::string(to_string(mode)).c_str(), n,
                  ret / k, nd ? fmt(dist / nd, "%.4f").c_str() : "-", 100.0 * wins / k);
    out << line;
  }

  const std::string div_path = p.reports_dir() + "/divergence.csv";
  if (fs::exists(div_path)) {
    out << "\ndivergence to the players (bits)\n";
    out << "mode      split  KL(players||agent)      JS\n";
    for (const auto& r : read_csv(div_path, "evaluate divergence").rows) {
      char line[160];
      std::snprintf(line, sizeof line, "%-9s %-5s  %18.4f  %6.4f\n", r.at(0).c_str(), r.at(1).c_str(),
                    std::stod(r.at(2)), std::stod(r.at(3)));
      out << line;
    }
  }

  const std::string emu_path = p.reports_dir() + "/emulation.txt";
  if (fs::exists(emu_path) && fs::exists(p.emulation_records()) && fs::exists(p.clusters())) {
    std::ifstream in(emu_path, std::ios::binary);
    out << "\ncluster emulation\n" << in.rdbuf();
    const auto model = load_cluster_model(p.clusters());
    const auto records = read_records_file(p.emulation_records(), "evaluate emulate");
    const auto rep = aggregate_emulation(records, w.dataset.rows, model, w.stats, level_ids(w.levels.test));
    out << "\nwin-rate change train -> test (rounded points)\n";
    const auto dirs = win_rate_directions(rep);
    int agree = 0;
    for (int c = 0; c < rep.clusters; ++c) {
      const auto& d = dirs[c];
      agree += d.agree();
      char line[200];
      std::snprintf(line, sizeof line, "cluster %d: players %5.1f -> %5.1f, agent %5.1f -> %5.1f, %s\n", c,
                    rep.players[0][c].win_pct, rep.players[1][c].win_pct, rep.agent[0][c].win_pct,
                    rep.agent[1][c].win_pct,
                    !d.players || !d.agent ? "no data" : d.agree() ? "same direction" : "different direction");
      out << line;
    }
    out << "agreement " << agree << '/' << rep.clusters << '\n';
  }

  std::vector<LabeledRecords> sets;
  sets.push_back({"players", normalized_points(w.dataset.rows_for(Split::train), w.stats)});
  for (GoalMode mode : kModes)
    if (fs::exists(p.coverage_records(mode, Split::train)))
      sets.push_back({std::string(to_string(mode)),
                      normalized_points(read_records_file(p.coverage_records(mode, Split::train), "evaluate coverage"))});
  export_figures(sets, p.reports_dir() + "/figures");
}

void cmd_all(const PipelineConfig& cfg) {
  cmd_gen_levels(cfg);
  cmd_gen_players(cfg);
  cmd_fit_clusters(cfg);
  for (GoalMode mode : kModes) cmd_train(cfg, mode, false);
  for (EvalKind k : {EvalKind::coverage, EvalKind::emulate, EvalKind::divergence}) cmd_evaluate(cfg, k);
  cmd_report(cfg);
}

}  // namespace carmi
