// carmi: command-line driver for the level / player / training / evaluation pipeline.

#include <cstdint>
#include <exception>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "carmi/error.hpp"
#include "carmi/pipeline.hpp"

namespace {

struct CommonFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::string> levels;
};

void add_common(CLI::App* app, CommonFlags& f) {
  app->add_option("--config", f.config, "pipeline config (JSON)")->check(CLI::ExistingFile);
  app->add_option("--seed", f.seed, "root seed, overrides the config");
  app->add_option("--out", f.out, "output directory, overrides the config");
  app->add_option("--levels", f.levels, "directory holding the level files and splits.json");
}

carmi::PipelineConfig resolve(const CommonFlags& f) {
  carmi::PipelineConfig cfg = f.config.empty() ? carmi::PipelineConfig{} : carmi::load_pipeline_config(f.config);
  if (f.seed) cfg.seed = *f.seed;
  if (f.out) cfg.out_dir = *f.out;
  if (f.levels) cfg.levels_dir = *f.levels;
  cfg.validate();
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Goal-conditioned play-style agents for a turn-based tactics game"};
  app.require_subcommand(1);
  CommonFlags flags;

  auto* gen_levels = app.add_subcommand("gen-levels", "generate train and test levels");
  auto* gen_players = app.add_subcommand("gen-players", "play every level with the synthetic personas");
  auto* fit = app.add_subcommand("fit-clusters", "fit the play-style mixture on train rows");
  auto* train = app.add_subcommand("train", "train one model");
  auto* evaluate = app.add_subcommand("evaluate", "coverage, cluster emulation or divergence");
  auto* report = app.add_subcommand("report", "collect evaluation outputs into reports/");
  auto* all = app.add_subcommand("all", "run every stage in order");
  auto* show = app.add_subcommand("print-config", "print the resolved config as JSON");
  for (auto* sub : {gen_levels, gen_players, fit, train, evaluate, report, all, show}) add_common(sub, flags);

  std::string mode = "carmi";
  std::optional<int> actors;
  std::optional<int> episodes;
  std::optional<std::uint64_t> run;
  bool resume = false;
  train->add_option("--mode", mode, "carmi, cari or winonly")->check(CLI::IsMember({"carmi", "cari", "winonly"}));
  train->add_option("--actors", actors, "episode generator threads")->check(CLI::PositiveNumber);
  train->add_option("--episodes", episodes, "total training episodes")->check(CLI::PositiveNumber);
  train->add_option("--run", run, "training run index within the world");
  train->add_flag("--resume", resume, "continue from the saved checkpoint");

  std::string which;
  evaluate->add_option("which", which, "coverage, emulate or divergence")
      ->required()
      ->check(CLI::IsMember({"coverage", "emulate", "divergence"}));

  CLI11_PARSE(app, argc, argv);

  try {
    auto cfg = resolve(flags);
    if (*gen_levels) {
      const auto split = carmi::cmd_gen_levels(cfg);
      std::cout << "wrote " << split.train.size() << " train and " << split.test.size() << " test levels\n";
    } else if (*gen_players) {
      const auto players = carmi::cmd_gen_players(cfg);
      std::cout << "wrote " << players.dataset.rows.size() << " player rows\n";
    } else if (*fit) {
      const auto model = carmi::cmd_fit_clusters(cfg);
      std::cout << "fit " << model.num_components() << " clusters\n";
    } else if (*train) {
      if (actors) cfg.train.n_actors = *actors;
      if (episodes) {
        if (*episodes % cfg.train.n_actors != 0)
          throw carmi::Error("--episodes must be a multiple of the actor count");
        cfg.train.episodes_per_actor = *episodes / cfg.train.n_actors;
      }
      if (run) cfg.train.seed = *run;
      cfg.validate();
      carmi::cmd_train(cfg, carmi::goal_mode_from_string(mode), resume);
      std::cout << "trained " << mode << " for " << cfg.train.total_episodes() << " episodes\n";
    } else if (*evaluate) {
      carmi::cmd_evaluate(cfg, carmi::eval_kind_from_string(which));
    } else if (*report) {
      carmi::cmd_report(cfg);
      std::cout << "wrote " << carmi::pipeline_paths(cfg).reports_dir() << "/report.txt\n";
    } else if (*all) {
      carmi::cmd_all(cfg);
    } else if (*show) {
      std::cout << nlohmann::json(cfg).dump(2) << '\n';
    }
  } catch (const std::exception& e) {
    std::cerr << "carmi: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
