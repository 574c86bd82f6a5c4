#include "carmi/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <ostream>
#include <sstream>

#include "carmi/error.hpp"

namespace carmi {

EpisodeRunner policy_runner(const Network<float>& net, const RewardConfig& reward, ActionSelection selection) {
  return [&net, reward, selection](const LevelSpec& level, const LevelStats* stats, const GoalSpec& goal,
                                   std::uint64_t seed) {
    return run_episode(net, level, stats, goal, reward, seed, nullptr, selection);
  };
}

namespace {

const LevelStats* find_stats(const LevelStatsTable& stats, int level_id) {
  auto it = stats.find(level_id);
  return it == stats.end() ? nullptr : &it->second;
}

const LevelStats& require_stats(const LevelStatsTable& stats, int level_id) {
  const LevelStats* s = find_stats(stats, level_id);
  if (!s) throw Error("no player stats for level " + std::to_string(level_id));
  return *s;
}

}  // namespace

std::vector<EpisodeRecord> coverage_run(const EpisodeRunner& runner, GoalMode mode,
                                        const std::vector<LevelSpec>& levels, const LevelStatsTable& stats,
                                        const CoverageOptions& opt, const RewardConfig& reward) {
  if (levels.empty()) throw Error("coverage_run: no levels");
  std::vector<EpisodeRecord> out;
  out.reserve(static_cast<std::size_t>(opt.n_episodes));
  for (int i = 0; i < opt.n_episodes; ++i) {
    const auto idx = static_cast<std::uint64_t>(i);
    const LevelSpec& level = levels[static_cast<std::size_t>(i) % levels.size()];
    Rng goal_rng(derive_seed(opt.seed, "coverage-goal", {idx}));
    GoalSpec goal;
    switch (mode) {
      case GoalMode::carmi:
        goal = sample_standard_goal(goal_rng);
        if (opt.z_clip)
          for (double& v : goal.values) v = std::clamp(v, -*opt.z_clip, *opt.z_clip);
        break;
      case GoalMode::cari: goal = GoalSpec::cari(sample_cari_coefficients(reward, goal_rng)); break;
      case GoalMode::winonly: goal = GoalSpec::winonly(); break;
    }
    const LevelStats* s = find_stats(stats, level.level_id);
    if (mode == GoalMode::carmi && !s) throw Error("coverage_run: no player stats for level " + std::to_string(level.level_id));
    out.push_back(runner(level, s, goal, derive_seed(opt.seed, "coverage", {idx})));
  }
  return out;
}

int Binning::bin_of(double v) const {
  if (v < lo) return 0;
  if (v >= hi) return inner + 1;
  const int k = static_cast<int>(std::floor((v - lo) / (hi - lo) * inner));
  return 1 + std::clamp(k, 0, inner - 1);
}

namespace {

std::map<std::uint64_t, double> histogram(const std::vector<std::vector<double>>& pts, const Binning& b) {
  std::map<std::uint64_t, double> h;
  for (const auto& p : pts) {
    std::uint64_t key = 0;
    for (double v : p) key = key * static_cast<std::uint64_t>(b.bins()) + static_cast<std::uint64_t>(b.bin_of(v));
    h[key] += 1.0;
  }
  return h;
}

}  // namespace

Divergence estimate_divergence(const std::vector<std::vector<double>>& p, const std::vector<std::vector<double>>& q,
                               const Binning& b) {
  if (p.empty() || q.empty()) throw Error("estimate_divergence: both sample sets must be non-empty");
  const std::size_t dim = p.front().size();
  for (const auto* set : {&p, &q})
    for (const auto& v : *set)
      if (v.size() != dim) throw Error("estimate_divergence: points differ in dimension");
  if (b.inner < 1 || !(b.hi > b.lo) || !(b.epsilon > 0.0)) throw Error("estimate_divergence: invalid binning");

  const auto hp = histogram(p, b), hq = histogram(q, b);
  const double cells = std::pow(static_cast<double>(b.bins()), static_cast<double>(dim));
  const double zp = static_cast<double>(p.size()) + b.epsilon * cells;
  const double zq = static_cast<double>(q.size()) + b.epsilon * cells;

  Divergence d;
  double seen = 0.0;
  auto add = [&](double cp, double cq, double weight) {
    const double pi = (cp + b.epsilon) / zp, qi = (cq + b.epsilon) / zq, mi = 0.5 * (pi + qi);
    d.kl += weight * pi * std::log2(pi / qi);
    d.js += weight * 0.5 * (pi * std::log2(pi / mi) + qi * std::log2(qi / mi));
  };
  auto ip = hp.begin(), iq = hq.begin();
  while (ip != hp.end() || iq != hq.end()) {
    if (iq == hq.end() || (ip != hp.end() && ip->first < iq->first)) {
      add(ip->second, 0.0, 1.0);
      ++ip;
    } else if (ip == hp.end() || iq->first < ip->first) {
      add(0.0, iq->second, 1.0);
      ++iq;
    } else {
      add(ip->second, iq->second, 1.0);
      ++ip;
      ++iq;
    }
    seen += 1.0;
  }
  add(0.0, 0.0, cells - seen);
  d.kl = std::max(d.kl, 0.0);
  d.js = std::clamp(d.js, 0.0, 1.0);
  return d;
}

std::vector<std::vector<double>> normalized_points(const std::vector<EpisodeRecord>& records) {
  std::vector<std::vector<double>> out;
  for (const auto& r : records) {
    if (!r.normalized) throw Error("record for level " + std::to_string(r.level_id) + " carries no normalized summary");
    out.emplace_back(r.normalized->z.begin(), r.normalized->z.end());
  }
  return out;
}

std::vector<std::vector<double>> normalized_points(const std::vector<PlayerRow>& rows, const LevelStatsTable& stats) {
  std::vector<std::vector<double>> out;
  for (const auto& r : rows) {
    const auto z = normalize(r.summary, require_stats(stats, r.level_id)).z;
    out.emplace_back(z.begin(), z.end());
  }
  return out;
}

MeanCI confidence_interval(const std::vector<double>& x) {
  if (x.size() < 2) throw Error("confidence_interval: need at least two samples");
  const double n = static_cast<double>(x.size());
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= n;
  double ss = 0.0;
  for (double v : x) ss += (v - mean) * (v - mean);
  return {mean, 1.96 * std::sqrt(ss / (n - 1.0)) / std::sqrt(n)};
}

std::vector<EpisodeRecord> emulation_episodes(const EpisodeRunner& runner, const ClusterModel& model,
                                              const std::vector<LevelSpec>& levels, const LevelStatsTable& stats,
                                              const EmulationOptions& opt) {
  std::vector<EpisodeRecord> out;
  for (const auto& level : levels) {
    const LevelStats& s = require_stats(stats, level.level_id);
    for (int c = 0; c < model.num_components(); ++c)
      for (int k = 0; k < opt.n_per_cell; ++k) {
        const std::initializer_list<std::uint64_t> key = {static_cast<std::uint64_t>(level.level_id),
                                                          static_cast<std::uint64_t>(c), static_cast<std::uint64_t>(k)};
        Rng goal_rng(derive_seed(opt.seed, "emulate-goal", key));
        out.push_back(runner(level, &s, sample_cluster_goal(model, c, goal_rng), derive_seed(opt.seed, "emulate", key)));
      }
  }
  return out;
}

namespace {

struct CellAccumulator {
  std::array<std::vector<double>, kNumMetrics> rates;
  int wins = 0, losses = 0, draws = 0;

  void add(const MetricVector& r, Outcome o) {
    for (int m = 0; m < kNumMetrics; ++m) rates[m].push_back(r[m]);
    wins += o == Outcome::win;
    losses += o == Outcome::loss;
    draws += o == Outcome::draw;
  }

  EmulationCell finish() const {
    EmulationCell c;
    c.n = static_cast<int>(rates[0].size());
    if (c.n == 0) return c;
    for (int m = 0; m < kNumMetrics; ++m) {
      if (c.n >= 2) {
        c.metrics[m] = confidence_interval(rates[m]);
      } else {
        c.metrics[m] = {rates[m][0], 0.0};
      }
    }
    c.win_pct = 100.0 * wins / c.n;
    c.loss_pct = 100.0 * losses / c.n;
    c.draw_pct = 100.0 * draws / c.n;
    return c;
  }
};

}  // namespace

EmulationReport aggregate_emulation(const std::vector<EpisodeRecord>& records, const std::vector<PlayerRow>& players,
                                    const ClusterModel& model, const LevelStatsTable& stats,
                                    const std::vector<int>& test_levels) {
  const int C = model.num_components();
  auto split_of = [&](int level_id) {
    return std::find(test_levels.begin(), test_levels.end(), level_id) != test_levels.end() ? 1 : 0;
  };
  std::array<std::vector<CellAccumulator>, 2> agent, human;
  for (int s = 0; s < 2; ++s) {
    agent[s].resize(static_cast<std::size_t>(C + 1));
    human[s].resize(static_cast<std::size_t>(C + 1));
  }
  for (const auto& r : records) {
    if (r.goal.cluster < 0 || r.goal.cluster >= C)
      throw Error("emulation record without a valid cluster (level " + std::to_string(r.level_id) + ")");
    const int s = split_of(r.level_id);
    agent[s][static_cast<std::size_t>(r.goal.cluster)].add(r.summary.rates, r.outcome);
    agent[s][static_cast<std::size_t>(C)].add(r.summary.rates, r.outcome);
  }
  for (const auto& row : players) {
    const auto z = normalize(row.summary, require_stats(stats, row.level_id)).z;
    const int c = most_likely_component(model, Eigen::Map<const Eigen::VectorXd>(z.data(), kNumMetrics));
    const int s = split_of(row.level_id);
    human[s][static_cast<std::size_t>(c)].add(row.summary.rates, row.outcome);
    human[s][static_cast<std::size_t>(C)].add(row.summary.rates, row.outcome);
  }
  EmulationReport rep;
  rep.clusters = C;
  for (int s = 0; s < 2; ++s)
    for (int c = 0; c <= C; ++c) {
      rep.agent[s].push_back(agent[s][static_cast<std::size_t>(c)].finish());
      rep.players[s].push_back(human[s][static_cast<std::size_t>(c)].finish());
    }
  return rep;
}

EmulationReport emulate_clusters(const EpisodeRunner& runner, const ClusterModel& model,
                                 const std::vector<LevelSpec>& train_levels, const std::vector<LevelSpec>& test_levels,
                                 const LevelStatsTable& stats, const std::vector<PlayerRow>& players,
                                 const EmulationOptions& opt) {
  std::vector<LevelSpec> all = train_levels;
  all.insert(all.end(), test_levels.begin(), test_levels.end());
  std::vector<int> test_ids;
  for (const auto& l : test_levels) test_ids.push_back(l.level_id);
  return aggregate_emulation(emulation_episodes(runner, model, all, stats, opt), players, model, stats, test_ids);
}

namespace {

std::string column_name(const EmulationReport& r, int c) { return c == r.clusters ? "All" : std::to_string(c); }

std::string fmt(double v, int prec) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.*f", prec, v);
  return buf;
}

}  // namespace

void write_emulation_csv(const EmulationReport& r, std::ostream& out) {
  out << "source,split,cluster,n";
  for (auto name : kMetricNames) out << ',' << name << "_mean," << name << "_ci";
  out << ",win_pct,loss_pct,draw_pct\n";
  for (int src = 0; src < 2; ++src)
    for (int s = 0; s < 2; ++s)
      for (int c = 0; c <= r.clusters; ++c) {
        const auto& cell = (src == 0 ? r.players : r.agent)[s][static_cast<std::size_t>(c)];
        out << (src == 0 ? "players" : "agent") << ',' << (s == 0 ? "train" : "test") << ',' << column_name(r, c)
            << ',' << cell.n;
        for (const auto& m : cell.metrics) out << ',' << fmt(m.mean, 6) << ',' << fmt(m.halfwidth, 6);
        out << ',' << fmt(cell.win_pct, 2) << ',' << fmt(cell.loss_pct, 2) << ',' << fmt(cell.draw_pct, 2) << '\n';
      }
}

void write_emulation_table(const EmulationReport& r, std::ostream& out) {
  const char* rows[] = {"stabs", "shots", "emp. shots", "heals", "shields"};
  for (int s = 0; s < 2; ++s) {
    out << (s == 0 ? "Train levels\n" : "Test levels\n");
    out << std::left << std::setw(14) << "";
    for (int c = 0; c <= r.clusters; ++c) {
      const std::string name = c == r.clusters ? "All" : "Cluster " + std::to_string(c);
      out << std::setw(19) << (name + " pl") << std::setw(19) << (name + " ag");
    }
    out << '\n';
    for (int m = 0; m < kNumMetrics; ++m) {
      out << std::setw(14) << rows[m];
      for (int c = 0; c <= r.clusters; ++c)
        for (const auto* block : {&r.players, &r.agent}) {
          const auto& ci = (*block)[s][static_cast<std::size_t>(c)].metrics[m];
          out << std::setw(19) << (fmt(ci.mean, 2) + " +- " + fmt(ci.halfwidth, 2));
        }
      out << '\n';
    }
    const char* outcome_rows[] = {"% win", "% lost", "% draw"};
    for (int o = 0; o < 3; ++o) {
      out << std::setw(14) << outcome_rows[o];
      for (int c = 0; c <= r.clusters; ++c)
        for (const auto* block : {&r.players, &r.agent}) {
          const auto& cell = (*block)[s][static_cast<std::size_t>(c)];
          out << std::setw(19) << fmt(o == 0 ? cell.win_pct : o == 1 ? cell.loss_pct : cell.draw_pct, 0);
        }
      out << '\n';
    }
    out << std::setw(14) << "n";
    for (int c = 0; c <= r.clusters; ++c)
      for (const auto* block : {&r.players, &r.agent})
        out << std::setw(19) << (*block)[s][static_cast<std::size_t>(c)].n;
    out << "\n\n";
  }
}

void write_records(const std::vector<EpisodeRecord>& records, std::ostream& out) {
  for (const auto& r : records) out << nlohmann::json(r).dump() << '\n';
}

std::vector<EpisodeRecord> read_records(std::istream& in) {
  std::vector<EpisodeRecord> out;
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    try {
      out.push_back(nlohmann::json::parse(line).get<EpisodeRecord>());
    } catch (const std::exception& e) {
      throw Error("episode records line " + std::to_string(n) + ": " + e.what());
    }
  }
  return out;
}

void export_figures(const std::vector<LabeledRecords>& sets, const std::string& out_dir, const Binning& b) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  auto open = [&](const char* name) {
    std::ofstream f(fs::path(out_dir) / name);
    if (!f) throw Error("cannot write " + (fs::path(out_dir) / name).string());
    return f;
  };
  {
    auto f = open("scatter.csv");
    f << "source,stabs_z,shots_z\n";
    for (const auto& s : sets)
      for (const auto& p : s.points) f << s.source << ',' << fmt(p.at(kStabs), 6) << ',' << fmt(p.at(kShots), 6) << '\n';
  }
  {
    auto f = open("histograms.csv");
    f << "source,metric,bin,lo,hi,mass\n";
    for (const auto& s : sets) {
      if (s.points.empty()) continue;
      for (int m = 0; m < kNumMetrics; ++m) {
        std::vector<double> mass(static_cast<std::size_t>(b.bins()), 0.0);
        for (const auto& p : s.points) mass[static_cast<std::size_t>(b.bin_of(p.at(m)))] += 1.0;
        const double step = (b.hi - b.lo) / b.inner;
        for (int k = 0; k < b.bins(); ++k) {
          const std::string lo = k == 0 ? "-inf" : fmt(b.lo + (k - 1) * step, 3);
          const std::string hi = k == b.bins() - 1 ? "inf" : fmt(b.lo + k * step, 3);
          f << s.source << ',' << kMetricNames[m] << ',' << k << ',' << lo << ',' << hi << ','
            << fmt(mass[k] / static_cast<double>(s.points.size()), 6) << '\n';
        }
      }
    }
  }
  {
    auto f = open("scatter.svg");
    const char* colors[] = {"#1b9e77", "#d95f02", "#7570b3", "#e7298a", "#66a61e"};
    const double size = 400, pad = 40, range = 4.0;
    auto px = [&](double v) { return pad + (std::clamp(v, -range, range) + range) / (2 * range) * size; };
    f << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << size + 2 * pad + 120 << "\" height=\""
      << size + 2 * pad << "\">\n"
      << "<rect x=\"" << pad << "\" y=\"" << pad << "\" width=\"" << size << "\" height=\"" << size
      << "\" fill=\"none\" stroke=\"black\"/>\n"
      << "<text x=\"" << pad + size / 2 << "\" y=\"" << size + 2 * pad - 8
      << "\" text-anchor=\"middle\" font-size=\"12\">stabs (normalized)</text>\n"
      << "<text x=\"12\" y=\"" << pad + size / 2 << "\" font-size=\"12\" transform=\"rotate(-90 12 "
      << pad + size / 2 << ")\" text-anchor=\"middle\">shots (normalized)</text>\n";
    for (std::size_t i = 0; i < sets.size(); ++i) {
      const char* color = colors[i % 5];
      f << "<g fill=\"" << color << "\" fill-opacity=\"0.5\">\n";
      for (const auto& p : sets[i].points)
        f << "<circle cx=\"" << fmt(px(p.at(kStabs)), 1) << "\" cy=\"" << fmt(2 * pad + size - px(p.at(kShots)), 1)
          << "\" r=\"2\"/>\n";
      f << "</g>\n";
      f << "<text x=\"" << size + 2 * pad << "\" y=\"" << pad + 16 * (i + 1) << "\" font-size=\"12\" fill=\"" << color
        << "\">" << sets[i].source << "</text>\n";
    }
    f << "</svg>\n";
  }
}

}  // namespace carmi
