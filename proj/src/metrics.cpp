#include "carmi/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>

#include "carmi/error.hpp"

namespace carmi {

std::array<long, kNumMetrics> SummaryData::counts() const {
  std::array<long, kNumMetrics> c{};
  for (int m = 0; m < kNumMetrics; ++m) c[m] = std::lround(rates[m] * turns_played);
  return c;
}

std::array<int, kNumMetrics> count_metric_events(std::span<const StepEvent> events) {
  std::array<int, kNumMetrics> c{};
  for (const auto& e : events) {
    if (e.team != Team::hero) continue;
    switch (e.kind) {
      case EventKind::stab: ++c[kStabs]; break;
      case EventKind::shot:
        ++c[kShots];
        if (e.empowered) ++c[kEmpoweredShots];
        break;
      case EventKind::heal: ++c[kHeals]; break;
      case EventKind::shield: ++c[kShields]; break;
      default: break;
    }
  }
  return c;
}

SummaryData partial_summarize(std::span<const StepEvent> events, int turns_elapsed, int level_id) {
  if (turns_elapsed < 0) throw Error("partial_summarize: negative turn count");
  const auto c = count_metric_events(events);
  SummaryData s;
  s.level_id = level_id;
  s.turns_played = std::max(1, turns_elapsed);
  for (int m = 0; m < kNumMetrics; ++m) s.rates[m] = static_cast<double>(c[m]) / s.turns_played;
  return s;
}

SummaryData summarize(const Trajectory& t) { return partial_summarize(t.events, t.turns_played, t.level_id); }

LevelStats fit_level_stats(std::span<const SummaryData> summaries) {
  if (summaries.size() < 2) throw Error("fit_level_stats: need at least 2 summaries");
  LevelStats st;
  st.level_id = summaries.front().level_id;
  st.n_samples = static_cast<int>(summaries.size());
  for (const auto& s : summaries)
    if (s.level_id != st.level_id) throw Error("fit_level_stats: summaries from different levels");
  const double n = static_cast<double>(summaries.size());
  for (int m = 0; m < kNumMetrics; ++m) {
    double mean = 0.0;
    for (const auto& s : summaries) mean += s.rates[m];
    mean /= n;
    double var = 0.0;
    for (const auto& s : summaries) var += (s.rates[m] - mean) * (s.rates[m] - mean);
    st.mu[m] = mean;
    st.sigma[m] = std::max(std::sqrt(var / n), kSigmaFloor);
  }
  return st;
}

MetricVector normalize_rates(const MetricVector& rates, const LevelStats& st) {
  MetricVector z{};
  for (int m = 0; m < kNumMetrics; ++m) z[m] = (rates[m] - st.mu[m]) / st.sigma[m];
  return z;
}

NormalizedSummary normalize(const SummaryData& s, const LevelStats& st) {
  if (s.level_id != st.level_id)
    throw Error("normalize: summary of level " + std::to_string(s.level_id) + " against stats of level " +
                std::to_string(st.level_id));
  return {s.level_id, normalize_rates(s.rates, st)};
}

MetricVector denormalize(const MetricVector& z, const LevelStats& st) {
  MetricVector x{};
  for (int m = 0; m < kNumMetrics; ++m) x[m] = z[m] * st.sigma[m] + st.mu[m];
  return x;
}

void to_json(nlohmann::json& j, const LevelStats& s) {
  j = {{"level_id", s.level_id}, {"mu", s.mu}, {"sigma", s.sigma}, {"n_samples", s.n_samples}};
}

void from_json(const nlohmann::json& j, LevelStats& s) {
  s.level_id = j.at("level_id").get<int>();
  s.mu = j.at("mu").get<MetricVector>();
  s.sigma = j.at("sigma").get<MetricVector>();
  s.n_samples = j.at("n_samples").get<int>();
}

void save_level_stats(const LevelStatsTable& table, const std::string& path) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& [id, st] : table) j.push_back(st);
  std::ofstream out(path);
  if (!out) throw Error("cannot write level stats to " + path);
  out << j.dump(2) << '\n';
}

LevelStatsTable load_level_stats(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open level stats " + path);
  LevelStatsTable table;
  for (const auto& item : nlohmann::json::parse(in)) {
    auto st = item.get<LevelStats>();
    table[st.level_id] = st;
  }
  return table;
}

std::string_view to_string(Split s) { return s == Split::train ? "train" : "test"; }

std::vector<int> PlayerDataset::levels(Split split) const {
  std::set<int> ids;
  for (const auto& r : rows)
    if (r.split == split) ids.insert(r.level_id);
  return {ids.begin(), ids.end()};
}

std::vector<PlayerRow> PlayerDataset::rows_for(Split split) const {
  std::vector<PlayerRow> out;
  std::copy_if(rows.begin(), rows.end(), std::back_inserter(out), [&](const auto& r) { return r.split == split; });
  return out;
}

void write_dataset_csv(const PlayerDataset& d, std::ostream& out) {
  out << "level_id,player_id";
  for (auto name : kMetricNames) out << ',' << name;
  out << ",turns_played,outcome,split,seed\n";
  std::ostringstream line;
  line << std::setprecision(17);
  for (const auto& r : d.rows) {
    line.str("");
    line << r.level_id << ',' << r.player_id;
    for (double v : r.summary.rates) line << ',' << v;
    line << ',' << r.summary.turns_played << ',' << to_string(r.outcome) << ',' << to_string(r.split) << ','
         << r.seed << '\n';
    out << line.str();
  }
}

PlayerDataset read_dataset_csv(std::istream& in) {
  PlayerDataset d;
  std::string line;
  if (!std::getline(in, line) || line.rfind("level_id,player_id", 0) != 0)
    throw Error("player dataset: missing CSV header");
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) f.push_back(cell);
    if (f.size() != 11) throw Error("player dataset: line " + std::to_string(line_no) + " has wrong column count");
    PlayerRow r;
    r.level_id = std::stoi(f[0]);
    r.player_id = std::stoi(f[1]);
    r.summary.level_id = r.level_id;
    for (int m = 0; m < kNumMetrics; ++m) r.summary.rates[m] = std::stod(f[2 + m]);
    r.summary.turns_played = std::stoi(f[7]);
    r.outcome = outcome_from_string(f[8]);
    if (f[9] != "train" && f[9] != "test") throw Error("player dataset: bad split '" + f[9] + "'");
    r.split = f[9] == "train" ? Split::train : Split::test;
    r.seed = std::stoull(f[10]);
    d.rows.push_back(r);
  }
  validate(d);
  return d;
}

void validate(const PlayerDataset& d) {
  std::set<std::pair<int, int>> pairs;
  std::map<int, Split> level_split;
  for (const auto& r : d.rows) {
    if (!pairs.emplace(r.level_id, r.player_id).second)
      throw Error("player dataset: duplicate (level, player) = (" + std::to_string(r.level_id) + ", " +
                  std::to_string(r.player_id) + ")");
    auto [it, inserted] = level_split.emplace(r.level_id, r.split);
    if (!inserted && it->second != r.split)
      throw Error("player dataset: level " + std::to_string(r.level_id) + " in both train and test");
    for (double v : r.summary.rates)
      if (!(v >= 0.0) || !std::isfinite(v)) throw Error("player dataset: negative or non-finite rate");
  }
}

LevelStatsTable fit_level_stats(const PlayerDataset& d) {
  std::map<int, std::vector<SummaryData>> by_level;
  for (const auto& r : d.rows) by_level[r.level_id].push_back(r.summary);
  LevelStatsTable table;
  for (const auto& [id, rows] : by_level) table[id] = fit_level_stats(std::span<const SummaryData>(rows));
  return table;
}

}  // namespace carmi
