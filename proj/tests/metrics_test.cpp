#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "carmi/error.hpp"
#include "carmi/metrics.hpp"
#include "carmi/rng.hpp"

using namespace carmi;

namespace {

StepEvent hero_event(EventKind kind, bool empowered = false) {
  StepEvent e;
  e.kind = kind;
  e.team = Team::hero;
  e.unit = 0;
  e.empowered = empowered;
  return e;
}

SummaryData with_rates(int level, MetricVector rates, int turns = 10) {
  SummaryData s;
  s.level_id = level;
  s.rates = rates;
  s.turns_played = turns;
  return s;
}

std::vector<SummaryData> random_summaries(int level, int n, Rng& rng) {
  std::vector<SummaryData> out;
  for (int i = 0; i < n; ++i) {
    MetricVector r;
    for (auto& v : r) v = static_cast<double>(rng.below(20)) / 10.0;
    out.push_back(with_rates(level, r));
  }
  return out;
}

}  // namespace

TEST(Summarize, CountsPerTurn) {
  Trajectory t;
  t.turns_played = 4;
  for (int i = 0; i < 8; ++i) t.events.push_back(hero_event(EventKind::shot));
  const auto s = summarize(t);
  EXPECT_DOUBLE_EQ(s.rates[kShots], 2.0);
  EXPECT_DOUBLE_EQ(s.rates[kStabs], 0.0);
}

TEST(Summarize, EmptyLogIsZero) {
  Trajectory t;
  t.turns_played = 7;
  for (double r : summarize(t).rates) EXPECT_EQ(r, 0.0);
}

TEST(Summarize, EmpoweredShotsAreAlsoShots) {
  Trajectory t;
  t.turns_played = 2;
  t.events = {hero_event(EventKind::shot, true), hero_event(EventKind::shot, true), hero_event(EventKind::shot)};
  const auto s = summarize(t);
  EXPECT_DOUBLE_EQ(s.rates[kShots], 1.5);
  EXPECT_DOUBLE_EQ(s.rates[kEmpoweredShots], 1.0);
}

TEST(Summarize, IgnoresEnemyAndNonMetricEvents) {
  Trajectory t;
  t.turns_played = 1;
  StepEvent enemy_shot = hero_event(EventKind::shot);
  enemy_shot.team = Team::enemy;
  t.events = {enemy_shot, hero_event(EventKind::move), hero_event(EventKind::empower_cast), hero_event(EventKind::skip),
              hero_event(EventKind::heal), hero_event(EventKind::shield), hero_event(EventKind::stab)};
  const auto s = summarize(t);
  EXPECT_EQ(s.rates, (MetricVector{1, 0, 0, 1, 1}));
}

TEST(PartialSummarize, DivisorFlooredAtOne) {
  std::vector<StepEvent> events{hero_event(EventKind::shot)};
  EXPECT_DOUBLE_EQ(partial_summarize(events, 0).rates[kShots], 1.0);
  EXPECT_EQ(partial_summarize({}, 5).rates, MetricVector{});
  EXPECT_THROW(partial_summarize(events, -1), Error);
}

TEST(PartialSummarize, MatchesSummarizeAtEpisodeEnd) {
  Trajectory t;
  t.level_id = 3;
  t.turns_played = 6;
  for (int i = 0; i < 5; ++i) t.events.push_back(hero_event(i % 2 ? EventKind::stab : EventKind::heal));
  EXPECT_EQ(partial_summarize(t.events, 6, 3), summarize(t));
}

TEST(Summarize, CountsRecoveredExactly) {
  Rng rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    Trajectory t;
    t.turns_played = 1 + static_cast<int>(rng.below(10));
    std::array<long, kNumMetrics> expected{};
    const int n = static_cast<int>(rng.below(40));
    for (int i = 0; i < n; ++i) {
      switch (rng.below(4)) {
        case 0: t.events.push_back(hero_event(EventKind::stab)); ++expected[kStabs]; break;
        case 1: {
          const bool emp = rng.below(2);
          t.events.push_back(hero_event(EventKind::shot, emp));
          ++expected[kShots];
          if (emp) ++expected[kEmpoweredShots];
          break;
        }
        case 2: t.events.push_back(hero_event(EventKind::heal)); ++expected[kHeals]; break;
        default: t.events.push_back(hero_event(EventKind::shield)); ++expected[kShields]; break;
      }
    }
    EXPECT_EQ(summarize(t).counts(), expected);
  }
}

TEST(FitLevelStats, PopulationSigma) {
  std::vector<SummaryData> s{with_rates(2, {0, 1, 0, 0, 0}), with_rates(2, {0, 2, 0, 0, 0}),
                             with_rates(2, {0, 3, 0, 0, 0})};
  const auto st = fit_level_stats(s);
  EXPECT_EQ(st.level_id, 2);
  EXPECT_EQ(st.n_samples, 3);
  EXPECT_DOUBLE_EQ(st.mu[kShots], 2.0);
  EXPECT_NEAR(st.sigma[kShots], std::sqrt(2.0 / 3.0), 1e-12);
  // Constant metrics hit the floor.
  EXPECT_EQ(st.sigma[kStabs], kSigmaFloor);
}

TEST(FitLevelStats, Errors) {
  std::vector<SummaryData> one{with_rates(1, {})};
  EXPECT_THROW(fit_level_stats(one), Error);
  std::vector<SummaryData> mixed{with_rates(1, {}), with_rates(2, {})};
  EXPECT_THROW(fit_level_stats(mixed), Error);
}

TEST(Normalize, Examples) {
  std::vector<SummaryData> s{with_rates(2, {0, 1, 0, 0, 0}), with_rates(2, {0, 2, 0, 0, 0}),
                             with_rates(2, {0, 3, 0, 0, 0})};
  const auto st = fit_level_stats(s);
  EXPECT_NEAR(normalize(s[2], st).z[kShots], 1.2247, 1e-4);
  SummaryData at_mean = with_rates(2, st.mu);
  for (double z : normalize(at_mean, st).z) EXPECT_EQ(z, 0.0);
  EXPECT_THROW(normalize(with_rates(5, st.mu), st), Error);
}

TEST(Normalize, FittingSetIsStandardized) {
  Rng rng(11);
  const auto s = random_summaries(4, 25, rng);
  const auto st = fit_level_stats(s);
  for (int m = 0; m < kNumMetrics; ++m) {
    if (st.sigma[m] == kSigmaFloor) continue;
    double mean = 0, sq = 0;
    for (const auto& x : s) mean += normalize(x, st).z[m];
    mean /= s.size();
    for (const auto& x : s) sq += std::pow(normalize(x, st).z[m] - mean, 2);
    EXPECT_NEAR(mean, 0.0, 1e-9);
    EXPECT_NEAR(std::sqrt(sq / s.size()), 1.0, 1e-9);
  }
}

TEST(Normalize, RoundTripAndAffine) {
  Rng rng(5);
  const auto s = random_summaries(1, 30, rng);
  const auto st = fit_level_stats(s);
  for (int trial = 0; trial < 100; ++trial) {
    MetricVector x, y;
    for (int m = 0; m < kNumMetrics; ++m) {
      x[m] = rng.uniform(0, 3);
      y[m] = rng.uniform(0, 3);
    }
    const auto back = denormalize(normalize_rates(x, st), st);
    for (int m = 0; m < kNumMetrics; ++m) EXPECT_NEAR(back[m], x[m], 1e-12);

    const double a = rng.uniform();
    MetricVector mix;
    for (int m = 0; m < kNumMetrics; ++m) mix[m] = a * x[m] + (1 - a) * y[m];
    const auto zx = normalize_rates(x, st), zy = normalize_rates(y, st), zm = normalize_rates(mix, st);
    for (int m = 0; m < kNumMetrics; ++m) EXPECT_NEAR(zm[m], a * zx[m] + (1 - a) * zy[m], 1e-9);
  }
}

TEST(LevelStats, JsonRoundTrip) {
  Rng rng(2);
  LevelStatsTable table;
  for (int l = 1; l <= 3; ++l) {
    const auto s = random_summaries(l, 10, rng);
    table[l] = fit_level_stats(s);
  }
  const std::string path = ::testing::TempDir() + "level_stats.json";
  save_level_stats(table, path);
  EXPECT_EQ(load_level_stats(path), table);
}

TEST(PlayerDataset, CsvRoundTripAndValidation) {
  Rng rng(9);
  PlayerDataset d;
  for (int l = 0; l < 3; ++l)
    for (int p = 0; p < 4; ++p) {
      PlayerRow r;
      r.level_id = l;
      r.player_id = p;
      r.summary = with_rates(l, {rng.uniform(), rng.uniform(), rng.uniform(), 0.1, 1.0 / 3.0}, 3);
      r.outcome = p % 2 ? Outcome::win : Outcome::loss;
      r.split = l == 2 ? Split::test : Split::train;
      r.seed = rng.next_u64();
      d.rows.push_back(r);
    }
  std::stringstream ss;
  write_dataset_csv(d, ss);
  const auto header = ss.str().substr(0, ss.str().find('\n'));
  EXPECT_EQ(header,
            "level_id,player_id,stabs_per_turn,shots_per_turn,empowered_shots_per_turn,heals_per_turn,"
            "shields_per_turn,turns_played,outcome,split,seed");
  const auto back = read_dataset_csv(ss);
  EXPECT_EQ(back.rows, d.rows);
  EXPECT_NO_THROW(validate(back));
  EXPECT_EQ(back.levels(Split::train), (std::vector<int>{0, 1}));

  auto dup = d;
  dup.rows.push_back(d.rows.front());
  EXPECT_THROW(validate(dup), Error);
  auto leak = d;
  leak.rows.front().split = Split::test;
  EXPECT_THROW(validate(leak), Error);

  const auto stats = fit_level_stats(d);
  ASSERT_EQ(stats.size(), 3u);
  EXPECT_EQ(stats.at(1).n_samples, 4);
}
