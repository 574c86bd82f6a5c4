#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "carmi/conditioning.hpp"
#include "carmi/error.hpp"
#include "landscape.hpp"

using namespace carmi;

TEST(Distance, Basics) {
  const std::vector<double> z0(5, 0.0), e1{1, 0, 0, 0, 0};
  EXPECT_DOUBLE_EQ(distance(e1, e1), 0.0);
  EXPECT_DOUBLE_EQ(distance(e1, z0), 1.0);
  const std::vector<double> a{1, -2, 0.5, 3, 0}, b{0, 1, 1, -1, 2};
  EXPECT_DOUBLE_EQ(distance(a, b), distance(b, a));
  EXPECT_NEAR(distance(a, b), std::sqrt(1 + 9 + 0.25 + 16 + 4), 1e-12);
  EXPECT_DOUBLE_EQ(distance(a, b, DistanceKind::l1), 1 + 3 + 0.5 + 4 + 2);
  EXPECT_THROW(distance(a, std::vector<double>{1.0}), Error);
}

TEST(CarmiReward, Examples) {
  EXPECT_DOUBLE_EQ(carmi_step_reward(2.0, 1.5, false), 0.5);
  EXPECT_NEAR(carmi_step_reward(0.8, 0.5, true), -0.2, 1e-12);
}

TEST(CarmiReward, Telescopes) {
  Rng rng(1);
  for (int trial = 0; trial < 1000; ++trial) {
    const int T = 1 + static_cast<int>(rng.below(40));
    std::vector<double> d(T + 1);
    for (double& v : d) v = rng.uniform(0, 10);
    double total = 0.0;
    for (int t = 1; t <= T; ++t) total += carmi_step_reward(d[t - 1], d[t], t == T);
    EXPECT_NEAR(total, (d[0] - d[T]) - d[T], 1e-9);
    // The episodic return can only reach d_0 when the goal is hit.
    EXPECT_LE(total, d[0] + 1e-12);
  }
  EXPECT_DOUBLE_EQ(carmi_step_reward(3.0, 0.0, true), 3.0);
}

TEST(CariReward, LinearAndChecked) {
  EventVector none{};
  std::vector<double> w{1, 0, 0, 0, 0, 0, 0};
  EXPECT_EQ(cari_reward(w, none), 0.0);
  EventVector one_stab{};
  one_stab[kStabs] = 1;
  EXPECT_EQ(cari_reward(w, one_stab), 1.0);
  EXPECT_THROW(cari_reward(std::vector<double>{1, 2}, one_stab), Error);

  Rng rng(3);
  for (int i = 0; i < 100; ++i) {
    EventVector a{}, b{};
    std::vector<double> w1(kNumRewardEvents), w2(kNumRewardEvents), ws(kNumRewardEvents);
    EventVector sum{};
    for (int k = 0; k < kNumRewardEvents; ++k) {
      a[k] = static_cast<int>(rng.below(5));
      b[k] = static_cast<int>(rng.below(5));
      sum[k] = a[k] + b[k];
      w1[k] = rng.uniform(-1, 1);
      w2[k] = rng.uniform(-1, 1);
      ws[k] = w1[k] + w2[k];
    }
    EXPECT_NEAR(cari_reward(w1, sum), cari_reward(w1, a) + cari_reward(w1, b), 1e-12);
    EXPECT_NEAR(cari_reward(ws, a), cari_reward(w1, a) + cari_reward(w2, a), 1e-12);
  }
}

TEST(EventVectorTest, CountsAndTerminalFlags) {
  std::vector<StepEvent> events(3);
  events[0].kind = EventKind::shot;
  events[0].empowered = true;
  events[1].kind = EventKind::heal;
  events[2].kind = EventKind::stab;
  events[2].team = Team::enemy;
  const auto v = event_vector(events, Outcome::win);
  EXPECT_EQ(v, (EventVector{0, 1, 1, 1, 0, 1, 0}));
  EXPECT_EQ(event_vector({}, Outcome::loss)[kLossEvent], 1);
  EXPECT_EQ(event_vector({}, Outcome::none), EventVector{});
}

TEST(SampleCariCoefficients, Intervals) {
  RewardConfig cfg;
  Rng rng(4);
  constexpr int n = 10000;
  std::vector<double> mean(kNumRewardEvents, 0.0);
  for (int i = 0; i < n; ++i) {
    const auto w = sample_cari_coefficients(cfg, rng);
    ASSERT_EQ(w.size(), static_cast<std::size_t>(kNumRewardEvents));
    for (int k = 0; k < kNumMetrics; ++k) EXPECT_LE(std::abs(w[k]), 1.0);
    EXPECT_GE(w[kWinEvent], 0.0);
    EXPECT_LE(w[kLossEvent], 0.0);
    for (int k = 0; k < kNumRewardEvents; ++k) mean[k] += w[k] / n;
  }
  // Uniform on [a, b]: sd = (b - a) / sqrt(12).
  const double se_unit = 2.0 / std::sqrt(12.0) / std::sqrt(double(n));
  for (int k = 0; k < kNumMetrics; ++k) EXPECT_LT(std::abs(mean[k]), 3 * se_unit);
  EXPECT_LT(std::abs(mean[kWinEvent] - 1.0), 3 * se_unit);
  EXPECT_LT(std::abs(mean[kLossEvent] + 1.0), 3 * se_unit);

  cfg.cari_intervals[2] = {0.25, 0.25};
  EXPECT_EQ(sample_cari_coefficients(cfg, rng)[2], 0.25);
  cfg.cari_intervals[2] = {1, -1};
  EXPECT_THROW(sample_cari_coefficients(cfg, rng), Error);
}

TEST(WinOnlyReward, Values) {
  EXPECT_EQ(winonly_reward(Outcome::none, false), 0.0);
  EXPECT_EQ(winonly_reward(Outcome::win, false), 0.0);
  EXPECT_EQ(winonly_reward(Outcome::win, true), 1.0);
  EXPECT_EQ(winonly_reward(Outcome::loss, true), -1.0);
  EXPECT_EQ(winonly_reward(Outcome::draw, true), 0.0);
}

TEST(ComputeAlp, Examples) {
  EXPECT_EQ(compute_alp(std::vector<double>{0, 0}, 5.0, {}), 0.0);
  std::vector<CurriculumEntry> h{{{0, 0}, 0.3, 0.0}, {{5, 5}, 2.0, 0.0}};
  EXPECT_NEAR(compute_alp(std::vector<double>{0.1, 0}, 0.8, h), 0.5, 1e-12);
  EXPECT_EQ(compute_alp(std::vector<double>{5, 5}, 2.0, h), 0.0);
}

TEST(Curriculum, UpdateBookkeeping) {
  CurriculumState s;
  Rng rng(1);
  for (int i = 0; i < 20; ++i) {
    auto d = curriculum_sample(s, rng);
    EXPECT_TRUE(d.exploration);  // warm-up
    const double r = rng.uniform();
    const double expected_alp = compute_alp(d.z, r, s.history);
    curriculum_update(s, d.z, r);
    ASSERT_EQ(s.history.size(), static_cast<std::size_t>(i + 1));
    EXPECT_EQ(s.history.back().alp, expected_alp);
  }
  EXPECT_THROW(curriculum_update(s, {1.0}, 0.0), Error);
}

TEST(Curriculum, SamplesStayInBounds) {
  CurriculumConfig cfg;
  cfg.seed = 4;
  CurriculumState s(cfg);
  Rng rng(2), ret(3);
  for (int i = 0; i < 800; ++i) {
    auto d = curriculum_sample(s, rng);
    for (double v : d.z) {
      EXPECT_GE(v, -3.0);
      EXPECT_LE(v, 3.0);
    }
    // Return with a steep slope so the mixture puts mass near the bounds.
    curriculum_update(s, d.z, 10 * d.z[0] + ret.normal());
  }
  EXPECT_TRUE(s.gmm.has_value());
}

TEST(Curriculum, FallsBackWhenNoProgress) {
  CurriculumState s;
  Rng rng(5);
  for (int i = 0; i < 300; ++i) {
    auto d = curriculum_sample(s, rng);
    EXPECT_TRUE(d.exploration);  // constant returns give zero ALP, nothing to fit
    curriculum_update(s, d.z, 1.0);
  }
}

TEST(Curriculum, FocusesOnLearnableOrthant) {
  for (std::uint64_t seed : {11, 12, 13}) {
    const auto r = carmi::testing::run_orthant_curriculum(seed);
    EXPECT_GE(r.fraction(), 0.6) << "seed " << seed;
  }
  // Uniform reference lands in the orthant about 1/32 of the time.
  Rng rng(1);
  int inside = 0;
  for (int i = 0; i < 4000; ++i) {
    std::vector<double> z(5);
    for (double& v : z) v = rng.uniform(-3, 3);
    inside += carmi::testing::OrthantLandscape::inside(z);
  }
  EXPECT_NEAR(inside / 4000.0, 1.0 / 32, 0.01);
}

TEST(Curriculum, ReloadRefitsIdentically) {
  CurriculumConfig cfg;
  cfg.seed = 9;
  CurriculumState a(cfg);
  carmi::testing::OrthantLandscape land(1);
  Rng rng(3);
  for (int i = 0; i < 400; ++i) {
    auto d = curriculum_sample(a, rng);
    curriculum_update(a, d.z, land.episode_return(d.z));
  }
  auto b = curriculum_from_json(nlohmann::json::parse(curriculum_to_json(a).dump()));
  EXPECT_EQ(b.history, a.history);
  EXPECT_EQ(b.fitted_at, a.fitted_at);
  EXPECT_EQ(b.target_component, a.target_component);
  Rng r1(8), r2(8);
  for (int i = 0; i < 50; ++i) {
    auto x = curriculum_sample(a, r1), y = curriculum_sample(b, r2);
    ASSERT_EQ(x.z, y.z);
    curriculum_update(a, x.z, 0.5);
    curriculum_update(b, y.z, 0.5);
  }

  std::stringstream ss;
  write_curriculum_history(a, ss);
  int lines = 0;
  for (std::string line; std::getline(ss, line); ++lines) EXPECT_TRUE(nlohmann::json::parse(line).contains("alp"));
  EXPECT_EQ(lines, static_cast<int>(a.history.size()));
}

TEST(RewardConfigJson, RoundTrip) {
  RewardConfig c;
  c.mode = GoalMode::cari;
  c.distance = DistanceKind::l1;
  c.cari_intervals[1] = {-0.5, 2};
  nlohmann::json j = c;
  EXPECT_EQ(j.get<RewardConfig>(), c);
  j["win_interval"] = {3, 1};
  EXPECT_THROW(j.get<RewardConfig>(), Error);
}
