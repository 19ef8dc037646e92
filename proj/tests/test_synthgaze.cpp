#include <gtest/gtest.h>

#include <boost/math/distributions/students_t.hpp>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

#include "mhls/dataset.hpp"
#include "mhls/synthgaze.hpp"

using namespace mhls;

namespace {

struct Moments {
  double mean = 0.0, var = 0.0;
  std::size_t n = 0;
};

Moments moments(const std::vector<double>& v) {
  Moments m;
  m.n = v.size();
  m.mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(m.n);
  for (double x : v) m.var += (x - m.mean) * (x - m.mean);
  m.var /= static_cast<double>(m.n - 1);
  return m;
}

/// Two-sided Welch t-test p-value.
double welch_p(const std::vector<double>& a, const std::vector<double>& b) {
  const Moments x = moments(a), y = moments(b);
  const double sa = x.var / x.n, sb = y.var / y.n;
  const double t = (x.mean - y.mean) / std::sqrt(sa + sb);
  const double df = (sa + sb) * (sa + sb) / (sa * sa / (x.n - 1) + sb * sb / (y.n - 1));
  const boost::math::students_t dist(df);
  return 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t)));
}

/// Per-trial dispersion split by workload level.
std::pair<std::vector<double>, std::vector<double>> dispersions(const GeneratorKnobs& knobs,
                                                                std::size_t participants,
                                                                std::uint64_t seed) {
  std::vector<double> low, high;
  for (const GeneratedTrial& g : generate_trials(knobs, participants, 1, seed)) {
    (g.trial.scenario ? high : low).push_back(gaze_dispersion(g.trial.samples));
  }
  return {low, high};
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST(PlaceObstacles, SoftmaxOverGaps) {
  const auto p = place_obstacles(std::vector<double>{100.0, 0.0, 0.0}, 50.0);
  EXPECT_NEAR(p[0], 0.787, 5e-4);
  EXPECT_NEAR(p[1], p[2], 1e-15);
  const auto u = place_obstacles(std::vector<double>{30.0, 30.0, 30.0}, 50.0);
  for (double v : u) EXPECT_NEAR(v, 1.0 / 3.0, 1e-15);
  EXPECT_THROW(place_obstacles(std::vector<double>{1, 2, 3}, 0.0), std::invalid_argument);
  EXPECT_THROW(place_obstacles(std::vector<double>{1, -2, 3}, 50.0), std::invalid_argument);
}

TEST(PlaceObstacles, ShiftInvariantAndStableForLargeGaps) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 500.0);
  for (int trial = 0; trial < 100; ++trial) {
    const std::vector<double> g = {u(rng), u(rng), u(rng)};
    const std::vector<double> s = {g[0] + 123.0, g[1] + 123.0, g[2] + 123.0};
    const auto a = place_obstacles(g, 50.0), b = place_obstacles(s, 50.0);
    for (std::size_t i = 0; i < kLanes; ++i) EXPECT_NEAR(a[i], b[i], 1e-12);
  }
  const auto big = place_obstacles(std::vector<double>{1e6, 1e6 - 50.0, 0.0}, 50.0);
  EXPECT_TRUE(std::isfinite(big[0]));
  EXPECT_NEAR(big[0] + big[1] + big[2], 1.0, 1e-15);
}

TEST(ObstacleTimeline, RegularSpacingAndDeterminism) {
  std::mt19937_64 a(5), b(5);
  const auto x = obstacle_timeline(50.0, 1000.0, a), y = obstacle_timeline(50.0, 1000.0, b);
  ASSERT_EQ(x.size(), y.size());
  ASSERT_GE(x.size(), 19u);
  for (std::size_t i = 0; i < x.size(); ++i) {
    EXPECT_EQ(x[i].lane, y[i].lane);
    EXPECT_LT(x[i].lane, kLanes);
    if (i) EXPECT_NEAR(x[i].position - x[i - 1].position, 50.0, 1e-9);
  }
}

TEST(SimulateTrial, SixtyHertzInsideTheScreenAndDeterministic) {
  const GeneratorKnobs knobs;
  const ParticipantProfile p = make_profile(knobs, 7, 1);
  ScenarioConfig sc;
  sc.duration = 10.0;
  const auto a = simulate_trial(p, sc, 42, 1), b = simulate_trial(p, sc, 42, 1);
  ASSERT_EQ(a.size(), 600u);
  for (std::size_t k = 0; k < a.size(); ++k) {
    EXPECT_EQ(a[k].t, static_cast<double>(k) / 60.0);
    EXPECT_EQ(a[k].x, b[k].x);
    EXPECT_GE(a[k].x, 0.0);
    EXPECT_LE(a[k].x, kScreenWidth);
    EXPECT_GE(a[k].y, 0.0);
    EXPECT_LE(a[k].y, kScreenHeight);
  }
  EXPECT_NE(simulate_trial(p, sc, 43, 1)[100].x, a[100].x);
}

TEST(GazeDispersion, RootMeanSquareDistance) {
  const std::vector<GazeSample> s = {{0, 0, 0}, {1, 2, 0}, {2, 0, 2}, {3, 2, 2}};
  EXPECT_DOUBLE_EQ(gaze_dispersion(s), std::sqrt(2.0));
}

TEST(Generator, FortyTrialsForTwentyParticipants) {
  const auto trials = generate_trials(GeneratorKnobs{}, 20, 1, 3);
  ASSERT_EQ(trials.size(), 40u);
  int high = 0;
  for (const auto& g : trials) {
    high += g.trial.scenario;
    EXPECT_EQ(g.trial.samples.size(), 3600u);
    EXPECT_GE(g.trial.participant, 1);
    EXPECT_LE(g.trial.participant, 20);
  }
  EXPECT_EQ(high, 20);
}

TEST(Generator, HighWorkloadConcentratesGaze) {
  const auto [low, high] = dispersions(GeneratorKnobs{}, 20, 11);
  const double ml = moments(low).mean, mh = moments(high).mean;
  EXPECT_GE((ml - mh) / mh, GeneratorKnobs{}.effect_size);
  EXPECT_LT(welch_p(low, high), 0.01);
}

TEST(Generator, ZeroSeparationMakesLevelsIndistinguishable) {
  GeneratorKnobs knobs;
  knobs.separation = 0.0;
  const auto [low, high] = dispersions(knobs, 20, 11);
  EXPECT_GT(welch_p(low, high), 0.01);
  const ParticipantProfile p = make_profile(knobs, 11, 3);
  EXPECT_EQ(p.low.dwell_mean, p.high.dwell_mean);
  EXPECT_EQ(p.low.spread, p.high.spread);
}

TEST(Generator, ParticipantsDiffer) {
  const GeneratorKnobs knobs;
  std::vector<double> cx;
  for (int id = 1; id <= 20; ++id) cx.push_back(make_profile(knobs, 9, id).center_x);
  EXPECT_GT(moments(cx).var, 100.0);
  EXPECT_EQ(make_profile(knobs, 9, 4).center_x, make_profile(knobs, 9, 4).center_x);
}

TEST(Generator, KnobValidation) {
  GeneratorKnobs k;
  k.dwell_low = 0.0;
  EXPECT_THROW(k.validate(), std::invalid_argument);
  k = {};
  k.dispersion_ratio = 0.0;
  EXPECT_THROW(k.validate(), std::invalid_argument);
  k = {};
  k.separation = -1.0;
  EXPECT_THROW(k.validate(), std::invalid_argument);
}

TEST(Generator, FilesAreByteIdenticalForAFixedSeed) {
  const auto root = std::filesystem::temp_directory_path() / "mhls_test_gen";
  std::filesystem::remove_all(root);
  GeneratorKnobs knobs;
  knobs.trial_duration = 5.0;
  const auto trials = generate_trials(knobs, 2, 2, 17);
  const auto a = write_generated(root / "a", knobs, trials, 17);
  const auto b = write_generated(root / "b", knobs, generate_trials(knobs, 2, 2, 17), 17);
  ASSERT_EQ(a.size(), 8u);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].filename(), b[i].filename());
    EXPECT_EQ(slurp(a[i]), slurp(b[i]));
  }
  EXPECT_EQ(slurp(root / "a" / "manifest.txt"), slurp(root / "b" / "manifest.txt"));
  const auto back = read_gaze_dir(root / "a");
  EXPECT_EQ(back.size(), 8u);
  std::filesystem::remove_all(root);
}
