#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "testing.hpp"
#include "trafficlens/detect.hpp"
#include "trafficlens/error.hpp"

using namespace trafficlens;
using namespace trafficlens::detect;

namespace {

// Direct transcription of the all-pairs definition, no neighbour selection.
std::vector<double> brute_abof(const std::vector<Point>& pts) {
  const std::size_t n = pts.size(), d = pts[0].size();
  std::vector<double> out(n);
  for (std::size_t a = 0; a < n; ++a) {
    std::vector<double> xs, ws;
    for (std::size_t b = 0; b < n; ++b)
      for (std::size_t c = b + 1; c < n; ++c) {
        if (b == a || c == a) continue;
        double ab2 = 0, ac2 = 0, dot = 0;
        for (std::size_t j = 0; j < d; ++j) {
          const double u = pts[b][j] - pts[a][j], v = pts[c][j] - pts[a][j];
          ab2 += u * u;
          ac2 += v * v;
          dot += u * v;
        }
        ws.push_back(1.0 / std::sqrt(ab2 * ac2));
        xs.push_back(dot / (ab2 * ac2));
      }
    double sw = 0, swv = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      sw += ws[i];
      swv += ws[i] * xs[i];
    }
    const double mean = swv / sw;
    double var = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) var += ws[i] * (xs[i] - mean) * (xs[i] - mean);
    out[a] = var / sw;
  }
  return out;
}

std::vector<Point> random_points(std::mt19937_64& rng, std::size_t n, std::size_t d) {
  std::normal_distribution<double> g(0, 1);
  std::vector<Point> p(n, Point(d));
  for (auto& row : p)
    for (auto& x : row) x = g(rng);
  return p;
}

}  // namespace

TEST(Abod, FastMatchesBruteForceAtFullK) {
  std::mt19937_64 rng(42);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 5 + rng() % 26;
    const auto pts = random_points(rng, n, 4);
    const auto fast = abof(pts, n - 1);
    const auto ref = brute_abof(pts);
    for (std::size_t i = 0; i < n; ++i) EXPECT_NEAR(fast[i], ref[i], 1e-9 * std::abs(ref[i]));
  }
}

TEST(Abod, InvariantUnderTranslationAndRotation) {
  std::mt19937_64 rng(5);
  const auto pts = random_points(rng, 20, 4);
  const auto base = abof(pts, 19);
  auto moved = pts;
  const double c = std::cos(0.7), s = std::sin(0.7);
  for (auto& p : moved) {
    const double x = p[0], y = p[1];
    p[0] = c * x - s * y + 100.0;
    p[1] = s * x + c * y - 40.0;
    p[3] += 7.0;
  }
  const auto got = abof(moved, 19);
  for (std::size_t i = 0; i < pts.size(); ++i) EXPECT_NEAR(got[i], base[i], 1e-9 * base[i]);
}

TEST(Abod, FarOutlierHasMinimumScore) {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    std::mt19937_64 rng(seed);
    auto pts = random_points(rng, 20, 4);
    pts.push_back({25, -25, 25, 25});
    const auto sc = abof(pts, 20);
    EXPECT_EQ(std::min_element(sc.begin(), sc.end()) - sc.begin(), 20) << seed;
  }
}

TEST(Abod, PreconditionsThrow) {
  std::vector<Point> two{{0, 0}, {1, 1}};
  EXPECT_THROW(abof(two, 2), InputError);
  std::vector<Point> three{{0, 0}, {1, 1}, {2, 0}};
  EXPECT_THROW(abof(three, 1), InputError);
  std::vector<Point> same{{0, 0}, {0, 0}, {0, 0}, {1, 1}};
  EXPECT_THROW(abof(same, 3), InputError);
  EXPECT_EQ(effective_k(5, 10), 4u);
}

TEST(Abod, NormalizeZeroVariance) {
  std::vector<Point> rows{{1, 5}, {3, 5}};
  const auto z = normalize(rows);
  EXPECT_DOUBLE_EQ(z[0][0], -1.0);
  EXPECT_DOUBLE_EQ(z[1][0], 1.0);
  EXPECT_DOUBLE_EQ(z[0][1], 0.0);
}

TEST(Abod, FlagOnlyCurrentCohortWithTieBreak) {
  std::vector<OutlierScore> s{{"b", 0.1, Cohort::current},
                              {"a", 0.1, Cohort::current},
                              {"base", 0.0, Cohort::week_minus_1},
                              {"c", 5.0, Cohort::current}};
  for (int i = 0; i < 7; ++i) s.push_back({"z" + std::to_string(i), 9.0, Cohort::current});
  const auto f = flag_outliers(s, 0.1);  // floor(0.1 * 10) = 1
  int n = 0;
  for (const auto& x : f) {
    if (x.flagged) {
      EXPECT_EQ(x.journey_id, "a");
      ++n;
    }
  }
  EXPECT_EQ(n, 1);
}

TEST(Features, StoppedTimeAndSpeeds) {
  const auto j = testing_util::planar_journey("f", {{0, 0, 0, 10}, {3, 30, 0, 0}, {13, 30, 0, 10}, {16, 60, 0, 10}});
  const auto v = featurize(j);
  EXPECT_DOUBLE_EQ(v.stopped_time, 10.0);
  EXPECT_DOUBLE_EQ(v.avg_speed, 7.5);
  EXPECT_NEAR(v.speed_std, std::sqrt(18.75), 1e-12);
  EXPECT_DOUBLE_EQ(v.travel_time, 16.0);
}

TEST(Atspm, DeviationScoresAndMissingBaseline) {
  ingest::PhaseVolumeTable cur, b1, b2;
  cur.counts = {{{2, 0}, 50}, {{4, 0}, 100}, {{6, 0}, 10}};
  b1.counts = {{{2, 0}, 100}, {{4, 0}, 100}};
  b2.counts = {{{2, 0}, 100}, {{4, 0}, 80}};
  std::vector<ingest::PhaseVolumeTable> bases{b1, b2};
  const auto cmp = atspm_interruption("I1", cur, bases, 0.4);
  ASSERT_EQ(cmp.deviations.size(), 2u);
  EXPECT_DOUBLE_EQ(cmp.deviations[0].score, -0.5);
  EXPECT_TRUE(cmp.deviations[0].flagged);
  EXPECT_NEAR(cmp.deviations[1].score, 10.0 / 90.0, 1e-12);
  EXPECT_FALSE(cmp.deviations[1].flagged);
  ASSERT_EQ(cmp.no_baseline.size(), 1u);
  EXPECT_EQ(cmp.no_baseline[0].phase, 6);
}
