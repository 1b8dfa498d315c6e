#include <gtest/gtest.h>

#include <fstream>

#include "testing.hpp"
#include "trafficlens/ingest.hpp"
#include "trafficlens/analytics.hpp"
#include "trafficlens/report.hpp"
#include "trafficlens/synth.hpp"

using namespace trafficlens;
using namespace trafficlens::analytics;
using testing_util::planar_journey;

namespace {

masks::MaskSet cross_masks() {
  testing_util::TempDir dir("an");
  synth::TrajectoryParams p;
  geojson::write_json(dir / "r.geojson", synth::roads_geojson(p));
  geojson::write_json(dir / "i.geojson", synth::intersections_geojson(p));
  return masks::build_mask_set(masks::read_mask_inputs(dir / "r.geojson", dir / "i.geojson"));
}

}  // namespace

TEST(Analytics, StopRunLastsUntilNextSample) {
  const auto j = planar_journey("s", {{0, 0, 0, 10}, {3, 30, 0, 0.5}, {6, 30, 0, 0.2}, {9, 31, 0, 5}, {12, 50, 0, 10}});
  const auto stops = detect_stops(j);
  ASSERT_EQ(stops.size(), 1u);
  EXPECT_DOUBLE_EQ(stops[0].t_start, 3.0);
  EXPECT_DOUBLE_EQ(stops[0].duration, 6.0);
  EXPECT_EQ(stops[0].location, (PlanarPoint{30, 0}));
}

TEST(Analytics, StopThresholdsAreStrictAndInclusive) {
  // speed exactly at the threshold is moving; duration exactly min_duration counts
  const auto j = planar_journey("s", {{0, 0, 0, 1.0}, {3, 0, 0, 0.9}, {6, 0, 0, 5}, {9, 0, 0, 0.0}});
  const auto stops = detect_stops(j, {1.0, 3.0});
  ASSERT_EQ(stops.size(), 1u);
  EXPECT_DOUBLE_EQ(stops[0].t_start, 3.0);
  EXPECT_TRUE(detect_stops(j, {1.0, 3.1}).empty());
}

TEST(Analytics, ClassifyThroughAndLeft) {
  const auto set = cross_masks();
  const auto& m = *set.find_intersection("I1");
  const auto c = *m.center;
  const auto through = planar_journey("t", {{0, c.x, c.y - 125, 10}, {12.5, c.x, c.y, 10}, {25, c.x, c.y + 125, 10}});
  auto r = classify_movement(through, m);
  ASSERT_TRUE(r.record) << r.reason;
  EXPECT_EQ(r.record->origin, Direction::NB);
  EXPECT_EQ(r.record->dest, Direction::NB);
  EXPECT_DOUBLE_EQ(r.record->travel_time, 25.0);
  const auto left = planar_journey("l", {{0, c.x, c.y - 125, 10}, {12.5, c.x, c.y, 10}, {25, c.x - 125, c.y, 10}});
  r = classify_movement(left, m);
  ASSERT_TRUE(r.record);
  EXPECT_EQ(r.record->dest, Direction::WB);
  const auto inside = planar_journey("i", {{0, c.x, c.y - 50, 10}, {5, c.x, c.y + 125, 10}});
  EXPECT_FALSE(classify_movement(inside, m).record);
}

TEST(Analytics, MatricesOverRecords) {
  std::vector<MovementRecord> rs{{"a", Direction::NB, Direction::NB, 10, 0},
                                 {"b", Direction::NB, Direction::NB, 20, 0},
                                 {"c", Direction::NB, Direction::NB, 60, 0},
                                 {"d", Direction::EB, Direction::SB, 30, 0}};
  const auto od = od_matrix(rs);
  EXPECT_EQ(od[0][0], 3);
  EXPECT_EQ(od[2][1], 1);
  const auto tt = travel_time_matrix(rs);
  EXPECT_DOUBLE_EQ(*tt[0][0], 30.0);
  EXPECT_FALSE(tt[1][1]);
  EXPECT_DOUBLE_EQ(*travel_time_median_matrix(rs)[0][0], 20.0);
}

TEST(Analytics, QueueDistributionSampleSigma) {
  const auto set = cross_masks();
  const auto& m = *set.find_intersection("I1");
  const auto bar = m.approach(Direction::NB)->stop_bar;
  std::vector<StopEvent> stops;
  for (double d : {0.0, 7.5, 15.0})
    stops.push_back({"x", 0, 20, {bar.x, bar.y - d}, Direction::NB});
  stops.push_back({"short", 0, 10, {bar.x, bar.y - 100}, Direction::NB});  // not longer than 10 s
  stops.push_back({"lost", 0, 30, {bar.x, bar.y}, std::nullopt});
  const auto q = queue_distributions(stops, m, 10.0);
  ASSERT_EQ(q.distributions.size(), 1u);
  EXPECT_NEAR(q.distributions[0].mu, 7.5, 1e-9);
  EXPECT_NEAR(q.distributions[0].sigma, 7.5, 1e-9);
  EXPECT_EQ(q.distributions[0].n, 3u);
  EXPECT_EQ(q.excluded, 1u);
}

TEST(Analytics, BrakingNeedsSustainedDeceleration) {
  const double g = 0.47 * kGravity;
  // exactly 0.47 g over exactly 2 s
  const auto hard = planar_journey("h", {{0, 0, 0, 15}, {1, 15, 0, 15}, {3, 30, 0, 15 - 2 * g}, {6, 40, 0, 8}});
  const auto ev = detect_braking(hard);
  ASSERT_EQ(ev.size(), 1u);
  EXPECT_DOUBLE_EQ(ev[0].t_start, 1.0);
  EXPECT_DOUBLE_EQ(ev[0].duration, 2.0);
  // hard but short
  const auto brief = planar_journey("b", {{0, 0, 0, 15}, {1.5, 15, 0, 15 - 1.5 * g}, {4, 30, 0, 15 - 1.5 * g}});
  EXPECT_TRUE(detect_braking(brief).empty());
  // long but gentle
  const auto soft = planar_journey("s", {{0, 0, 0, 15}, {3, 15, 0, 15 - 3 * 0.46 * kGravity}});
  EXPECT_TRUE(detect_braking(soft).empty());
}

TEST(Analytics, AnalyzeEmptyWindowIsEmptyReport) {
  const auto set = cross_masks();
  const auto report = analyze({}, *set.find_intersection("I1"), {0, 3600}, {});
  EXPECT_TRUE(report.empty());
  const auto doc = to_json(report, set.projection());
  EXPECT_TRUE(doc["empty"].get<bool>());
}

TEST(Analytics, BundleIsByteStable) {
  const auto set = cross_masks();
  synth::TrajectoryParams p;
  p.duration = 600;
  auto gen = synth::generate_trajectories(p);
  for (auto& j : gen.journeys) j.project(set.projection());
  const auto frags = ingest::clip_to_masks(gen.journeys, set);
  const auto& m = *set.find_intersection("I1");
  std::vector<Journey> mine;
  for (const auto& f : frags)
    if (f.mask_id == m.id) mine.push_back(f);
  const TimeRange w{p.start, p.start + p.duration};
  testing_util::TempDir a("bundle"), b("bundle");
  write_bundle(a.path(), analyze(mine, m, w, {}), set.projection(), {{"k", 1}}, true);
  write_bundle(b.path(), analyze(mine, m, w, {}), set.projection(), {{"k", 1}}, true);
  for (const auto* f : {"report.json", "od.csv", "tt.csv", "queues.csv", "stops.csv", "braking.csv", "stops.svg"}) {
    std::ifstream fa(a / f), fb(b / f);
    const std::string sa((std::istreambuf_iterator<char>(fa)), {}), sb((std::istreambuf_iterator<char>(fb)), {});
    EXPECT_FALSE(sa.empty()) << f;
    EXPECT_EQ(sa, sb) << f;
  }
}
