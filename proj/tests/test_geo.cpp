#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "testing.hpp"
#include "trafficlens/error.hpp"
#include "trafficlens/geo.hpp"

using namespace trafficlens;
using namespace trafficlens::geo;

namespace {

double segment_distance(const PlanarPoint& p, const PlanarPoint& a, const PlanarPoint& b) {
  const double dx = b.x - a.x, dy = b.y - a.y;
  const double len2 = dx * dx + dy * dy;
  double t = len2 > 0 ? ((p.x - a.x) * dx + (p.y - a.y) * dy) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  return std::hypot(p.x - (a.x + t * dx), p.y - (a.y + t * dy));
}

double polyline_distance(const PlanarPoint& p, const Polyline& l) {
  double d = INFINITY;
  for (std::size_t i = 0; i + 1 < l.vertices.size(); ++i) d = std::min(d, segment_distance(p, l.vertices[i], l.vertices[i + 1]));
  return d;
}

// Horizontal ray crossing count over every ring.
bool scanline_inside(const PlanarPoint& p, const Polygon& poly) {
  int crossings = 0;
  auto ring = [&](const Ring& r) {
    for (std::size_t i = 0, j = r.size() - 1; i < r.size(); j = i++) {
      const auto& a = r[i];
      const auto& b = r[j];
      if ((a.y > p.y) != (b.y > p.y) && p.x < (b.x - a.x) * (p.y - a.y) / (b.y - a.y) + a.x) ++crossings;
    }
  };
  ring(poly.exterior);
  for (const auto& h : poly.holes) ring(h);
  return crossings % 2 == 1;
}

double ring_distance(const PlanarPoint& p, const Ring& r) {
  double d = INFINITY;
  for (std::size_t i = 0, j = r.size() - 1; i < r.size(); j = i++) d = std::min(d, segment_distance(p, r[j], r[i]));
  return d;
}

double boundary_distance(const PlanarPoint& p, const Polygon& poly) {
  double d = ring_distance(p, poly.exterior);
  for (const auto& h : poly.holes) d = std::min(d, ring_distance(p, h));
  return d;
}

Ring star(std::mt19937_64& rng, PlanarPoint c, double r0, int n) {
  std::uniform_real_distribution<double> u(0.5, 1.0);
  Ring r;
  for (int i = 0; i < n; ++i) {
    const double a = 2 * std::numbers::pi * i / n;
    const double rr = r0 * u(rng);
    r.push_back({c.x + rr * std::cos(a), c.y + rr * std::sin(a)});
  }
  return r;
}

}  // namespace

TEST(Geo, ProjectionRoundTrip) {
  LocalProjection proj({-81.0, 29.0});
  const GeoPoint g{-80.99, 29.01};
  const auto xy = proj.project(g);
  const auto back = proj.unproject(xy);
  EXPECT_NEAR(back.lon, g.lon, 1e-12);
  EXPECT_NEAR(back.lat, g.lat, 1e-12);
  // one degree of latitude on a 6371 km sphere
  EXPECT_NEAR(proj.project({-81.0, 30.0}).y, kEarthRadius * std::numbers::pi / 180.0, 1e-6);
}

TEST(Geo, AreaAndOrientation) {
  Polygon sq{{{0, 0}, {0, 10}, {10, 10}, {10, 0}}, {}};
  EXPECT_LT(signed_area(sq.exterior), 0);
  auto n = normalized(sq);
  EXPECT_NEAR(signed_area(n.exterior), 100.0, 1e-12);
  n.holes.push_back({{2, 2}, {4, 2}, {4, 4}, {2, 4}});
  n = normalized(n);
  EXPECT_LT(signed_area(n.holes[0]), 0);
  EXPECT_NEAR(area(n), 96.0, 1e-12);
}

TEST(Geo, ValidateRejectsDegenerate) {
  EXPECT_THROW(validate(Polygon{{{0, 0}, {1, 0}}, {}}), InputError);
  EXPECT_THROW(validate(Polygon{{{0, 0}, {1, 1}, {2, 2}}, {}}), InputError);
  EXPECT_THROW(validate(Polygon{{{0, 0}, {2, 2}, {2, 0}, {0, 2}}, {}}), InputError);  // bow tie
  EXPECT_NO_THROW(validate(buffer_circle({0, 0}, 10)));
}

TEST(Geo, CircleBufferWithinChordBand) {
  const auto c = buffer_circle({5, -3}, 100.0);
  EXPECT_EQ(c.exterior.size(), static_cast<std::size_t>(kCircleSegments));
  const double expected = 0.5 * kCircleSegments * 100.0 * 100.0 * std::sin(2 * std::numbers::pi / kCircleSegments);
  EXPECT_NEAR(area(c), expected, 1e-6);
}

TEST(Geo, BufferAgreesWithDistanceOracle) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-400, 400);
  for (int shape = 0; shape < 5; ++shape) {
    Polyline line;
    for (int i = 0; i < 2 + shape; ++i) line.vertices.push_back({u(rng) * 0.5, u(rng) * 0.5});
    const double w = 20.0 + 10.0 * shape;
    const auto poly = buffer_polyline(line, w);
    int checked = 0;
    for (int k = 0; k < 1000; ++k) {
      const PlanarPoint p{u(rng), u(rng)};
      const double d = polyline_distance(p, line);
      if (d <= w * 0.998) EXPECT_TRUE(point_in_polygon(p, poly)) << d;
      if (d >= w * 1.002) EXPECT_FALSE(point_in_polygon(p, poly)) << d;
      checked += d <= w * 0.998 || d >= w * 1.002;
    }
    EXPECT_GT(checked, 950);
  }
}

TEST(Geo, PointInPolygonMatchesScanline) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-120, 120);
  for (int shape = 0; shape < 5; ++shape) {
    Polygon poly = normalized(Polygon{star(rng, {0, 0}, 100, 12 + shape), {star(rng, {0, 0}, 30, 7)}});
    for (int k = 0; k < 1000; ++k) {
      const PlanarPoint p{u(rng), u(rng)};
      if (boundary_distance(p, poly) < 1e-6) continue;
      EXPECT_EQ(point_in_polygon(p, poly), scanline_inside(p, poly));
    }
  }
}

TEST(Geo, PointOnEdgeCountsInside) {
  Polygon sq{{{0, 0}, {10, 0}, {10, 10}, {0, 10}}, {}};
  EXPECT_TRUE(point_in_polygon({5, 0}, sq));
  EXPECT_TRUE(point_in_polygon({10, 10}, sq));
  EXPECT_FALSE(point_in_polygon({10.001, 5}, sq));
  EXPECT_NEAR(distance_to_boundary({5, 3}, sq), 3.0, 1e-12);
}

TEST(Geo, ClipDifferenceMatchesOracle) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-300, 300);
  Polyline road{{{-300, 0}, {300, 0}}};
  const auto strip = buffer_polyline(road, 35);
  std::vector<Polygon> discs{buffer_circle({-100, 0}, 60), buffer_circle({150, 10}, 50)};
  const auto pieces = clip_difference(strip, discs);
  ASSERT_EQ(pieces.size(), 3u);
  for (int k = 0; k < 1000; ++k) {
    const PlanarPoint p{u(rng), u(rng) * 0.2};
    bool near = boundary_distance(p, strip) < 0.05;
    for (const auto& d : discs) near = near || boundary_distance(p, d) < 0.05;
    if (near) continue;
    bool expect = scanline_inside(p, strip);
    for (const auto& d : discs) expect = expect && !scanline_inside(p, d);
    bool got = false;
    for (const auto& piece : pieces) got = got || point_in_polygon(p, piece);
    EXPECT_EQ(got, expect) << p.x << "," << p.y;
  }
  double a = area(pieces);
  double expect_a = area(strip);
  for (const auto& d : discs) expect_a -= intersection_area(strip, d);
  EXPECT_NEAR(a, expect_a, 1e-6 * area(strip));
}

TEST(Geo, UnionOfOverlappingSquares) {
  std::vector<Polygon> polys{Polygon{{{0, 0}, {10, 0}, {10, 10}, {0, 10}}, {}},
                             Polygon{{{5, 5}, {15, 5}, {15, 15}, {5, 15}}, {}}};
  const auto u = union_all(polys);
  ASSERT_EQ(u.size(), 1u);
  EXPECT_NEAR(area(u), 175.0, 1e-9);
}

TEST(Geo, ClipJourneyInterpolatesCrossings) {
  const auto disc = Polygon{{{-50, -50}, {50, -50}, {50, 50}, {-50, 50}}, {}};
  auto j = testing_util::planar_journey("a", {{0, -100, 0, 10}, {10, 0, 0, 10}, {20, 100, 0, 10}});
  const auto parts = clip_journey(j, disc);
  ASSERT_EQ(parts.size(), 1u);
  const auto& f = parts[0];
  ASSERT_EQ(f.samples.size(), 3u);
  EXPECT_NEAR(f.samples.front().t, 5.0, 1e-12);
  EXPECT_NEAR(f.samples.front().xy.x, -50.0, 1e-12);
  EXPECT_NEAR(f.samples.back().t, 15.0, 1e-12);
  EXPECT_NEAR(f.path_length(), 100.0, 1e-9);
}

TEST(Geo, ClipJourneyReentrySplitsParts) {
  const auto box = Polygon{{{0, -10}, {100, -10}, {100, 10}, {0, 10}}, {}};
  auto j = testing_util::planar_journey(
      "b", {{0, 10, 0, 1}, {1, 50, 0, 1}, {2, 50, 50, 1}, {3, 60, 0, 1}, {4, 90, 0, 1}});
  const auto parts = clip_journey(j, box);
  ASSERT_EQ(parts.size(), 2u);
  EXPECT_LT(parts[0].samples.back().t, parts[1].samples.front().t);
}

TEST(Geo, Bearing) {
  EXPECT_NEAR(bearing({0, 0}, {0, 1}), 0.0, 1e-12);
  EXPECT_NEAR(bearing({0, 0}, {1, 0}), 90.0, 1e-12);
  EXPECT_NEAR(bearing({0, 0}, {0, -1}), 180.0, 1e-12);
  EXPECT_NEAR(bearing({0, 0}, {-1, 0}), 270.0, 1e-12);
}
