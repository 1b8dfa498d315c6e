#include "trafficlens/geo.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <boost/geometry.hpp>
#include <boost/geometry/geometries/linestring.hpp>
#include <boost/geometry/geometries/multi_polygon.hpp>
#include <boost/geometry/geometries/point_xy.hpp>
#include <boost/geometry/geometries/polygon.hpp>

#include "trafficlens/error.hpp"

namespace trafficlens::geo {

namespace bg = boost::geometry;

namespace {

using BPoint = bg::model::d2::point_xy<double>;
using BPolygon = bg::model::polygon<BPoint, false, true>;
using BMulti = bg::model::multi_polygon<BPolygon>;
using BLine = bg::model::linestring<BPoint>;

constexpr double kDeg = std::numbers::pi / 180.0;
constexpr double kBoundaryEps = 1e-9;

void require_finite(double v, const char* what) {
  if (!std::isfinite(v)) throw InputError(std::string("non-finite coordinate: ") + what);
}

template <class BRing>
void ring_to_boost(const Ring& r, BRing& out) {
  for (const auto& p : r) out.push_back(BPoint(p.x, p.y));
  if (!r.empty()) out.push_back(BPoint(r.front().x, r.front().y));
}

BPolygon to_boost(const Polygon& poly) {
  BPolygon out;
  ring_to_boost(poly.exterior, out.outer());
  for (const auto& h : poly.holes) {
    out.inners().emplace_back();
    ring_to_boost(h, out.inners().back());
  }
  bg::correct(out);
  return out;
}

template <class BRing>
Ring ring_from_boost(const BRing& r) {
  Ring out;
  out.reserve(r.size());
  for (const auto& p : r) out.push_back({p.x(), p.y()});
  if (out.size() > 1 && out.front() == out.back()) out.pop_back();
  return out;
}

Polygon from_boost(const BPolygon& poly) {
  Polygon out;
  out.exterior = ring_from_boost(poly.outer());
  for (const auto& h : poly.inners()) out.holes.push_back(ring_from_boost(h));
  return normalized(std::move(out));
}

std::vector<Polygon> from_boost(const BMulti& multi, double min_area = 1e-9) {
  std::vector<Polygon> out;
  for (const auto& p : multi) {
    if (std::abs(bg::area(p)) <= min_area) continue;
    out.push_back(from_boost(p));
  }
  return out;
}

double cross(const PlanarPoint& o, const PlanarPoint& a, const PlanarPoint& b) {
  return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

double point_segment_distance(const PlanarPoint& p, const PlanarPoint& a, const PlanarPoint& b) {
  const double dx = b.x - a.x, dy = b.y - a.y;
  const double len2 = dx * dx + dy * dy;
  double s = len2 > 0 ? ((p.x - a.x) * dx + (p.y - a.y) * dy) / len2 : 0.0;
  s = std::clamp(s, 0.0, 1.0);
  return std::hypot(p.x - (a.x + s * dx), p.y - (a.y + s * dy));
}

bool segments_properly_intersect(const PlanarPoint& a, const PlanarPoint& b, const PlanarPoint& c,
                                 const PlanarPoint& d) {
  const double d1 = cross(c, d, a), d2 = cross(c, d, b);
  const double d3 = cross(a, b, c), d4 = cross(a, b, d);
  return ((d1 > 0 && d2 < 0) || (d1 < 0 && d2 > 0)) && ((d3 > 0 && d4 < 0) || (d3 < 0 && d4 > 0));
}

void validate_ring(const Ring& ring, const char* which) {
  if (ring.size() < 3) throw InputError(std::string(which) + " ring has fewer than 3 vertices");
  for (const auto& p : ring) {
    require_finite(p.x, "x");
    require_finite(p.y, "y");
  }
  if (std::abs(signed_area(ring)) <= 0.0) throw InputError(std::string(which) + " ring has zero area");
  const std::size_t n = ring.size();
  for (std::size_t i = 0; i < n; ++i) {
    const auto& a = ring[i];
    const auto& b = ring[(i + 1) % n];
    for (std::size_t j = i + 2; j < n; ++j) {
      if (i == 0 && j == n - 1) continue;  // adjacent through the closing edge
      if (segments_properly_intersect(a, b, ring[j], ring[(j + 1) % n]))
        throw InputError(std::string(which) + " ring is self-intersecting");
    }
  }
}

template <class F>
void for_each_edge(const Polygon& poly, F&& f) {
  auto visit = [&](const Ring& r) {
    const std::size_t n = r.size();
    for (std::size_t i = 0; i < n; ++i) f(r[i], r[(i + 1) % n]);
  };
  visit(poly.exterior);
  for (const auto& h : poly.holes) visit(h);
}

TrajectorySample lerp(const TrajectorySample& a, const TrajectorySample& b, double s) {
  if (s <= 0.0) return a;
  if (s >= 1.0) return b;
  TrajectorySample out;
  out.t = a.t + s * (b.t - a.t);
  out.pos = {a.pos.lon + s * (b.pos.lon - a.pos.lon), a.pos.lat + s * (b.pos.lat - a.pos.lat)};
  out.xy = {a.xy.x + s * (b.xy.x - a.xy.x), a.xy.y + s * (b.xy.y - a.xy.y)};
  if (a.speed && b.speed) out.speed = *a.speed + s * (*b.speed - *a.speed);
  out.ignition = a.ignition;
  return out;
}

// Parameters in (0, 1) along a->b where the segment meets a polygon edge.
std::vector<double> crossing_params(const PlanarPoint& a, const PlanarPoint& b, const Polygon& poly) {
  std::vector<double> out;
  const double rx = b.x - a.x, ry = b.y - a.y;
  const double len2 = rx * rx + ry * ry;
  if (len2 == 0.0) return out;
  for_each_edge(poly, [&](const PlanarPoint& c, const PlanarPoint& d) {
    const double sx = d.x - c.x, sy = d.y - c.y;
    const double denom = rx * sy - ry * sx;
    const double qx = c.x - a.x, qy = c.y - a.y;
    if (std::abs(denom) < 1e-14 * std::sqrt(len2 * (sx * sx + sy * sy))) {
      // parallel; collinear overlap contributes its endpoints
      if (std::abs(qx * ry - qy * rx) > 1e-9 * std::sqrt(len2)) return;
      for (const auto& e : {c, d}) {
        const double s = ((e.x - a.x) * rx + (e.y - a.y) * ry) / len2;
        if (s > 0.0 && s < 1.0) out.push_back(s);
      }
      return;
    }
    const double s = (qx * sy - qy * sx) / denom;
    const double u = (qx * ry - qy * rx) / denom;
    if (u >= -1e-12 && u <= 1.0 + 1e-12 && s > 0.0 && s < 1.0) out.push_back(s);
  });
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------

LocalProjection::LocalProjection(GeoPoint origin) : origin_(origin) {
  require_finite(origin.lon, "origin lon");
  require_finite(origin.lat, "origin lat");
  if (origin.lat <= -90.0 || origin.lat >= 90.0)
    throw InputError("projection origin latitude must lie strictly inside (-90, 90)");
  cos_lat0_ = std::cos(origin.lat * kDeg);
}

PlanarPoint LocalProjection::project(const GeoPoint& p) const {
  require_finite(p.lon, "lon");
  require_finite(p.lat, "lat");
  return {kEarthRadius * (p.lon - origin_.lon) * kDeg * cos_lat0_,
          kEarthRadius * (p.lat - origin_.lat) * kDeg};
}

GeoPoint LocalProjection::unproject(const PlanarPoint& p) const {
  require_finite(p.x, "x");
  require_finite(p.y, "y");
  return {origin_.lon + p.x / (kEarthRadius * kDeg * cos_lat0_), origin_.lat + p.y / (kEarthRadius * kDeg)};
}

std::vector<PlanarPoint> project_to_local(const GeoPoint& origin, std::span<const GeoPoint> points) {
  const LocalProjection proj(origin);
  std::vector<PlanarPoint> out;
  out.reserve(points.size());
  for (const auto& p : points) out.push_back(proj.project(p));
  return out;
}

double distance(const PlanarPoint& a, const PlanarPoint& b) { return std::hypot(a.x - b.x, a.y - b.y); }

double signed_area(const Ring& ring) {
  const std::size_t n = ring.size();
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& a = ring[i];
    const auto& b = ring[(i + 1) % n];
    sum += a.x * b.y - b.x * a.y;
  }
  return 0.5 * sum;
}

double area(const Polygon& poly) {
  double a = std::abs(signed_area(poly.exterior));
  for (const auto& h : poly.holes) a -= std::abs(signed_area(h));
  return a;
}

double area(std::span<const Polygon> polys) {
  double a = 0.0;
  for (const auto& p : polys) a += area(p);
  return a;
}

PlanarPoint centroid(const Polygon& poly) {
  double cx = 0.0, cy = 0.0, total = 0.0;
  auto accumulate = [&](const Ring& r, double sign) {
    const std::size_t n = r.size();
    // shift to the first vertex for numerical stability
    const PlanarPoint o = r.front();
    for (std::size_t i = 0; i < n; ++i) {
      const double ax = r[i].x - o.x, ay = r[i].y - o.y;
      const double bx = r[(i + 1) % n].x - o.x, by = r[(i + 1) % n].y - o.y;
      const double c = (ax * by - bx * ay);
      const double w = sign * std::copysign(1.0, signed_area(r));
      cx += w * (ax + bx + 3.0 * o.x) * c;
      cy += w * (ay + by + 3.0 * o.y) * c;
      total += w * 3.0 * c;
    }
  };
  accumulate(poly.exterior, 1.0);
  for (const auto& h : poly.holes) accumulate(h, -1.0);
  return {cx / total, cy / total};
}

BoundingBox bounds(const Polygon& poly) {
  BoundingBox b{INFINITY, INFINITY, -INFINITY, -INFINITY};
  for (const auto& p : poly.exterior) {
    b.min_x = std::min(b.min_x, p.x);
    b.min_y = std::min(b.min_y, p.y);
    b.max_x = std::max(b.max_x, p.x);
    b.max_y = std::max(b.max_y, p.y);
  }
  return b;
}

void validate(const Polygon& poly) {
  validate_ring(poly.exterior, "exterior");
  for (const auto& h : poly.holes) validate_ring(h, "hole");
  if (area(poly) <= 0.0) throw InputError("polygon has non-positive area");
}

Polygon normalized(Polygon poly) {
  if (signed_area(poly.exterior) < 0) std::reverse(poly.exterior.begin(), poly.exterior.end());
  for (auto& h : poly.holes)
    if (signed_area(h) > 0) std::reverse(h.begin(), h.end());
  return poly;
}

Polygon buffer_circle(const PlanarPoint& center, double radius, int segments) {
  require_finite(center.x, "center x");
  require_finite(center.y, "center y");
  if (!(radius > 0.0) || !std::isfinite(radius)) throw InputError("buffer radius must be positive");
  if (segments < 3) throw InputError("circle needs at least 3 segments");
  Polygon out;
  out.exterior.reserve(static_cast<std::size_t>(segments));
  for (int i = 0; i < segments; ++i) {
    const double a = 2.0 * std::numbers::pi * i / segments;
    out.exterior.push_back({center.x + radius * std::cos(a), center.y + radius * std::sin(a)});
  }
  return out;
}

Polygon buffer_polyline(const Polyline& line, double half_width) {
  if (!(half_width > 0.0) || !std::isfinite(half_width)) throw InputError("buffer half width must be positive");
  BLine ls;
  const PlanarPoint* prev = nullptr;
  for (const auto& v : line.vertices) {
    require_finite(v.x, "x");
    require_finite(v.y, "y");
    if (prev && distance(*prev, v) <= 1e-9) continue;
    ls.push_back(BPoint(v.x, v.y));
    prev = &v;
  }
  if (ls.size() < 2) throw InputError("degenerate polyline: all vertices coincide");

  bg::strategy::buffer::distance_symmetric<double> dist(half_width);
  bg::strategy::buffer::join_round join(kCircleSegments);
  bg::strategy::buffer::end_round end(kCircleSegments);
  bg::strategy::buffer::point_circle circle(kCircleSegments);
  bg::strategy::buffer::side_straight side;
  BMulti out;
  bg::buffer(ls, out, dist, side, join, end, circle);
  auto polys = from_boost(out);
  if (polys.empty()) throw InputError("polyline buffer is empty");
  return *std::max_element(polys.begin(), polys.end(),
                           [](const Polygon& a, const Polygon& b) { return area(a) < area(b); });
}

std::vector<Polygon> clip_difference(const Polygon& subject, std::span<const Polygon> clips) {
  validate(subject);
  BMulti result;
  result.push_back(to_boost(subject));
  for (const auto& c : clips) {
    validate(c);
    const BPolygon bc = to_boost(c);
    if (!bg::intersects(result, bc)) continue;
    BMulti next;
    bg::difference(result, bc, next);
    result = std::move(next);
  }
  return from_boost(result);
}

std::vector<Polygon> union_all(std::span<const Polygon> polys) {
  BMulti acc;
  for (const auto& p : polys) {
    validate(p);
    BMulti next;
    bg::union_(acc, to_boost(p), next);
    acc = std::move(next);
  }
  return from_boost(acc);
}

double intersection_area(const Polygon& a, const Polygon& b) {
  BMulti out;
  bg::intersection(to_boost(a), to_boost(b), out);
  return bg::area(out);
}

bool point_in_polygon(const PlanarPoint& p, const Polygon& poly) {
  bool on_edge = false;
  bool inside = false;
  for_each_edge(poly, [&](const PlanarPoint& a, const PlanarPoint& b) {
    if (on_edge) return;
    if (point_segment_distance(p, a, b) <= kBoundaryEps) {
      on_edge = true;
      return;
    }
    if ((a.y > p.y) != (b.y > p.y)) {
      const double x = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
      if (p.x < x) inside = !inside;
    }
  });
  return on_edge || inside;
}

double distance_to_boundary(const PlanarPoint& p, const Polygon& poly) {
  double best = INFINITY;
  for_each_edge(poly, [&](const PlanarPoint& a, const PlanarPoint& b) {
    best = std::min(best, point_segment_distance(p, a, b));
  });
  return best;
}

std::vector<Journey> clip_journey(const Journey& journey, const Polygon& poly) {
  std::vector<Journey> parts;
  Journey current;
  auto close = [&] {
    if (current.samples.size() >= 2) {
      current.id = journey.id;
      current.part = static_cast<int>(parts.size()) + 1;
      parts.push_back(std::move(current));
    }
    current = Journey{};
  };
  auto append = [&](const TrajectorySample& s) {
    if (!current.samples.empty() && s.t <= current.samples.back().t) return;
    current.samples.push_back(s);
  };

  const auto& samples = journey.samples;
  if (samples.size() == 1) {
    // a single sample cannot form a sub-journey
    return parts;
  }
  const BoundingBox box = bounds(poly);
  for (std::size_t i = 0; i + 1 < samples.size(); ++i) {
    const auto& a = samples[i];
    const auto& b = samples[i + 1];
    // whole segment outside the bounding box: nothing to clip
    if ((a.xy.x < box.min_x && b.xy.x < box.min_x) || (a.xy.x > box.max_x && b.xy.x > box.max_x) ||
        (a.xy.y < box.min_y && b.xy.y < box.min_y) || (a.xy.y > box.max_y && b.xy.y > box.max_y)) {
      close();
      continue;
    }
    std::vector<double> params = crossing_params(a.xy, b.xy, poly);
    params.push_back(0.0);
    params.push_back(1.0);
    std::sort(params.begin(), params.end());
    params.erase(std::unique(params.begin(), params.end(), [](double x, double y) { return y - x < 1e-12; }),
                 params.end());
    if (params.back() < 1.0) params.back() = 1.0;

    for (std::size_t k = 0; k + 1 < params.size(); ++k) {
      const double s0 = params[k], s1 = params[k + 1];
      const double sm = 0.5 * (s0 + s1);
      const PlanarPoint mid{a.xy.x + sm * (b.xy.x - a.xy.x), a.xy.y + sm * (b.xy.y - a.xy.y)};
      if (point_in_polygon(mid, poly)) {
        if (current.samples.empty()) append(lerp(a, b, s0));
        append(lerp(a, b, s1));
      } else {
        close();
      }
    }
  }
  close();
  return parts;
}

double bearing(const PlanarPoint& from, const PlanarPoint& to) {
  double deg = std::atan2(to.x - from.x, to.y - from.y) / kDeg;
  if (deg < 0) deg += 360.0;
  if (deg >= 360.0) deg -= 360.0;
  return deg;
}

}  // namespace trafficlens::geo
