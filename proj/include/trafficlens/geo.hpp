#pragma once

// Planar geometry kernel. All distances are meters in a local tangent plane.
// Rings are stored open: the closing edge from back() to front() is implicit.

#include <span>
#include <vector>

#include "trafficlens/trajectory.hpp"

namespace trafficlens::geo {

inline constexpr double kEarthRadius = 6371000.0;
inline constexpr int kCircleSegments = 64;

using Ring = std::vector<PlanarPoint>;

struct Polyline {
  std::vector<PlanarPoint> vertices;
};

struct Polygon {
  Ring exterior;            // counter-clockwise
  std::vector<Ring> holes;  // clockwise
};

struct BoundingBox {
  double min_x, min_y, max_x, max_y;

  bool contains(const PlanarPoint& p) const {
    return p.x >= min_x && p.x <= max_x && p.y >= min_y && p.y <= max_y;
  }
};

/// Equirectangular tangent-plane projection around a fixed origin.
class LocalProjection {
 public:
  explicit LocalProjection(GeoPoint origin);

  const GeoPoint& origin() const { return origin_; }
  PlanarPoint project(const GeoPoint& p) const;
  GeoPoint unproject(const PlanarPoint& p) const;

 private:
  GeoPoint origin_;
  double cos_lat0_;
};

std::vector<PlanarPoint> project_to_local(const GeoPoint& origin, std::span<const GeoPoint> points);

double distance(const PlanarPoint& a, const PlanarPoint& b);

/// Signed area of a ring (positive when counter-clockwise).
double signed_area(const Ring& ring);

/// Exterior area minus hole areas.
double area(const Polygon& poly);
double area(std::span<const Polygon> polys);

PlanarPoint centroid(const Polygon& poly);
BoundingBox bounds(const Polygon& poly);

/// Throws InputError when the rings are too short, self-intersecting, or of zero area.
void validate(const Polygon& poly);

/// Reorients rings to exterior counter-clockwise / holes clockwise.
Polygon normalized(Polygon poly);

Polygon buffer_circle(const PlanarPoint& center, double radius, int segments = kCircleSegments);

/// Minkowski sum of the polyline with a disc of radius `half_width`,
/// using round joins and caps approximated by 64-gons.
Polygon buffer_polyline(const Polyline& line, double half_width);

/// subject minus the union of clips.
std::vector<Polygon> clip_difference(const Polygon& subject, std::span<const Polygon> clips);

/// Union of an arbitrary polygon set into disjoint pieces.
std::vector<Polygon> union_all(std::span<const Polygon> polys);

double intersection_area(const Polygon& a, const Polygon& b);

/// Even-odd rule over all rings. Points on any ring edge count as inside.
bool point_in_polygon(const PlanarPoint& p, const Polygon& poly);

/// Distance from p to the nearest edge of any ring of poly.
double distance_to_boundary(const PlanarPoint& p, const Polygon& poly);

/// Maximal sub-journeys lying inside poly. Boundary crossings between samples
/// become synthetic samples with linearly interpolated time, position and speed.
/// Requires projected (xy-filled) journeys.
std::vector<Journey> clip_journey(const Journey& journey, const Polygon& poly);

/// Compass bearing in degrees [0, 360) of the vector from `from` to `to`
/// (0 = north, 90 = east).
double bearing(const PlanarPoint& from, const PlanarPoint& to);

}  // namespace trafficlens::geo

namespace trafficlens {
using geo::LocalProjection;
}
