#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace trafficlens {

/// WGS84 coordinate in degrees.
struct GeoPoint {
  double lon = 0.0;
  double lat = 0.0;

  friend bool operator==(const GeoPoint&, const GeoPoint&) = default;
};

/// Meters east/north of a local projection origin.
struct PlanarPoint {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const PlanarPoint&, const PlanarPoint&) = default;
};

enum class Ignition { on, off, unknown };

std::string_view to_string(Ignition ig);
std::optional<Ignition> parse_ignition(std::string_view s);

struct TrajectorySample {
  double t = 0.0;  // seconds since epoch
  GeoPoint pos;
  PlanarPoint xy;  // filled by Journey::project
  std::optional<double> speed;  // m/s
  Ignition ignition = Ignition::unknown;

  friend bool operator==(const TrajectorySample&, const TrajectorySample&) = default;
};

namespace geo {
class LocalProjection;
}

/// One vehicle trip, or a clipped fragment of one (part > 0).
struct Journey {
  std::string id;
  std::vector<TrajectorySample> samples;
  int part = 0;
  std::string mask_id;  // set on fragments produced by mask clipping

  double t_first() const { return samples.front().t; }
  double t_last() const { return samples.back().t; }
  double duration() const { return samples.size() < 2 ? 0.0 : t_last() - t_first(); }

  /// Planar path length over xy.
  double path_length() const;

  /// True when any inter-sample gap exceeds `max_gap` seconds.
  bool gapped(double max_gap = 30.0) const;

  /// Fills every sample's xy from its geographic position.
  void project(const geo::LocalProjection& proj);

  friend bool operator==(const Journey&, const Journey&) = default;
};

}  // namespace trafficlens
