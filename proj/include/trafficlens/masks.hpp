#pragma once

// Corridor and intersection masks used to clip trajectories to analysis zones.
//
// Intersection masks are discs (64-gons) around intersection centers. Corridor
// masks are buffered road centerlines with every intersection disc removed.
// Approaches are labeled by the compass direction of travel of inbound
// vehicles: NB traffic enters from the south leg.

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "trafficlens/geo.hpp"
#include "trafficlens/geojson.hpp"

namespace trafficlens::masks {

inline constexpr double kDefaultRadius = 125.0;
inline constexpr double kDefaultHalfWidth = 35.0;
inline constexpr double kInnerBoxHalfWidth = 25.0;
inline constexpr double kSliverArea = 10.0;

enum class Direction { NB = 0, SB = 1, EB = 2, WB = 3 };
inline constexpr std::array<Direction, 4> kDirections{Direction::NB, Direction::SB, Direction::EB, Direction::WB};

std::string_view to_string(Direction d);
std::optional<Direction> parse_direction(std::string_view s);
Direction opposite(Direction d);
/// Compass bearing of the direction of travel (NB = 0, EB = 90, ...).
double travel_bearing(Direction d);
/// Nearest cardinal travel direction for a compass bearing.
Direction nearest_direction(double bearing_deg);
/// Smallest absolute difference between two bearings, in [0, 180].
double angle_between(double a_deg, double b_deg);

enum class MaskKind { corridor, intersection };
std::string_view to_string(MaskKind k);

struct ApproachZone {
  Direction direction;
  /// Bearing from the intersection center toward the approach leg's boundary crossing.
  double entry_bearing;
  PlanarPoint entry;  // boundary crossing of the centerline
  PlanarPoint stop_bar;
};

struct Mask {
  std::string id;
  MaskKind kind = MaskKind::corridor;
  std::vector<geo::Polygon> geometry;
  std::optional<std::string> intersection_id;
  std::optional<PlanarPoint> center;
  std::optional<double> radius;
  std::vector<ApproachZone> approaches;

  bool contains(const PlanarPoint& p) const;
  const ApproachZone* approach(Direction d) const;
};

struct MaskSet {
  GeoPoint origin;
  std::vector<Mask> masks;

  geo::LocalProjection projection() const { return geo::LocalProjection(origin); }
  const Mask* find(std::string_view id) const;
  const Mask* find_intersection(std::string_view intersection_id) const;
};

using IntersectionCenter = std::pair<std::string, GeoPoint>;

std::vector<Mask> build_intersection_masks(std::span<const IntersectionCenter> centers,
                                           const geo::LocalProjection& proj, double radius = kDefaultRadius);

std::vector<Mask> build_corridor_masks(std::span<const geo::Polyline> centerlines,
                                       std::span<const Mask> intersection_masks,
                                       double half_width = kDefaultHalfWidth);

/// Returns a copy of `mask` with one approach per distinct inbound direction.
/// Throws InputError when the centerlines cross the mask boundary fewer than twice.
Mask derive_approaches(const Mask& mask, std::span<const geo::Polyline> centerlines);

/// Point on the square inner box (half width 25 m) along `bearing_deg` from center.
PlanarPoint inner_box_point(const PlanarPoint& center, double bearing_deg,
                            double half_width = kInnerBoxHalfWidth);

// ---------------------------------------------------------------------------

struct MaskBuildOptions {
  double half_width = kDefaultHalfWidth;
  double radius = kDefaultRadius;
};

/// Road centerlines and intersection points read from GeoJSON FeatureCollections.
struct MaskInputs {
  std::vector<std::vector<GeoPoint>> roads;
  std::vector<IntersectionCenter> intersections;
};

MaskInputs read_mask_inputs(const std::filesystem::path& roads, const std::filesystem::path& intersections);

/// Full pipeline: projection origin at the input centroid, intersection discs,
/// approaches, then clipped corridor strips.
MaskSet build_mask_set(const MaskInputs& inputs, const MaskBuildOptions& opts = {});

nlohmann::json to_geojson(const MaskSet& set);
MaskSet mask_set_from_geojson(const nlohmann::json& doc);
MaskSet read_mask_set(const std::filesystem::path& path);
void write_mask_set(const std::filesystem::path& path, const MaskSet& set);

}  // namespace trafficlens::masks
