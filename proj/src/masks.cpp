#include "trafficlens/masks.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>

#include "trafficlens/error.hpp"

namespace trafficlens::masks {

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;
// Crossings whose entry bearings are this close are one approach (divided roads).
constexpr double kApproachMergeDeg = 20.0;

struct Crossing {
  PlanarPoint point;
  double bearing;
};

std::vector<Crossing> boundary_crossings(const geo::Polygon& disc, const PlanarPoint& center,
                                         std::span<const geo::Polyline> lines) {
  std::vector<Crossing> out;
  const auto& ring = disc.exterior;
  const std::size_t n = ring.size();
  for (const auto& line : lines) {
    const auto& v = line.vertices;
    for (std::size_t i = 0; i + 1 < v.size(); ++i) {
      const PlanarPoint a = v[i], b = v[i + 1];
      const double rx = b.x - a.x, ry = b.y - a.y;
      for (std::size_t j = 0; j < n; ++j) {
        const PlanarPoint c = ring[j], d = ring[(j + 1) % n];
        const double sx = d.x - c.x, sy = d.y - c.y;
        const double denom = rx * sy - ry * sx;
        if (std::abs(denom) < 1e-12) continue;
        const double qx = c.x - a.x, qy = c.y - a.y;
        const double s = (qx * sy - qy * sx) / denom;
        const double u = (qx * ry - qy * rx) / denom;
        // half-open in both parameters so shared vertices are counted once
        if (s >= 0.0 && s < 1.0 && u >= 0.0 && u < 1.0) {
          const PlanarPoint p{a.x + s * rx, a.y + s * ry};
          out.push_back({p, geo::bearing(center, p)});
        }
      }
    }
  }
  return out;
}

double circular_mean(const std::vector<double>& bearings) {
  double sx = 0.0, sy = 0.0;
  for (double b : bearings) {
    sx += std::sin(b * kDeg);
    sy += std::cos(b * kDeg);
  }
  double m = std::atan2(sx, sy) / kDeg;
  return m < 0 ? m + 360.0 : m;
}

// Assigns distinct cardinals to up to four approach bearings, preferring the
// nearest cardinal and resolving clashes by minimum total angular deviation.
std::vector<Direction> assign_directions(const std::vector<double>& travel_bearings) {
  std::vector<Direction> nearest;
  for (double b : travel_bearings) nearest.push_back(nearest_direction(b));
  const std::set<Direction> distinct(nearest.begin(), nearest.end());
  if (distinct.size() == nearest.size() || travel_bearings.size() > 4) return nearest;

  std::array<Direction, 4> perm = kDirections;
  std::sort(perm.begin(), perm.end());
  std::vector<Direction> best;
  double best_cost = INFINITY;
  do {
    double cost = 0.0;
    for (std::size_t i = 0; i < travel_bearings.size(); ++i)
      cost += angle_between(travel_bearings[i], travel_bearing(perm[i]));
    if (cost < best_cost - 1e-12) {
      best_cost = cost;
      best.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(travel_bearings.size()));
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

}  // namespace

std::string_view to_string(Direction d) {
  switch (d) {
    case Direction::NB:
      return "NB";
    case Direction::SB:
      return "SB";
    case Direction::EB:
      return "EB";
    case Direction::WB:
      return "WB";
  }
  return "?";
}

std::optional<Direction> parse_direction(std::string_view s) {
  for (auto d : kDirections)
    if (to_string(d) == s) return d;
  return std::nullopt;
}

Direction opposite(Direction d) {
  switch (d) {
    case Direction::NB:
      return Direction::SB;
    case Direction::SB:
      return Direction::NB;
    case Direction::EB:
      return Direction::WB;
    case Direction::WB:
      return Direction::EB;
  }
  return d;
}

double travel_bearing(Direction d) {
  switch (d) {
    case Direction::NB:
      return 0.0;
    case Direction::EB:
      return 90.0;
    case Direction::SB:
      return 180.0;
    case Direction::WB:
      return 270.0;
  }
  return 0.0;
}

Direction nearest_direction(double bearing_deg) {
  Direction best = Direction::NB;
  double best_diff = INFINITY;
  for (auto d : {Direction::NB, Direction::EB, Direction::SB, Direction::WB}) {
    const double diff = angle_between(bearing_deg, travel_bearing(d));
    if (diff < best_diff) {
      best_diff = diff;
      best = d;
    }
  }
  return best;
}

double angle_between(double a_deg, double b_deg) {
  double d = std::fmod(std::abs(a_deg - b_deg), 360.0);
  return d > 180.0 ? 360.0 - d : d;
}

std::string_view to_string(MaskKind k) { return k == MaskKind::intersection ? "intersection" : "corridor"; }

bool Mask::contains(const PlanarPoint& p) const {
  return std::any_of(geometry.begin(), geometry.end(),
                     [&](const geo::Polygon& g) { return geo::point_in_polygon(p, g); });
}

const ApproachZone* Mask::approach(Direction d) const {
  for (const auto& a : approaches)
    if (a.direction == d) return &a;
  return nullptr;
}

const Mask* MaskSet::find(std::string_view id) const {
  for (const auto& m : masks)
    if (m.id == id) return &m;
  return nullptr;
}

const Mask* MaskSet::find_intersection(std::string_view intersection_id) const {
  for (const auto& m : masks)
    if (m.kind == MaskKind::intersection && m.intersection_id == intersection_id) return &m;
  return nullptr;
}

std::vector<Mask> build_intersection_masks(std::span<const IntersectionCenter> centers,
                                           const geo::LocalProjection& proj, double radius) {
  if (!(radius > 0.0)) throw InputError("intersection radius must be positive");
  std::set<std::string> seen;
  std::vector<Mask> out;
  for (const auto& [id, point] : centers) {
    if (!seen.insert(id).second) throw InputError("duplicate intersection id '" + id + "'");
    Mask m;
    m.id = "intersection/" + id;
    m.kind = MaskKind::intersection;
    m.intersection_id = id;
    m.center = proj.project(point);
    m.radius = radius;
    m.geometry.push_back(geo::buffer_circle(*m.center, radius));
    out.push_back(std::move(m));
  }
  return out;
}

std::vector<Mask> build_corridor_masks(std::span<const geo::Polyline> centerlines,
                                       std::span<const Mask> intersection_masks, double half_width) {
  std::vector<geo::Polygon> buffers;
  for (const auto& line : centerlines) buffers.push_back(geo::buffer_polyline(line, half_width));
  const auto merged = geo::union_all(buffers);

  std::vector<geo::Polygon> discs;
  for (const auto& m : intersection_masks)
    for (const auto& g : m.geometry) discs.push_back(g);

  std::vector<Mask> out;
  for (const auto& piece : merged) {
    for (auto& clipped : geo::clip_difference(piece, discs)) {
      if (geo::area(clipped) < kSliverArea) continue;
      Mask m;
      m.id = "corridor/" + std::to_string(out.size());
      m.kind = MaskKind::corridor;
      m.geometry.push_back(std::move(clipped));
      out.push_back(std::move(m));
    }
  }
  return out;
}

PlanarPoint inner_box_point(const PlanarPoint& center, double bearing_deg, double half_width) {
  const double sx = std::sin(bearing_deg * kDeg), cy = std::cos(bearing_deg * kDeg);
  const double r = half_width / std::max(std::abs(sx), std::abs(cy));
  return {center.x + r * sx, center.y + r * cy};
}

Mask derive_approaches(const Mask& mask, std::span<const geo::Polyline> centerlines) {
  if (mask.kind != MaskKind::intersection || !mask.center || mask.geometry.empty())
    throw InputError("approaches can only be derived for intersection masks");
  const PlanarPoint c = *mask.center;
  auto crossings = boundary_crossings(mask.geometry.front(), c, centerlines);
  if (crossings.size() < 2)
    throw InputError("mask '" + mask.id + "' is crossed fewer than twice; not an intersection geometry");

  std::sort(crossings.begin(), crossings.end(),
            [](const Crossing& a, const Crossing& b) { return a.bearing < b.bearing; });

  // cluster neighbouring bearings (wrapping through north)
  std::vector<std::vector<Crossing>> clusters;
  for (const auto& x : crossings) {
    if (!clusters.empty() && angle_between(clusters.back().back().bearing, x.bearing) <= kApproachMergeDeg)
      clusters.back().push_back(x);
    else
      clusters.push_back({x});
  }
  if (clusters.size() > 1 &&
      angle_between(clusters.front().front().bearing, clusters.back().back().bearing) <= kApproachMergeDeg) {
    clusters.front().insert(clusters.front().begin(), clusters.back().begin(), clusters.back().end());
    clusters.pop_back();
  }
  if (clusters.size() < 2)
    throw InputError("mask '" + mask.id + "' has fewer than two distinct approach legs");

  std::vector<double> entry_bearings, travel;
  for (const auto& cl : clusters) {
    std::vector<double> bs;
    for (const auto& x : cl) bs.push_back(x.bearing);
    const double b = circular_mean(bs);
    entry_bearings.push_back(b);
    travel.push_back(std::fmod(b + 180.0, 360.0));
  }
  const auto dirs = assign_directions(travel);

  Mask out = mask;
  out.approaches.clear();
  for (std::size_t i = 0; i < clusters.size(); ++i) {
    if (out.approach(dirs[i])) continue;  // more than four legs: keep the first per cardinal
    ApproachZone z;
    z.direction = dirs[i];
    z.entry_bearing = entry_bearings[i];
    z.entry = clusters[i].front().point;
    z.stop_bar = inner_box_point(c, entry_bearings[i]);
    out.approaches.push_back(z);
  }
  std::sort(out.approaches.begin(), out.approaches.end(),
            [](const ApproachZone& a, const ApproachZone& b) { return a.direction < b.direction; });
  return out;
}

// ---------------------------------------------------------------------------

MaskInputs read_mask_inputs(const std::filesystem::path& roads, const std::filesystem::path& intersections) {
  MaskInputs in;
  auto collect = [&](const nlohmann::json& doc) {
    if (doc.value("type", "") != "FeatureCollection") throw ParseError("expected a GeoJSON FeatureCollection");
    for (const auto& f : doc.at("features")) {
      const auto& g = f.at("geometry");
      const std::string type = g.value("type", "");
      if (type == "LineString" || type == "MultiLineString") {
        for (auto& line : geojson::lines_from_geometry(g)) in.roads.push_back(std::move(line));
      } else if (type == "Point") {
        const auto& props = f.value("properties", nlohmann::json::object());
        if (!props.contains("id")) throw ParseError("intersection point feature without an 'id' property");
        const auto& id = props.at("id");
        in.intersections.emplace_back(id.is_string() ? id.get<std::string>() : id.dump(),
                                      geojson::point_from_geometry(g));
      }
    }
  };
  try {
    collect(geojson::read_json(roads));
    if (intersections != roads) collect(geojson::read_json(intersections));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("malformed GeoJSON: ") + e.what());
  }
  return in;
}

MaskSet build_mask_set(const MaskInputs& inputs, const MaskBuildOptions& opts) {
  if (!(opts.radius > 0.0)) throw InputError("radius must be positive");
  if (!(opts.half_width > 0.0)) throw InputError("half width must be positive");
  double slon = 0.0, slat = 0.0;
  std::size_t n = 0;
  for (const auto& [id, p] : inputs.intersections) {
    slon += p.lon;
    slat += p.lat;
    ++n;
  }
  for (const auto& line : inputs.roads)
    for (const auto& p : line) {
      slon += p.lon;
      slat += p.lat;
      ++n;
    }
  if (n == 0) throw InputError("no roads or intersections to build masks from");

  MaskSet set;
  set.origin = {slon / static_cast<double>(n), slat / static_cast<double>(n)};
  const auto proj = set.projection();

  std::vector<geo::Polyline> lines;
  for (const auto& road : inputs.roads) {
    geo::Polyline pl;
    for (const auto& p : road) pl.vertices.push_back(proj.project(p));
    lines.push_back(std::move(pl));
  }

  auto inter = build_intersection_masks(inputs.intersections, proj, opts.radius);
  for (auto& m : inter) m = derive_approaches(m, lines);
  auto corridors = build_corridor_masks(lines, inter, opts.half_width);

  set.masks = std::move(inter);
  for (auto& m : corridors) set.masks.push_back(std::move(m));
  return set;
}

nlohmann::json to_geojson(const MaskSet& set) {
  using nlohmann::json;
  const auto proj = set.projection();
  auto lonlat = [&](const PlanarPoint& p) {
    const GeoPoint g = proj.unproject(p);
    return json::array({g.lon, g.lat});
  };
  json features = json::array();
  for (const auto& m : set.masks) {
    json props{{"id", m.id}, {"kind", std::string(to_string(m.kind))}};
    props["intersection_id"] = m.intersection_id ? json(*m.intersection_id) : json(nullptr);
    if (m.center) props["center"] = lonlat(*m.center);
    if (m.radius) props["radius"] = *m.radius;
    if (m.kind == MaskKind::intersection) {
      json approaches = json::array();
      for (const auto& a : m.approaches)
        approaches.push_back({{"direction", std::string(to_string(a.direction))},
                              {"entry_bearing", a.entry_bearing},
                              {"entry", lonlat(a.entry)},
                              {"stop_bar", lonlat(a.stop_bar)}});
      props["approaches"] = approaches;
    }
    features.push_back(
        {{"type", "Feature"}, {"geometry", geojson::to_geometry(m.geometry, proj)}, {"properties", props}});
  }
  return {{"type", "FeatureCollection"},
          {"projection_origin", geojson::origin_member(set.origin)},
          {"features", features}};
}

MaskSet mask_set_from_geojson(const nlohmann::json& doc) {
  try {
    MaskSet set;
    set.origin = geojson::origin_from_member(doc);
    const auto proj = set.projection();
    auto planar = [&](const nlohmann::json& c) { return proj.project({c.at(0).get<double>(), c.at(1).get<double>()}); };
    std::set<std::string> ids;
    for (const auto& f : doc.at("features")) {
      const auto& props = f.at("properties");
      Mask m;
      m.id = props.at("id").get<std::string>();
      if (!ids.insert(m.id).second) throw InputError("duplicate mask id '" + m.id + "'");
      const std::string kind = props.at("kind").get<std::string>();
      if (kind == "intersection")
        m.kind = MaskKind::intersection;
      else if (kind == "corridor")
        m.kind = MaskKind::corridor;
      else
        throw ParseError("unknown mask kind '" + kind + "'");
      if (props.contains("intersection_id") && props["intersection_id"].is_string())
        m.intersection_id = props["intersection_id"].get<std::string>();
      if (props.contains("center")) m.center = planar(props["center"]);
      if (props.contains("radius")) m.radius = props["radius"].get<double>();
      if (props.contains("approaches")) {
        for (const auto& a : props["approaches"]) {
          ApproachZone z;
          const auto d = parse_direction(a.at("direction").get<std::string>());
          if (!d) throw ParseError("bad approach direction");
          z.direction = *d;
          z.entry_bearing = a.at("entry_bearing").get<double>();
          z.entry = planar(a.at("entry"));
          z.stop_bar = planar(a.at("stop_bar"));
          m.approaches.push_back(z);
        }
      }
      m.geometry = geojson::polygons_from_geometry(f.at("geometry"), proj);
      set.masks.push_back(std::move(m));
    }
    return set;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("malformed mask set: ") + e.what());
  }
}

MaskSet read_mask_set(const std::filesystem::path& path) { return mask_set_from_geojson(geojson::read_json(path)); }

void write_mask_set(const std::filesystem::path& path, const MaskSet& set) {
  geojson::write_json(path, to_geojson(set));
}

}  // namespace trafficlens::masks
