#include "trafficlens/geojson.hpp"

#include <fstream>

#include "trafficlens/error.hpp"

namespace trafficlens::geojson {

namespace {

json ring_coords(const geo::Ring& ring, const geo::LocalProjection& proj) {
  json coords = json::array();
  for (const auto& p : ring) {
    const GeoPoint g = proj.unproject(p);
    coords.push_back({g.lon, g.lat});
  }
  if (!ring.empty()) coords.push_back(coords.front());
  return coords;
}

json polygon_coords(const geo::Polygon& poly, const geo::LocalProjection& proj) {
  json rings = json::array();
  rings.push_back(ring_coords(poly.exterior, proj));
  for (const auto& h : poly.holes) rings.push_back(ring_coords(h, proj));
  return rings;
}

GeoPoint position(const json& c) {
  if (!c.is_array() || c.size() < 2 || !c[0].is_number() || !c[1].is_number())
    throw ParseError("GeoJSON position must be [lon, lat]");
  const GeoPoint g{c[0].get<double>(), c[1].get<double>()};
  if (g.lon < -180.0 || g.lon > 180.0 || g.lat < -90.0 || g.lat > 90.0)
    throw InputError("GeoJSON position out of WGS84 range");
  return g;
}

geo::Ring ring_from_coords(const json& c, const geo::LocalProjection& proj) {
  geo::Ring ring;
  for (const auto& p : c) ring.push_back(proj.project(position(p)));
  if (ring.size() > 1 && ring.front() == ring.back()) ring.pop_back();
  return ring;
}

geo::Polygon polygon_from_coords(const json& c, const geo::LocalProjection& proj) {
  if (!c.is_array() || c.empty()) throw ParseError("GeoJSON polygon needs at least one ring");
  geo::Polygon poly;
  poly.exterior = ring_from_coords(c[0], proj);
  for (std::size_t i = 1; i < c.size(); ++i) poly.holes.push_back(ring_from_coords(c[i], proj));
  return geo::normalized(std::move(poly));
}

}  // namespace

json to_geometry(const geo::Polygon& poly, const geo::LocalProjection& proj) {
  return {{"type", "Polygon"}, {"coordinates", polygon_coords(poly, proj)}};
}

json to_geometry(const std::vector<geo::Polygon>& polys, const geo::LocalProjection& proj) {
  if (polys.size() == 1) return to_geometry(polys.front(), proj);
  json coords = json::array();
  for (const auto& p : polys) coords.push_back(polygon_coords(p, proj));
  return {{"type", "MultiPolygon"}, {"coordinates", coords}};
}

json to_geometry(const geo::Polyline& line, const geo::LocalProjection& proj) {
  json coords = json::array();
  for (const auto& p : line.vertices) {
    const GeoPoint g = proj.unproject(p);
    coords.push_back({g.lon, g.lat});
  }
  return {{"type", "LineString"}, {"coordinates", coords}};
}

std::vector<geo::Polygon> polygons_from_geometry(const json& geometry, const geo::LocalProjection& proj) {
  const std::string type = geometry.value("type", "");
  const json& coords = geometry.at("coordinates");
  std::vector<geo::Polygon> out;
  if (type == "Polygon") {
    out.push_back(polygon_from_coords(coords, proj));
  } else if (type == "MultiPolygon") {
    for (const auto& c : coords) out.push_back(polygon_from_coords(c, proj));
  } else {
    throw ParseError("expected Polygon or MultiPolygon geometry, got '" + type + "'");
  }
  return out;
}

std::vector<std::vector<GeoPoint>> lines_from_geometry(const json& geometry) {
  const std::string type = geometry.value("type", "");
  const json& coords = geometry.at("coordinates");
  auto one = [](const json& c) {
    std::vector<GeoPoint> line;
    for (const auto& p : c) line.push_back(position(p));
    return line;
  };
  std::vector<std::vector<GeoPoint>> out;
  if (type == "LineString") {
    out.push_back(one(coords));
  } else if (type == "MultiLineString") {
    for (const auto& c : coords) out.push_back(one(c));
  } else {
    throw ParseError("expected LineString or MultiLineString geometry, got '" + type + "'");
  }
  return out;
}

GeoPoint point_from_geometry(const json& geometry) {
  if (geometry.value("type", "") != "Point") throw ParseError("expected Point geometry");
  return position(geometry.at("coordinates"));
}

json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

void write_json(const std::filesystem::path& path, const json& doc, int indent) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path.string());
  out << doc.dump(indent) << '\n';
}

json origin_member(const GeoPoint& origin) { return json::array({origin.lon, origin.lat}); }

GeoPoint origin_from_member(const json& doc) {
  if (!doc.contains("projection_origin")) throw ParseError("missing projection_origin member");
  return position(doc.at("projection_origin"));
}

}  // namespace trafficlens::geojson
