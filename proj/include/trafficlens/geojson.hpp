#pragma once

// GeoJSON (RFC 7946) conversion for planar geometry. Coordinates are written as
// WGS84 [lon, lat]; the planar frame is recovered through a LocalProjection.

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "trafficlens/geo.hpp"

namespace trafficlens::geojson {

using json = nlohmann::json;

json to_geometry(const geo::Polygon& poly, const geo::LocalProjection& proj);
json to_geometry(const std::vector<geo::Polygon>& polys, const geo::LocalProjection& proj);
json to_geometry(const geo::Polyline& line, const geo::LocalProjection& proj);

/// Polygon or MultiPolygon geometry object into planar polygons.
std::vector<geo::Polygon> polygons_from_geometry(const json& geometry, const geo::LocalProjection& proj);

/// LineString or MultiLineString geometry into geographic vertex lists.
std::vector<std::vector<GeoPoint>> lines_from_geometry(const json& geometry);

GeoPoint point_from_geometry(const json& geometry);

/// Reads and parses a JSON document; throws InputError on missing file, ParseError on bad JSON.
json read_json(const std::filesystem::path& path);
void write_json(const std::filesystem::path& path, const json& doc, int indent = 2);

/// "projection_origin": [lon, lat] foreign member.
json origin_member(const GeoPoint& origin);
GeoPoint origin_from_member(const json& doc);

}  // namespace trafficlens::geojson
