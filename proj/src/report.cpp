#include "trafficlens/report.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "trafficlens/csv.hpp"
#include "trafficlens/error.hpp"
#include "trafficlens/geojson.hpp"

namespace trafficlens::analytics {

namespace {

using nlohmann::json;
using csv::format_double;

std::string dir_name(Direction d) { return std::string(masks::to_string(d)); }

std::ofstream open(const std::filesystem::path& p) {
  std::ofstream out(p);
  if (!out) throw InputError("cannot write " + p.string());
  return out;
}

template <class T, class F>
json matrix_json(const DirectionMatrix<T>& m, F&& cell) {
  json out = json::object();
  for (auto o : masks::kDirections) {
    json row = json::object();
    for (auto d : masks::kDirections) row[dir_name(d)] = cell(m[index(o)][index(d)]);
    out[dir_name(o)] = row;
  }
  return out;
}

json opt_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

}  // namespace

AnalysisReport analyze(std::span<const Journey> fragments, const masks::Mask& mask, const TimeRange& window,
                       const AnalysisParams& params) {
  AnalysisReport r;
  r.intersection_id = mask.intersection_id.value_or(mask.id);
  r.window = window;

  std::vector<const Journey*> order;
  for (const auto& f : fragments) order.push_back(&f);
  std::sort(order.begin(), order.end(), [](const Journey* a, const Journey* b) {
    return std::tie(a->id, a->part) < std::tie(b->id, b->part);
  });

  for (const Journey* f : order) {
    const bool gapped = f->gapped(params.gap_threshold);
    if (gapped) {
      ++r.gapped;
      if (params.exclude_gapped) {
        ++r.gapped_excluded;
        continue;
      }
    }
    ++r.fragments;
    auto stops = detect_stops(*f, params.stops);
    auto mv = classify_movement(*f, mask, params.boundary_tolerance);
    if (mv.record) {
      if (mask.center) attribute_stops(stops, *f, *mv.record, *mask.center);
      r.movements.push_back(*mv.record);
    } else {
      r.unclassified.push_back({f->id, mv.reason});
    }
    for (auto& s : stops) r.stops.push_back(std::move(s));
    for (auto& b : detect_braking(*f, params.braking)) r.braking.push_back(std::move(b));
  }
  r.od = od_matrix(r.movements);
  r.travel_time = travel_time_matrix(r.movements);
  r.travel_time_median = travel_time_median_matrix(r.movements);
  r.queues = queue_distributions(r.stops, mask, params.queue_min_stop);
  return r;
}

json to_json(const AnalysisReport& r, const geo::LocalProjection& proj) {
  auto lonlat = [&](const PlanarPoint& p) {
    const GeoPoint g = proj.unproject(p);
    return json::array({g.lon, g.lat});
  };
  json stops = json::array();
  for (const auto& s : r.stops)
    stops.push_back({{"journey_id", s.journey_id},
                     {"t_start", s.t_start},
                     {"duration", s.duration},
                     {"location", lonlat(s.location)},
                     {"approach", s.approach ? json(dir_name(*s.approach)) : json(nullptr)}});
  json braking = json::array();
  for (const auto& b : r.braking)
    braking.push_back({{"journey_id", b.journey_id},
                       {"t_start", b.t_start},
                       {"duration", b.duration},
                       {"peak_decel", b.peak_decel},
                       {"location", lonlat(b.location)}});
  json queues = json::array();
  for (const auto& q : r.queues.distributions)
    queues.push_back({{"approach", dir_name(q.approach)}, {"mu", q.mu}, {"sigma", q.sigma}, {"n", q.n}});
  json unclassified = json::array();
  for (const auto& u : r.unclassified) unclassified.push_back({{"journey_id", u.journey_id}, {"reason", u.reason}});

  return {{"intersection", r.intersection_id},
          {"window", {{"start", format_iso(r.window.start)}, {"end", format_iso(r.window.end)}}},
          {"empty", r.empty()},
          {"fragments", r.fragments},
          {"gapped", r.gapped},
          {"gapped_excluded", r.gapped_excluded},
          {"classified", r.movements.size()},
          {"unclassified", unclassified},
          {"od_matrix", matrix_json(r.od, [](long v) { return json(v); })},
          {"travel_time_mean", matrix_json(r.travel_time, opt_json)},
          {"travel_time_median", matrix_json(r.travel_time_median, opt_json)},
          {"queues", queues},
          {"queue_stops_excluded", r.queues.excluded},
          {"stops", stops},
          {"braking", braking}};
}

void write_bundle(const std::filesystem::path& dir, const AnalysisReport& r, const geo::LocalProjection& proj,
                  const json& config, bool svg) {
  std::filesystem::create_directories(dir);
  {
    auto out = open(dir / "stops.csv");
    out << "journey_id,t_start,duration,x,y,lon,lat,approach\n";
    for (const auto& s : r.stops) {
      const GeoPoint g = proj.unproject(s.location);
      out << csv::join({s.journey_id, format_double(s.t_start), format_double(s.duration),
                        format_double(s.location.x), format_double(s.location.y), format_double(g.lon),
                        format_double(g.lat), s.approach ? dir_name(*s.approach) : std::string()})
          << '\n';
    }
  }
  auto write_matrix = [&](const char* name, auto&& cell) {
    auto out = open(dir / name);
    out << "origin,NB,SB,EB,WB\n";
    for (auto o : masks::kDirections) {
      out << dir_name(o);
      for (auto d : masks::kDirections) out << ',' << cell(index(o), index(d));
      out << '\n';
    }
  };
  write_matrix("od.csv", [&](std::size_t i, std::size_t j) { return std::to_string(r.od[i][j]); });
  write_matrix("tt.csv", [&](std::size_t i, std::size_t j) {
    return r.travel_time[i][j] ? format_double(*r.travel_time[i][j]) : std::string();
  });
  {
    auto out = open(dir / "queues.csv");
    out << "approach,mu,sigma,n\n";
    for (const auto& q : r.queues.distributions)
      out << dir_name(q.approach) << ',' << format_double(q.mu) << ',' << format_double(q.sigma) << ',' << q.n
          << '\n';
  }
  {
    auto out = open(dir / "braking.csv");
    out << "journey_id,t_start,duration,peak_decel,x,y,lon,lat\n";
    for (const auto& b : r.braking) {
      const GeoPoint g = proj.unproject(b.location);
      out << csv::join({b.journey_id, format_double(b.t_start), format_double(b.duration),
                        format_double(b.peak_decel), format_double(b.location.x), format_double(b.location.y),
                        format_double(g.lon), format_double(g.lat)})
          << '\n';
    }
  }
  json doc = to_json(r, proj);
  doc["config"] = config;
  geojson::write_json(dir / "report.json", doc);
  if (svg) {
    auto out = open(dir / "stops.svg");
    out << stop_histogram_svg(r.stops);
  }
}

std::string stop_histogram_svg(std::span<const StopEvent> stops, double bin_width) {
  std::vector<int> bins;
  for (const auto& s : stops) {
    const auto b = static_cast<std::size_t>(std::floor(s.duration / bin_width));
    if (bins.size() <= b) bins.resize(b + 1, 0);
    ++bins[b];
  }
  const int peak = bins.empty() ? 1 : std::max(1, *std::max_element(bins.begin(), bins.end()));
  const double w = 400.0, h = 200.0;
  const double bar = bins.empty() ? w : w / static_cast<double>(bins.size());
  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w + 40 << "\" height=\"" << h + 40 << "\">\n";
  svg << "  <text x=\"20\" y=\"15\" font-size=\"12\">stop duration (s), bin " << bin_width << " s</text>\n";
  for (std::size_t i = 0; i < bins.size(); ++i) {
    const double bh = h * bins[i] / peak;
    svg << "  <rect x=\"" << 20 + i * bar << "\" y=\"" << 20 + h - bh << "\" width=\"" << bar * 0.9
        << "\" height=\"" << bh << "\" fill=\"steelblue\"><title>" << i * bin_width << "-" << (i + 1) * bin_width
        << " s: " << bins[i] << "</title></rect>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

}  // namespace trafficlens::analytics
