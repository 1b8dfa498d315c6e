#include "trafficlens/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <future>
#include <unordered_map>

#include <json.hpp>

#include "trafficlens/csv.hpp"
#include "trafficlens/error.hpp"
#include "trafficlens/geojson.hpp"

namespace trafficlens::ingest {

namespace {

using nlohmann::json;

struct Row {
  std::string journey_id;
  TrajectorySample sample;
};

struct FileRows {
  std::vector<Row> rows;
  std::vector<Reject> rejects;
};

bool is_ndjson(const std::filesystem::path& p) {
  const auto ext = p.extension().string();
  return ext == ".ndjson" || ext == ".jsonl";
}

double to_double(const std::string& s, const char* what) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw InputError(std::string("bad ") + what);
    if (!std::isfinite(v)) throw InputError(std::string("non-finite ") + what);
    return v;
  } catch (const std::logic_error&) {
    throw InputError(std::string("bad ") + what + " '" + s + "'");
  }
}

// Validates one raw record; throws InputError with the reject reason.
Row make_row(const std::string& id, const std::string& ts, const std::string& lat, const std::string& lon,
             const std::string& speed, const std::string& ignition) {
  if (id.empty()) throw InputError("empty journey_id");
  Row r;
  r.journey_id = id;
  r.sample.t = parse_timestamp(ts);
  r.sample.pos.lat = to_double(lat, "lat");
  r.sample.pos.lon = to_double(lon, "lon");
  if (r.sample.pos.lat < -90.0 || r.sample.pos.lat > 90.0) throw InputError("lat out of range");
  if (r.sample.pos.lon < -180.0 || r.sample.pos.lon > 180.0) throw InputError("lon out of range");
  if (!speed.empty()) {
    const double v = to_double(speed, "speed_mps");
    if (v < 0.0) throw InputError("negative speed");
    r.sample.speed = v;
  }
  const auto ig = parse_ignition(ignition);
  if (!ig) throw InputError("bad ignition '" + ignition + "'");
  r.sample.ignition = *ig;
  return r;
}

FileRows read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path.string());
  FileRows out;
  std::string line;
  if (!std::getline(in, line)) return out;
  const auto header = csv::split_line(line);
  auto col = [&](const char* name) -> int {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return static_cast<int>(i);
    return -1;
  };
  const int c_id = col("journey_id"), c_t = col("timestamp"), c_lat = col("lat"), c_lon = col("lon");
  const int c_speed = col("speed_mps"), c_ig = col("ignition");
  if (c_id < 0 || c_t < 0 || c_lat < 0 || c_lon < 0)
    throw ParseError(path.string() + ": header must contain journey_id,timestamp,lat,lon");
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty() || line == "\r") continue;
    const auto f = csv::split_line(line);
    auto get = [&](int c) -> std::string { return c >= 0 && c < static_cast<int>(f.size()) ? f[c] : std::string(); };
    try {
      if (f.size() < header.size()) throw InputError("too few fields");
      out.rows.push_back(make_row(get(c_id), get(c_t), get(c_lat), get(c_lon), get(c_speed), get(c_ig)));
    } catch (const InputError& e) {
      out.rejects.push_back({path.string(), row, e.what()});
    }
  }
  return out;
}

FileRows read_ndjson(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path.string());
  FileRows out;
  std::string line;
  std::size_t row = 0;
  auto text = [](const json& j, const char* key) -> std::string {
    if (!j.contains(key) || j[key].is_null()) return {};
    const auto& v = j[key];
    return v.is_string() ? v.get<std::string>() : v.dump();
  };
  while (std::getline(in, line)) {
    ++row;
    if (line.empty() || line == "\r") continue;
    try {
      const json j = json::parse(line);
      out.rows.push_back(make_row(text(j, "journey_id"), text(j, "timestamp"), text(j, "lat"), text(j, "lon"),
                                  text(j, "speed_mps"), text(j, "ignition")));
    } catch (const json::exception& e) {
      out.rejects.push_back({path.string(), row, std::string("malformed JSON: ") + e.what()});
    } catch (const InputError& e) {
      out.rejects.push_back({path.string(), row, e.what()});
    }
  }
  return out;
}

double ground_distance(const GeoPoint& a, const GeoPoint& b) {
  const geo::LocalProjection proj({a.lon, 0.5 * (a.lat + b.lat)});
  const PlanarPoint pa = proj.project(a), pb = proj.project(b);
  return geo::distance(pa, pb);
}

void fill_speeds(Journey& j) {
  auto& s = j.samples;
  for (std::size_t i = 1; i < s.size(); ++i) {
    if (s[i].speed) continue;
    s[i].speed = ground_distance(s[i - 1].pos, s[i].pos) / (s[i].t - s[i - 1].t);
  }
  if (!s.empty() && !s[0].speed && s.size() > 1) s[0].speed = s[1].speed;
}

}  // namespace

TrajectoryLoad load_trajectories(std::span<const std::filesystem::path> paths) {
  for (const auto& p : paths)
    if (!std::filesystem::exists(p)) throw InputError("trajectory file not found: " + p.string());

  std::vector<std::future<FileRows>> jobs;
  for (const auto& p : paths)
    jobs.push_back(std::async(std::launch::async, [p] { return is_ndjson(p) ? read_ndjson(p) : read_csv(p); }));

  TrajectoryLoad out;
  std::vector<Row> rows;
  for (auto& job : jobs) {
    auto fr = job.get();
    for (auto& r : fr.rows) rows.push_back(std::move(r));
    for (auto& r : fr.rejects) out.rejects.push_back(std::move(r));
  }
  std::stable_sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
    if (a.journey_id != b.journey_id) return a.journey_id < b.journey_id;
    return a.sample.t < b.sample.t;
  });

  for (std::size_t i = 0; i < rows.size();) {
    Journey j;
    j.id = rows[i].journey_id;
    for (; i < rows.size() && rows[i].journey_id == j.id; ++i) {
      if (!j.samples.empty() && rows[i].sample.t == j.samples.back().t) continue;  // first wins
      j.samples.push_back(rows[i].sample);
    }
    if (j.samples.size() < 2) {
      out.rejects.push_back({"", 0, "journey '" + j.id + "' has fewer than 2 samples"});
      continue;
    }
    fill_speeds(j);
    out.journeys.push_back(std::move(j));
  }
  return out;
}

std::vector<Journey> filter_journeys(std::vector<Journey> journeys, double min_duration) {
  std::vector<Journey> out;
  out.reserve(journeys.size());
  for (auto& j : journeys) {
    std::erase_if(j.samples, [](const TrajectorySample& s) { return s.ignition == Ignition::off; });
    if (j.samples.size() < 2) continue;
    if (j.t_last() - j.t_first() < min_duration) continue;
    out.push_back(std::move(j));
  }
  return out;
}

std::vector<Journey> clip_to_masks(std::span<const Journey> journeys, const masks::MaskSet& mask_set,
                                   double min_length) {
  const auto proj = mask_set.projection();
  std::vector<geo::BoundingBox> boxes;
  for (const auto& m : mask_set.masks) {
    geo::BoundingBox b{INFINITY, INFINITY, -INFINITY, -INFINITY};
    for (const auto& g : m.geometry) {
      const auto gb = geo::bounds(g);
      b = {std::min(b.min_x, gb.min_x), std::min(b.min_y, gb.min_y), std::max(b.max_x, gb.max_x),
           std::max(b.max_y, gb.max_y)};
    }
    boxes.push_back(b);
  }

  std::vector<Journey> out;
  for (const auto& raw : journeys) {
    Journey j = raw;
    j.project(proj);
    geo::BoundingBox jb{INFINITY, INFINITY, -INFINITY, -INFINITY};
    for (const auto& s : j.samples)
      jb = {std::min(jb.min_x, s.xy.x), std::min(jb.min_y, s.xy.y), std::max(jb.max_x, s.xy.x),
            std::max(jb.max_y, s.xy.y)};
    int part = 0;
    for (std::size_t m = 0; m < mask_set.masks.size(); ++m) {
      const auto& b = boxes[m];
      if (jb.max_x < b.min_x || jb.min_x > b.max_x || jb.max_y < b.min_y || jb.min_y > b.max_y) continue;
      const auto& mask = mask_set.masks[m];
      for (const auto& poly : mask.geometry) {
        for (auto& frag : geo::clip_journey(j, poly)) {
          if (frag.path_length() < min_length) continue;
          frag.part = ++part;
          frag.mask_id = mask.id;
          out.push_back(std::move(frag));
        }
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

AtspmLoad load_atspm(std::span<const std::filesystem::path> paths, const std::string& intersection_id,
                     const TimeRange& range) {
  if (!(range.start < range.end)) throw InputError("time range start must precede its end");
  AtspmLoad out;
  for (const auto& path : paths) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line)) continue;
    const auto header = csv::split_line(line);
    auto col = [&](const char* name) -> int {
      for (std::size_t i = 0; i < header.size(); ++i)
        if (header[i] == name) return static_cast<int>(i);
      return -1;
    };
    const int c_id = col("intersection_id"), c_t = col("timestamp"), c_code = col("event_code"),
              c_par = col("parameter");
    if (c_id < 0 || c_t < 0 || c_code < 0 || c_par < 0)
      throw ParseError(path.string() + ": header must contain intersection_id,timestamp,event_code,parameter");
    std::size_t row = 0;
    while (std::getline(in, line)) {
      ++row;
      if (line.empty() || line == "\r") continue;
      const auto f = csv::split_line(line);
      try {
        if (f.size() < header.size()) throw InputError("too few fields");
        AtspmEvent e;
        e.intersection_id = f[c_id];
        e.t = std::round(parse_timestamp(f[c_t]) * 10.0) / 10.0;
        const double code = to_double(f[c_code], "event_code");
        const double par = to_double(f[c_par], "parameter");
        if (code < 0 || par < 0 || code != std::floor(code) || par != std::floor(par))
          throw InputError("event_code and parameter must be non-negative integers");
        e.event_code = static_cast<int>(code);
        e.parameter = static_cast<int>(par);
        if (e.intersection_id != intersection_id || !range.contains(e.t)) continue;
        out.events.push_back(std::move(e));
      } catch (const InputError& e) {
        out.rejects.push_back({path.string(), row, e.what()});
      }
    }
  }
  std::stable_sort(out.events.begin(), out.events.end(),
                   [](const AtspmEvent& a, const AtspmEvent& b) { return a.t < b.t; });
  return out;
}

std::int64_t PhaseVolumeTable::total() const {
  std::int64_t n = 0;
  for (const auto& [k, c] : counts) n += c;
  for (const auto& [k, c] : unmapped) n += c;
  return n;
}

PhaseVolumeTable PhaseVolumeTable::shifted(std::int64_t seconds) const {
  PhaseVolumeTable out;
  out.bin = bin;
  for (const auto& [k, c] : counts) out.counts[{k.first, k.second + seconds}] = c;
  for (const auto& [k, c] : unmapped) out.unmapped[k + seconds] = c;
  return out;
}

PhaseVolumeTable phase_volumes(std::span<const AtspmEvent> events, const std::map<int, int>& detector_to_phase,
                               double bin, int detector_on_code) {
  if (detector_to_phase.empty()) throw InputError("detector map is empty");
  if (!(bin > 0.0)) throw InputError("bin width must be positive");
  PhaseVolumeTable table;
  table.bin = bin;
  for (const auto& e : events) {
    if (e.event_code != detector_on_code) continue;
    const auto start = static_cast<std::int64_t>(std::floor(e.t / bin) * bin);
    const auto it = detector_to_phase.find(e.parameter);
    if (it == detector_to_phase.end())
      ++table.unmapped[start];
    else
      ++table.counts[{it->second, start}];
  }
  return table;
}

void write_rejects(const std::filesystem::path& path, std::span<const Reject> rejects) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path.string());
  for (const auto& r : rejects) out << json{{"file", r.file}, {"row", r.row}, {"reason", r.reason}}.dump() << '\n';
}

std::map<int, int> read_detector_map(const std::filesystem::path& path) {
  const json doc = geojson::read_json(path);
  if (!doc.is_object()) throw ParseError("detector map must be a JSON object");
  std::map<int, int> out;
  for (const auto& [k, v] : doc.items()) {
    try {
      out[std::stoi(k)] = v.get<int>();
    } catch (const std::exception&) {
      throw ParseError("detector map entries must be \"<detector>\": <phase>");
    }
  }
  return out;
}

}  // namespace trafficlens::ingest
