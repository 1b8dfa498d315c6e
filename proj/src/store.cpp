#include "trafficlens/store.hpp"

#include <cctype>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <tuple>

#include "trafficlens/error.hpp"
#include "trafficlens/geojson.hpp"

namespace trafficlens::ingest {

namespace {

using nlohmann::json;

constexpr const char* kCorridorFile = "_corridor";

std::string file_stem(const std::string& intersection_id) {
  if (intersection_id.empty()) return kCorridorFile;
  std::string out;
  for (char c : intersection_id) out.push_back(std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' ? c : '_');
  return out;
}

std::string hour_dir(int hour) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "hour=%02d", hour);
  return buf;
}

std::vector<Journey> read_file(const std::filesystem::path& path) {
  std::vector<Journey> out;
  std::ifstream in(path);
  if (!in) return out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      out.push_back(journey_from_json(json::parse(line)));
    } catch (const json::exception& e) {
      throw ParseError(path.string() + ": " + e.what());
    }
  }
  return out;
}

using Key = std::tuple<std::string, int, std::string>;

Key key_of(const Journey& j) { return {j.id, j.part, j.mask_id}; }

}  // namespace

json journey_to_json(const Journey& j) {
  json samples = json::array();
  for (const auto& s : j.samples) {
    samples.push_back(json::array({s.t, s.pos.lon, s.pos.lat, s.xy.x, s.xy.y,
                                   s.speed ? json(*s.speed) : json(nullptr), std::string(to_string(s.ignition))}));
  }
  return {{"id", j.id}, {"part", j.part}, {"mask_id", j.mask_id}, {"samples", samples}};
}

Journey journey_from_json(const json& doc) {
  Journey j;
  j.id = doc.at("id").get<std::string>();
  j.part = doc.value("part", 0);
  j.mask_id = doc.value("mask_id", "");
  for (const auto& a : doc.at("samples")) {
    TrajectorySample s;
    s.t = a.at(0).get<double>();
    s.pos = {a.at(1).get<double>(), a.at(2).get<double>()};
    s.xy = {a.at(3).get<double>(), a.at(4).get<double>()};
    if (!a.at(5).is_null()) s.speed = a.at(5).get<double>();
    s.ignition = parse_ignition(a.at(6).get<std::string>()).value_or(Ignition::unknown);
    j.samples.push_back(s);
  }
  return j;
}

JourneyStore::JourneyStore(std::filesystem::path root) : root_(std::move(root)) {}

std::filesystem::path JourneyStore::partition_path(const std::string& date, int hour,
                                                   const std::string& intersection_id) const {
  return root_ / ("date=" + date) / hour_dir(hour) / (file_stem(intersection_id) + ".ndjson");
}

void JourneyStore::put(std::span<const Journey> journeys, const std::string& intersection_id) {
  std::map<std::filesystem::path, std::vector<const Journey*>> by_partition;
  for (const auto& j : journeys) {
    if (j.samples.empty()) continue;
    by_partition[partition_path(format_date(j.t_first()), hour_of_day(j.t_first()), intersection_id)].push_back(&j);
  }
  for (const auto& [path, items] : by_partition) {
    std::map<Key, Journey> merged;
    for (auto& j : read_file(path)) merged[key_of(j)] = std::move(j);
    for (const Journey* j : items) merged[key_of(*j)] = *j;

    std::filesystem::create_directories(path.parent_path());
    auto tmp = path;
    tmp += ".tmp";
    {
      std::ofstream out(tmp);
      if (!out) throw InputError("cannot write " + tmp.string());
      for (const auto& [k, j] : merged) out << journey_to_json(j).dump() << '\n';
    }
    std::filesystem::rename(tmp, path);
  }
  refresh_manifest();
}

std::vector<Journey> JourneyStore::load_partition(const std::string& date, int hour,
                                                  const std::string& intersection_id) const {
  return read_file(partition_path(date, hour, intersection_id));
}

std::vector<Journey> JourneyStore::load(const TimeRange& window, const std::string& intersection_id) const {
  std::vector<Journey> out;
  const double first = std::floor(window.start / 3600.0) * 3600.0;
  for (double h = first; h < window.end; h += 3600.0) {
    for (auto& j : load_partition(format_date(h), hour_of_day(h), intersection_id))
      if (!j.samples.empty() && window.contains(j.t_first())) out.push_back(std::move(j));
  }
  std::sort(out.begin(), out.end(), [](const Journey& a, const Journey& b) { return key_of(a) < key_of(b); });
  return out;
}

json JourneyStore::refresh_manifest() const {
  json parts = json::array();
  if (std::filesystem::exists(root_)) {
    std::vector<std::filesystem::path> files;
    for (const auto& e : std::filesystem::recursive_directory_iterator(root_))
      if (e.is_regular_file() && e.path().extension() == ".ndjson") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
      std::size_t n = 0;
      std::ifstream in(f);
      std::string line;
      while (std::getline(in, line))
        if (!line.empty()) ++n;
      const auto rel = std::filesystem::relative(f, root_);
      const std::string date = rel.begin()->string().substr(5);
      const std::string hour = std::next(rel.begin())->string().substr(5);
      const std::string stem = f.stem().string();
      parts.push_back({{"date", date},
                       {"hour", std::stoi(hour)},
                       {"intersection", stem == kCorridorFile ? json(nullptr) : json(stem)},
                       {"path", rel.generic_string()},
                       {"journeys", n}});
    }
  }
  json manifest{{"partitions", parts}};
  geojson::write_json(root_ / "manifest.json", manifest);
  return manifest;
}

}  // namespace trafficlens::ingest
