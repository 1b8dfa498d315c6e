#include "trafficlens/config.hpp"

#include <cmath>
#include <cstdlib>
#include <functional>
#include <map>

#include "trafficlens/error.hpp"
#include "trafficlens/geojson.hpp"

namespace trafficlens {

using nlohmann::json;

namespace {

template <class T>
void read(const json& obj, const char* key, T& into, const std::string& where) {
  if (!obj.contains(key)) return;
  try {
    into = obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw InputError("config: '" + where + "." + key + "' has the wrong type");
  }
}

void only_keys(const json& obj, std::initializer_list<const char*> keys, const std::string& where) {
  if (!obj.is_object()) throw InputError("config: '" + where + "' must be an object");
  for (const auto& [k, v] : obj.items()) {
    bool ok = false;
    for (const char* allowed : keys) ok = ok || k == allowed;
    if (!ok) throw InputError("config: unknown key '" + where + (where.empty() ? "" : ".") + k + "'");
  }
}

// name -> member, shared by reader, writer and validator
std::vector<std::pair<const char*, double Thresholds::*>> threshold_fields() {
  return {{"min_journey_duration", &Thresholds::min_journey_duration},
          {"min_fragment_length", &Thresholds::min_fragment_length},
          {"stop_speed", &Thresholds::stop_speed},
          {"stop_min_duration", &Thresholds::stop_min_duration},
          {"queue_min_stop", &Thresholds::queue_min_stop},
          {"braking_g", &Thresholds::braking_g},
          {"braking_sustain", &Thresholds::braking_sustain},
          {"boundary_tolerance", &Thresholds::boundary_tolerance},
          {"gap_threshold", &Thresholds::gap_threshold},
          {"abod_k", &Thresholds::abod_k},
          {"contamination", &Thresholds::contamination},
          {"atspm_threshold", &Thresholds::atspm_threshold},
          {"atspm_bin", &Thresholds::atspm_bin},
          {"mask_radius", &Thresholds::mask_radius},
          {"mask_half_width", &Thresholds::mask_half_width}};
}

}  // namespace

analytics::AnalysisParams Config::analysis_params() const {
  analytics::AnalysisParams p;
  p.stops.speed_threshold = thresholds.stop_speed;
  p.stops.min_duration = thresholds.stop_min_duration;
  p.queue_min_stop = thresholds.queue_min_stop;
  p.braking.threshold_g = thresholds.braking_g;
  p.braking.sustain = thresholds.braking_sustain;
  p.boundary_tolerance = thresholds.boundary_tolerance;
  p.gap_threshold = thresholds.gap_threshold;
  p.exclude_gapped = exclude_gapped;
  return p;
}

void validate(const Config& c) {
  for (const auto& [name, field] : threshold_fields()) {
    const double v = c.thresholds.*field;
    if (!(v > 0.0) || !std::isfinite(v)) throw InputError(std::string("config: threshold '") + name + "' must be positive");
  }
  if (!(c.thresholds.contamination < 0.5)) throw InputError("config: contamination must be below 0.5");
  if (c.thresholds.abod_k < 2 || c.thresholds.abod_k != std::floor(c.thresholds.abod_k))
    throw InputError("config: abod_k must be an integer >= 2");
  if (c.workers < 1) throw InputError("config: workers must be >= 1");
  if (c.backend.kind != "toy" && c.backend.kind != "external")
    throw InputError("config: backend.kind must be toy or external");
  if (!(c.backend.timeout > 0.0)) throw InputError("config: backend.timeout must be positive");
}

Config config_from_json(const json& doc) {
  Config c;
  only_keys(doc, {"paths", "thresholds", "backend", "workers", "exclude_gapped"}, "");
  if (doc.contains("paths")) {
    const auto& p = doc.at("paths");
    only_keys(p, {"store", "masks", "out"}, "paths");
    read(p, "store", c.paths.store, "paths");
    read(p, "masks", c.paths.masks, "paths");
    read(p, "out", c.paths.out, "paths");
  }
  if (doc.contains("thresholds")) {
    const auto& t = doc.at("thresholds");
    if (!t.is_object()) throw InputError("config: 'thresholds' must be an object");
    const auto fields = threshold_fields();
    for (const auto& [k, v] : t.items()) {
      bool known = false;
      for (const auto& [name, field] : fields)
        if (k == name) {
          known = true;
          if (!v.is_number()) throw InputError("config: 'thresholds." + k + "' must be a number");
          c.thresholds.*field = v.get<double>();
        }
      if (!known) throw InputError("config: unknown key 'thresholds." + k + "'");
    }
  }
  if (doc.contains("backend")) {
    const auto& b = doc.at("backend");
    only_keys(b, {"kind", "command", "timeout"}, "backend");
    read(b, "kind", c.backend.kind, "backend");
    read(b, "command", c.backend.command, "backend");
    read(b, "timeout", c.backend.timeout, "backend");
  }
  read(doc, "workers", c.workers, "");
  read(doc, "exclude_gapped", c.exclude_gapped, "");
  validate(c);
  return c;
}

json to_json(const Config& c) {
  json t = json::object();
  for (const auto& [name, field] : threshold_fields()) t[name] = c.thresholds.*field;
  return {{"paths", {{"store", c.paths.store}, {"masks", c.paths.masks}, {"out", c.paths.out}}},
          {"thresholds", t},
          {"backend", {{"kind", c.backend.kind}, {"command", c.backend.command}, {"timeout", c.backend.timeout}}},
          {"workers", c.workers},
          {"exclude_gapped", c.exclude_gapped}};
}

Config load_config(const std::optional<std::filesystem::path>& explicit_path) {
  std::optional<std::filesystem::path> path = explicit_path;
  if (!path)
    if (const char* env = std::getenv(kConfigEnv); env && *env) path = env;
  if (!path) return Config{};
  return config_from_json(geojson::read_json(*path));
}

}  // namespace trafficlens
