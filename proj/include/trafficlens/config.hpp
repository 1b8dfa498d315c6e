#pragma once

// Run configuration: one JSON document, every key optional, unknown keys
// rejected. Command-line flags override file values. The effective config is
// echoed into every report.

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>

#include <json.hpp>

#include "trafficlens/report.hpp"

namespace trafficlens {

struct Thresholds {
  double min_journey_duration = 120.0;  // s
  double min_fragment_length = 150.0;   // m
  double stop_speed = 1.0;              // m/s
  double stop_min_duration = 3.0;       // s
  double queue_min_stop = 10.0;         // s
  double braking_g = 0.47;
  double braking_sustain = 2.0;     // s
  double boundary_tolerance = 1.0;  // m
  double gap_threshold = 30.0;      // s
  double abod_k = 10;
  double contamination = 0.1;
  double atspm_threshold = 0.4;
  double atspm_bin = 3600.0;        // s
  double mask_radius = 125.0;       // m
  double mask_half_width = 35.0;    // m
};

struct Config {
  struct Paths {
    std::string store;
    std::string masks;
    std::string out;
  } paths;
  Thresholds thresholds;
  struct Backend {
    std::string kind = "toy";
    std::string command;
    double timeout = 600.0;  // s
  } backend;
  std::size_t workers = 1;
  bool exclude_gapped = false;

  analytics::AnalysisParams analysis_params() const;
};

/// Throws InputError on unknown keys, wrong types or non-positive thresholds.
Config config_from_json(const nlohmann::json& doc);
nlohmann::json to_json(const Config& c);
void validate(const Config& c);

inline constexpr const char* kConfigEnv = "TRAFFICLENS_CONFIG";

/// `explicit_path` if given, else $TRAFFICLENS_CONFIG if set, else defaults.
Config load_config(const std::optional<std::filesystem::path>& explicit_path);

}  // namespace trafficlens
