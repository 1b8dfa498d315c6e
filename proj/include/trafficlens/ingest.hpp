#pragma once

// Loading, validation and preprocessing of probe trajectories and controller
// event logs.
//
// Trajectory files are CSV or newline-delimited JSON with the columns
//   journey_id, timestamp, lat, lon, speed_mps, ignition
// where timestamp is epoch seconds or ISO-8601 UTC, speed_mps may be empty and
// ignition is one of on/off/unknown. Files ending in .ndjson/.jsonl are read as
// NDJSON, everything else as CSV with a header row.
//
// ATSPM files are CSV with the columns
//   intersection_id, timestamp, event_code, parameter
// using the high-resolution controller log convention (0.1 s resolution,
// detector-on = event code 82).

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "trafficlens/masks.hpp"
#include "trafficlens/timeutil.hpp"
#include "trafficlens/trajectory.hpp"

namespace trafficlens::ingest {

inline constexpr double kMinJourneyDuration = 120.0;
inline constexpr double kMinFragmentLength = 150.0;
inline constexpr int kDetectorOn = 82;

struct Reject {
  std::string file;
  std::size_t row = 0;  // 1-based data row, 0 when the reject concerns a whole journey
  std::string reason;
};

struct TrajectoryLoad {
  std::vector<Journey> journeys;
  std::vector<Reject> rejects;
};

/// Groups rows by journey id, sorts each group by time and keeps the first row of
/// duplicate timestamps. Missing speeds are recomputed from consecutive positions.
/// Throws InputError when a file does not exist.
TrajectoryLoad load_trajectories(std::span<const std::filesystem::path> paths);

/// Drops ignition-off samples, then journeys shorter than `min_duration` seconds.
std::vector<Journey> filter_journeys(std::vector<Journey> journeys, double min_duration = kMinJourneyDuration);

/// Clips every journey against every mask and keeps fragments at least
/// `min_length` meters long, tagged with the mask id.
std::vector<Journey> clip_to_masks(std::span<const Journey> journeys, const masks::MaskSet& mask_set,
                                   double min_length = kMinFragmentLength);

struct AtspmEvent {
  std::string intersection_id;
  double t = 0.0;
  int event_code = 0;
  int parameter = 0;

  friend bool operator==(const AtspmEvent&, const AtspmEvent&) = default;
};

struct AtspmLoad {
  std::vector<AtspmEvent> events;
  std::vector<Reject> rejects;
};

AtspmLoad load_atspm(std::span<const std::filesystem::path> paths, const std::string& intersection_id,
                     const TimeRange& range);

/// Phase-wise detector actuation counts keyed by (phase, bin start).
struct PhaseVolumeTable {
  double bin = 3600.0;
  std::map<std::pair<int, std::int64_t>, std::int64_t> counts;
  std::map<std::int64_t, std::int64_t> unmapped;  // bin start -> count

  std::int64_t total() const;
  /// Copy with every bin start moved by `seconds` (used to align baseline weeks).
  PhaseVolumeTable shifted(std::int64_t seconds) const;
};

/// Counts detector-on events whose detector maps to a phase. Throws InputError
/// when `detector_to_phase` is empty.
PhaseVolumeTable phase_volumes(std::span<const AtspmEvent> events, const std::map<int, int>& detector_to_phase,
                               double bin = 3600.0, int detector_on_code = kDetectorOn);

void write_rejects(const std::filesystem::path& path, std::span<const Reject> rejects);

/// {"<detector>": <phase>, ...}
std::map<int, int> read_detector_map(const std::filesystem::path& path);

}  // namespace trafficlens::ingest
