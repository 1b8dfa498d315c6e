#pragma once

// Report bundle for one (intersection, window):
//   stops.csv od.csv tt.csv queues.csv braking.csv report.json [stops.svg]

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "trafficlens/analytics.hpp"
#include "trafficlens/timeutil.hpp"

namespace trafficlens::analytics {

struct AnalysisParams {
  StopParams stops;
  double queue_min_stop = 10.0;
  BrakingParams braking;
  double boundary_tolerance = 1.0;
  bool exclude_gapped = false;
  double gap_threshold = 30.0;
};

struct Unclassified {
  std::string journey_id;
  std::string reason;
};

struct AnalysisReport {
  std::string intersection_id;
  TimeRange window;
  std::size_t fragments = 0;
  std::size_t gapped = 0;
  std::size_t gapped_excluded = 0;
  std::vector<StopEvent> stops;
  std::vector<MovementRecord> movements;
  std::vector<Unclassified> unclassified;
  DirectionMatrix<long> od{};
  DirectionMatrix<std::optional<double>> travel_time{};
  DirectionMatrix<std::optional<double>> travel_time_median{};
  QueueReport queues;
  std::vector<BrakingEvent> braking;

  bool empty() const { return fragments == 0; }
};

/// Runs every metric over fragments clipped to `mask`. Aggregation is a fold
/// over fragments sorted by (journey id, part).
AnalysisReport analyze(std::span<const Journey> fragments, const masks::Mask& mask, const TimeRange& window,
                       const AnalysisParams& params = {});

nlohmann::json to_json(const AnalysisReport& report, const geo::LocalProjection& proj);

/// Writes the bundle into `dir` (created if needed). `config` is echoed into report.json.
void write_bundle(const std::filesystem::path& dir, const AnalysisReport& report, const geo::LocalProjection& proj,
                  const nlohmann::json& config, bool svg = false);

/// Histogram of stop durations as a standalone SVG document.
std::string stop_histogram_svg(std::span<const StopEvent> stops, double bin_width = 10.0);

}  // namespace trafficlens::analytics
