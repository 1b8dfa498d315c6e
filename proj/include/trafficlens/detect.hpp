#pragma once

// Interruption detection.
//
// Trajectory route: each clipped journey becomes a feature vector; vectors of
// the current window are pooled with the same window one and two weeks earlier,
// z-score normalized, and scored with the angle-based outlier factor (ABOF)
// restricted to k nearest neighbours. Low ABOF means the rest of the data is
// seen under a narrow range of angles, i.e. the point lies outside the bulk.
//
// Controller-log route: phase volumes per hour are compared with the mean of
// the same hour in the baseline weeks.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "trafficlens/analytics.hpp"
#include "trafficlens/ingest.hpp"

namespace trafficlens::detect {

enum class Cohort { current, week_minus_1, week_minus_2 };
std::string_view to_string(Cohort c);

struct FeatureVector {
  std::string journey_id;
  double stopped_time = 0.0;  // s
  double avg_speed = 0.0;     // m/s
  double speed_std = 0.0;     // m/s, population
  double travel_time = 0.0;   // s
  Cohort cohort = Cohort::current;

  std::vector<double> values() const { return {stopped_time, avg_speed, speed_std, travel_time}; }
};

inline const std::vector<std::string>& feature_names() {
  static const std::vector<std::string> names{"stopped_time", "avg_speed", "speed_std", "travel_time"};
  return names;
}

/// Throws InputError for fragments with fewer than two samples.
FeatureVector featurize(const Journey& fragment, Cohort cohort = Cohort::current,
                        const analytics::StopParams& stops = {});

using Point = std::vector<double>;

/// Per-feature z-scores over all rows; zero-variance features map to 0.
/// Throws InputError for fewer than two rows.
std::vector<Point> normalize(std::span<const Point> rows);
std::vector<Point> normalize(std::span<const FeatureVector> vectors);

/// FastABOD: weighted variance over neighbour pairs {B, C} of
/// <AB,AC> / (|AB|^2 |AC|^2) with weights 1 / (|AB| |AC|).
/// k is clamped to n - 1. Throws InputError when n < 3, k < 2, or every pair
/// of some point degenerates (coincident points).
std::vector<double> abof(std::span<const Point> points, std::size_t k = 10);

/// Number of neighbours abof() actually uses for n points.
std::size_t effective_k(std::size_t n, std::size_t k);

struct OutlierScore {
  std::string journey_id;
  double abof = 0.0;
  Cohort cohort = Cohort::current;
  bool flagged = false;
};

std::vector<OutlierScore> abof_scores(std::span<const FeatureVector> vectors, std::size_t k = 10);

/// Flags floor(contamination * n_current) lowest-ABOF current-cohort points;
/// ties go to the lexicographically smaller journey id.
std::vector<OutlierScore> flag_outliers(std::vector<OutlierScore> scores, double contamination = 0.1);

// ---------------------------------------------------------------------------

struct PhaseDeviation {
  std::string intersection_id;
  int phase = 0;
  std::int64_t hour = 0;  // bin start, epoch seconds
  std::int64_t current = 0;
  double baseline_mean = 0.0;
  double score = 0.0;
  bool flagged = false;
};

struct NoBaseline {
  int phase = 0;
  std::int64_t hour = 0;
  std::int64_t current = 0;
};

struct AtspmComparison {
  std::vector<PhaseDeviation> deviations;
  std::vector<NoBaseline> no_baseline;
};

/// Baseline tables must already be aligned to the current bins (see
/// PhaseVolumeTable::shifted). A (phase, bin) key missing from a baseline is
/// treated as unavailable for that week.
AtspmComparison atspm_interruption(const std::string& intersection_id, const ingest::PhaseVolumeTable& current,
                                   std::span<const ingest::PhaseVolumeTable> baselines, double threshold = 0.4);

}  // namespace trafficlens::detect
