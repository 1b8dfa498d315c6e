#pragma once

// Intersection-level descriptive metrics computed from clipped journeys.

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "trafficlens/masks.hpp"
#include "trafficlens/trajectory.hpp"

namespace trafficlens::analytics {

using masks::Direction;

inline constexpr double kGravity = 9.80665;

struct StopParams {
  double speed_threshold = 1.0;  // m/s
  double min_duration = 3.0;     // s
};

struct StopEvent {
  std::string journey_id;
  double t_start = 0.0;
  double duration = 0.0;
  PlanarPoint location;
  std::optional<Direction> approach;
};

/// Maximal runs of samples below the speed threshold. A stopped sample holds
/// until the next sample, so a run lasts from its first sample to the sample
/// that ends it (or to its own last sample at the end of the journey).
std::vector<StopEvent> detect_stops(const Journey& journey, const StopParams& params = {});

struct MovementRecord {
  std::string journey_id;
  Direction origin;
  Direction dest;
  double travel_time = 0.0;
  double t_entry = 0.0;
};

struct MovementResult {
  std::optional<MovementRecord> record;
  std::string reason;  // why the fragment could not be classified
};

/// Origin = inbound travel direction of the approach leg at the first sample,
/// dest = outbound travel direction of the leg at the last sample. Both end
/// samples must lie on the mask boundary within `boundary_tolerance` meters.
MovementResult classify_movement(const Journey& fragment, const masks::Mask& mask,
                                 double boundary_tolerance = 1.0);

template <class T>
using DirectionMatrix = std::array<std::array<T, 4>, 4>;

inline std::size_t index(Direction d) { return static_cast<std::size_t>(d); }

DirectionMatrix<long> od_matrix(std::span<const MovementRecord> records);

/// Mean travel time per cell; cells without records are std::nullopt.
DirectionMatrix<std::optional<double>> travel_time_matrix(std::span<const MovementRecord> records);

/// Median per cell, same absent convention.
DirectionMatrix<std::optional<double>> travel_time_median_matrix(std::span<const MovementRecord> records);

struct QueueDistribution {
  Direction approach;
  double mu = 0.0;
  double sigma = 0.0;
  std::size_t n = 0;
};

struct QueueReport {
  std::vector<QueueDistribution> distributions;  // ordered NB, SB, EB, WB
  std::size_t excluded = 0;                      // long stops with no usable approach
};

/// Normal fit (sample mean, n-1 standard deviation) of stop-bar distances of
/// stops longer than `min_stop` seconds, per approach.
QueueReport queue_distributions(std::span<const StopEvent> stops, const masks::Mask& mask, double min_stop = 10.0);

struct BrakingParams {
  double threshold_g = 0.47;
  double sustain = 2.0;  // s
};

struct BrakingEvent {
  std::string journey_id;
  double t_start = 0.0;
  double duration = 0.0;
  double peak_decel = 0.0;  // m/s^2, negative
  PlanarPoint location;
};

/// Windows of consecutive segments that all decelerate at least threshold_g
/// and together span at least `sustain` seconds.
std::vector<BrakingEvent> detect_braking(const Journey& journey, const BrakingParams& params = {});

/// Sets each stop's approach to the fragment origin when the stop happens
/// before the vehicle's closest pass to the intersection center.
void attribute_stops(std::vector<StopEvent>& stops, const Journey& fragment, const MovementRecord& movement,
                     const PlanarPoint& center);

}  // namespace trafficlens::analytics
