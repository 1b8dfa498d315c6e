#pragma once

// Seeded generators for desk-scale verification: probe trajectories through a
// signalized four-leg intersection (with a ground-truth sidecar), controller
// event logs with known phase volumes, and toy simulation networks.

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "trafficlens/ingest.hpp"
#include "trafficlens/masks.hpp"
#include "trafficlens/signal.hpp"
#include "trafficlens/simkit.hpp"

namespace trafficlens::synth {

inline constexpr double kDefaultStart = 1709658000.0;  // 2024-03-05T17:00:00Z

signal::RingBarrierPlan textbook_plan();

/// Phase serving a movement under the standard NEMA assignment
/// (2/6 NB/SB through, 4/8 EB/WB through, 5/1 NB/SB left, 7/3 EB/WB left;
/// right turns run with the through phase).
int nema_phase(masks::Direction origin, simkit::Turn turn);
masks::Direction turn_destination(masks::Direction origin, simkit::Turn turn);

struct TrajectoryParams {
  std::uint64_t seed = 1;
  double start = kDefaultStart;
  double duration = 3600.0;
  std::string intersection_id = "I1";
  GeoPoint center{-81.0, 29.0};
  double leg_length = 1000.0;
  std::map<masks::Direction, double> volumes{  // vehicles per hour entering on each approach
      {masks::Direction::NB, 300.0},
      {masks::Direction::SB, 280.0},
      {masks::Direction::EB, 220.0},
      {masks::Direction::WB, 240.0}};
  double p_left = 0.2, p_through = 0.65, p_right = 0.15;
  double cruise_speed = 14.0;   // mean, m/s
  double cruise_spread = 1.5;   // +- uniform, m/s
  double sample_interval = 3.0;
  double decel = 2.5, accel = 2.0;  // m/s^2
  double jam_spacing = 7.5;         // m per queued vehicle
  double mask_radius = 125.0;       // for the truth crossing times
  signal::RingBarrierPlan plan = textbook_plan();
  double saturation_headway = 2.0, startup_lost_time = 2.0;
  int braking_events = 5;  // injected 15 m/s through vehicles braking at 0.47 g for 2 s
  int blockages = 0;       // stopped vehicles whose stop is stretched 5x
  std::string id_prefix;   // prepended to journey ids
};

struct TrajectorySet {
  std::vector<Journey> journeys;  // lon/lat, speed and ignition filled; xy left at 0
  nlohmann::json truth;
};

TrajectorySet generate_trajectories(const TrajectoryParams& p);

/// Two straight centerlines crossing at the center, and the center point, as
/// GeoJSON FeatureCollections suitable for the mask builder.
nlohmann::json roads_geojson(const TrajectoryParams& p);
nlohmann::json intersections_geojson(const TrajectoryParams& p);

/// Writes trajectories.csv, truth.json, roads.geojson, intersections.geojson
/// and signal_plan.json into `dir`.
void write_trajectory_set(const std::filesystem::path& dir, const TrajectoryParams& p);

/// Trajectory CSV in the ingest format.
std::string trajectories_csv(const std::vector<Journey>& journeys);

struct AtspmParams {
  std::uint64_t seed = 1;
  std::string intersection_id = "I1";
  double start = kDefaultStart;
  int hours = 1;
  /// Detector-on events per phase per hour.
  std::map<int, long> volumes{{1, 40}, {2, 300}, {3, 35}, {4, 180}, {5, 45}, {6, 280}, {7, 30}, {8, 200}};
  int detectors_per_phase = 2;
  long unmapped_per_hour = 5;  // actuations on a detector missing from the map
};

struct AtspmSet {
  std::vector<ingest::AtspmEvent> events;  // sorted by time
  std::map<int, int> detector_to_phase;
};

AtspmSet generate_atspm(const AtspmParams& p);
/// Writes atspm.csv and detector_map.json into `dir`.
void write_atspm_set(const std::filesystem::path& dir, const AtspmParams& p);

struct NetworkParams {
  int intersections = 1;  // along an east-west corridor
  double spacing = 400.0;
  double leg_length = 500.0;
  double free_speed = 14.0;
  int left_turn_buffer = 5;
};

simkit::Network generate_network(const NetworkParams& p);
std::string movement_id(const std::string& intersection, masks::Direction origin, simkit::Turn turn);
/// Example sweep grid over the textbook plan for `net`.
nlohmann::json example_grid(const simkit::Network& net);
/// Writes network.json and grid.json into `dir`.
void write_network_set(const std::filesystem::path& dir, const NetworkParams& p);

}  // namespace trafficlens::synth
