#pragma once

// Demand calibration and simulation backends.
//
// The built-in backend is a discrete-event queue model, not a car-following
// simulator: vehicles cruise each link at free_speed * speed_factor, join a
// FIFO lane queue at the stop line and discharge at a fixed saturation
// headway while their phase is green. It exists so grid searches and the
// sweep runner can be exercised at desk scale; run_external hands the same
// scenario to an outside microsimulator.

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "trafficlens/signal.hpp"

namespace trafficlens::simkit {

enum class Turn { left, through, right };
std::string_view to_string(Turn t);
Turn parse_turn(std::string_view s);

struct Link {
  std::string id;
  std::string from;  // node or intersection id, informational
  std::string to;
  double length = 0.0;      // m
  double free_speed = 0.0;  // m/s
  /// Vehicles the exclusive left-turn bay holds; further left-turners wait in
  /// the shared lane and block it. Negative means unlimited.
  int left_turn_buffer_capacity = -1;
};

struct Movement {
  std::string id;
  std::string intersection;
  std::string in_link;
  std::optional<std::string> out_link;  // absent: vehicle leaves the model at the stop line
  int phase = 2;
  Turn turn = Turn::through;
};

struct Network {
  std::vector<std::string> intersections;
  std::vector<Link> links;
  std::vector<Movement> movements;
  std::map<std::string, std::vector<std::string>> routes;  // route id -> movement ids

  const Link* link(const std::string& id) const;
  const Movement* movement(const std::string& id) const;
  /// Expands a route key (route id or single movement id) to movement ids.
  std::vector<std::string> resolve(const std::string& key) const;
};

/// Throws InputError on dangling references, non-positive lengths/speeds, or
/// phases outside 1..8.
void validate_network(const Network& net);
Network network_from_json(const nlohmann::json& doc);
nlohmann::json to_json(const Network& net);

struct VehicleSpec {
  std::string id;
  double depart = 0.0;             // s
  std::vector<std::string> route;  // route ids and/or movement ids, expanded in order
  double speed_factor = 1.0;
};

struct SpeedFactorModel {
  double mean = 1.0;
  double std = 0.0;
};

inline constexpr double kMinSpeedFactor = 0.5;
inline constexpr double kMaxSpeedFactor = 2.0;

/// Ratios max_speed / speed_limit: mean and sample standard deviation (n - 1;
/// 0 for a single observation).
SpeedFactorModel fit_speed_factor(std::span<const double> max_speeds, double speed_limit);

/// Largest-remainder integer split of `total` by `probabilities` (must sum to 1
/// within 1e-6). Remainder ties go to the earlier index.
std::vector<long> largest_remainder(long total, std::span<const double> probabilities);

struct ApproachDemand {
  long total = 0;
  std::vector<std::pair<std::string, double>> split;  // route key -> probability
};

struct Horizon {
  double start = 0.0;
  double end = 3600.0;
};

/// Exactly counts[key] vehicles per key, departures uniform in the horizon,
/// speed factors from a truncated normal. Keys are processed in sorted order so
/// the result does not depend on how the caller built the map. Output sorted by
/// (depart, id). Vehicle ids are "<key>#<n>".
std::vector<VehicleSpec> sample_routes(const std::map<std::string, long>& counts, const Horizon& horizon,
                                       std::uint64_t seed, const SpeedFactorModel& speed = {});

/// Converts approach totals plus split probabilities into per-key counts and
/// samples them. Keys appearing in several approaches are summed.
std::vector<VehicleSpec> sample_routes(const std::vector<ApproachDemand>& approaches, const Horizon& horizon,
                                       std::uint64_t seed, const SpeedFactorModel& speed = {});

/// Portable RNG pieces (the standard distributions are implementation-defined).
double uniform01(std::uint64_t bits);

struct SignalControl {
  signal::SignalTimeline timeline;
  double offset = 0.0;
};
using SignalSet = std::map<std::string, SignalControl>;  // intersection id -> control

struct SimParams {
  double saturation_headway = 2.0;  // s/veh
  double startup_lost_time = 2.0;   // s per green onset
  std::optional<double> horizon_end;  // absolute s; vehicles not out by then are incomplete
};

struct VehicleResult {
  std::string id;
  double depart = 0.0;
  std::optional<double> arrive;
  double travel_time = 0.0;  // valid when arrive is set
  double delay = 0.0;        // travel_time minus free-flow time
  int stops = 0;             // queues at which the vehicle had to wait
};

struct RunResult {
  std::string scenario_id;
  std::vector<VehicleResult> vehicles;  // in input order
  std::size_t injected = 0;
  std::size_t completed = 0;
  std::size_t incomplete = 0;
  double mean_corridor_travel_time = 0.0;
  double p95_travel_time = 0.0;
  double mean_delay = 0.0;
  std::map<std::string, double> approach_delay;  // "<intersection>/<in_link>" -> mean queue delay
  double wall_seconds = 0.0;                     // not part of the canonical result

  /// Named aggregate for metric lookups; std::nullopt for unknown names.
  std::optional<double> metric(const std::string& name) const;
};

/// Fills completed/incomplete/means from `vehicles`.
void summarize(RunResult& r);

nlohmann::json to_json(const RunResult& r, bool include_vehicles = true);
RunResult run_result_from_json(const nlohmann::json& doc);

RunResult run_toy_sim(const Network& net, const SignalSet& signals, std::span<const VehicleSpec> vehicles,
                      const SimParams& params = {});

// ---------------------------------------------------------------------------
// External backend

struct ExternalScenario {
  std::string scenario_id;
  Network network;
  std::map<std::string, std::pair<signal::SignalTimeline, double>> programs;  // intersection -> (timeline, offset)
  std::vector<VehicleSpec> vehicles;
};

/// Routes XML: one <vehicle> per spec with its edge list.
std::string routes_xml(const Network& net, std::span<const VehicleSpec> vehicles);

/// Trip-info XML: <tripinfo id depart arrival duration [timeLoss] [waitingCount]>.
/// Unknown attributes are ignored.
std::vector<VehicleResult> parse_tripinfo(const std::string& xml);

/// Writes scenario files into `workdir`, runs the templated command through
/// /bin/sh (${config} and ${output} are substituted) and parses its trip-info
/// output. Nonzero exit -> BackendError, timeout -> TimeoutError (process group
/// killed), bad output -> ParseError.
RunResult run_external(const ExternalScenario& scenario, const std::string& command_template,
                       const std::filesystem::path& workdir, std::chrono::duration<double> timeout);

}  // namespace trafficlens::simkit
