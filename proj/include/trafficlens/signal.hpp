#pragma once

// Fixed-time NEMA dual-ring signal plans.
//
//   ring 1:  1  2 | 3  4
//   ring 2:  5  6 | 7  8
//            -A-    -B-   barrier groups
//
// Odd phases are protected left turns, even phases through/right movements.
// Within each ring the two phases of a barrier group may run in either order
// (lead/lag), but both rings must reach every barrier at the same instant.

#include <array>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace trafficlens::signal {

inline constexpr int kPhases = 8;
inline constexpr double kDefaultYellow = 4.0;
inline constexpr double kDefaultAllRed = 2.0;
inline constexpr double kMinYellow = 3.0;

struct PhaseSpec {
  int phase = 0;
  double min_green = 0.0;
  double max_green = 0.0;
  double yellow = kDefaultYellow;
  double all_red = kDefaultAllRed;
};

using RingSequence = std::array<int, 4>;

struct RingBarrierPlan {
  std::array<PhaseSpec, kPhases> phases{};  // phases[i].phase == i + 1
  std::array<double, kPhases> splits{};     // green time per phase, indexed phase - 1
  double cycle_length = 0.0;
  RingSequence ring1{1, 2, 3, 4};
  RingSequence ring2{5, 6, 7, 8};

  const PhaseSpec& spec(int phase) const { return phases[static_cast<std::size_t>(phase - 1)]; }
  double split(int phase) const { return splits[static_cast<std::size_t>(phase - 1)]; }
  double& split(int phase) { return splits[static_cast<std::size_t>(phase - 1)]; }
  /// split + yellow + all-red
  double phase_time(int phase) const;
};

/// Barrier group 0 = {1,2,5,6}, 1 = {3,4,7,8}.
int barrier_group(int phase);
/// Ring 0 = {1..4}, 1 = {5..8}.
int ring_of(int phase);
bool compatible(int p, int q);

enum class ViolationKind {
  invalid_phase_spec,
  yellow_too_short,
  negative_all_red,
  split_below_min,
  split_above_max,
  ring_sum_mismatch,
  barrier_desync,
  conflicting_greens,
};

std::string_view to_string(ViolationKind k);

struct Violation {
  ViolationKind kind;
  std::optional<int> phase;  // or ring number (1/2) for ring_sum_mismatch, group (0/1) for barrier_desync
  std::string message;
};

/// Every violated invariant, not just the first. Empty means valid.
std::vector<Violation> validate_plan(const RingBarrierPlan& plan, double tolerance = 1e-6);

enum class Light : char { G = 'G', Y = 'y', R = 'r' };

struct Interval {
  double duration = 0.0;
  std::array<Light, kPhases> state{};
};

struct SignalTimeline {
  double cycle_length = 0.0;
  std::vector<Interval> intervals;

  /// Start time of every interval within the cycle.
  std::vector<double> starts() const;
};

/// Throws InputError when the plan does not validate.
SignalTimeline compile_plan(const RingBarrierPlan& plan);

/// State at absolute time t for a timeline shifted by `offset` seconds.
/// Interval boundaries belong to the later interval.
std::array<Light, kPhases> state_at(const SignalTimeline& timeline, double t, double offset = 0.0);

/// Green window of one phase within the cycle: [start, start + length), possibly
/// wrapping past the cycle end. std::nullopt when the phase never shows green.
struct GreenWindow {
  double start = 0.0;
  double length = 0.0;
};
std::optional<GreenWindow> green_window(const SignalTimeline& timeline, int phase);

/// Earliest t >= t0 at which `phase` shows green and at least `lost_time`
/// seconds have passed since its green onset. +infinity when that never happens.
double earliest_service(const SignalTimeline& timeline, int phase, double t0, double offset = 0.0,
                        double lost_time = 0.0);

/// Same computation for a precomputed green window.
double earliest_service(const GreenWindow& window, double cycle, double t0, double offset, double lost_time);

using MovementMap = std::map<int, std::vector<int>>;  // phase -> signal-head indices

/// Standard 8-phase head layout: phase p drives head p - 1.
MovementMap default_movement_map();

/// Traffic-light program XML (one <phase> element per interval).
std::string emit_tls_program(const SignalTimeline& timeline, const MovementMap& movement_map,
                             const std::string& tls_id = "0", const std::string& program_id = "0",
                             double offset = 0.0);

struct TlsPhase {
  double duration;
  std::string state;
};
/// Parses <phase> elements of the first <tlLogic> in an emitted document.
std::vector<TlsPhase> parse_tls_program(const std::string& xml);

/// Plan JSON: {"phases": [{"phase","min_green","max_green","yellow","all_red"}...],
///             "splits": [8 numbers] or {"<phase>": s}, "cycle_length": c,
///             optional "ring1"/"ring2" sequences}.
RingBarrierPlan plan_from_json(const nlohmann::json& doc);
nlohmann::json to_json(const RingBarrierPlan& plan);

}  // namespace trafficlens::signal
