#pragma once

// Grid-search sweeps over signal plans and demand.
//
// A grid is a set of named axes; every combination becomes one scenario whose
// id is a hash of its axis values. Scenarios run on a pull-based worker pool
// and their results are keyed by id, so the sweep outcome never depends on
// completion order or worker count.

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "trafficlens/signal.hpp"
#include "trafficlens/simkit.hpp"

namespace trafficlens::orchestrate {

/// Axis names understood by expand_grid.
const std::vector<std::string>& known_axes();

struct SweepConfig {
  signal::RingBarrierPlan base_plan;
  std::map<std::string, long> counts;             // route key -> vehicles per horizon
  std::vector<simkit::ApproachDemand> approaches;  // alternative demand form
  simkit::Horizon horizon;
  simkit::SimParams sim;
};

struct ParameterGrid {
  std::map<std::string, std::vector<nlohmann::json>> axes;  // listed order within each axis
};

/// Grid document: {"base_plan": plan, "demand": {"counts": {...}} or
/// {"approaches": [{"total": n, "split": {key: p}}]}, "horizon": [s, e],
/// "sim": {...}, "axes": {...}}. Throws InputError on unknown or empty axes.
std::pair<SweepConfig, ParameterGrid> grid_from_json(const nlohmann::json& doc);

struct ScenarioSpec {
  std::string scenario_id;
  nlohmann::json axes;  // canonical axis values
  signal::RingBarrierPlan plan;
  double offset = 0.0;  // progression offset: intersection k is shifted by k * offset
  double demand_scale = 1.0;
  std::uint64_t seed = 1;
  simkit::SpeedFactorModel speed;
};

struct DroppedScenario {
  nlohmann::json axes;
  std::vector<std::string> violations;
};

struct Expansion {
  std::vector<ScenarioSpec> scenarios;
  std::vector<DroppedScenario> dropped;
};

/// Canonical JSON text of a value: object keys sorted, every number as a double.
std::string canonical_json(const nlohmann::json& v);
/// First 16 hex digits of SHA-256 over canonical_json(axes).
std::string scenario_id(const nlohmann::json& axes);

/// Cartesian product in canonical order (axes sorted by name, values in listed
/// order, last axis varying fastest). Combinations whose plan fails validation
/// are dropped and reported. Throws Error if two scenarios hash to one id.
Expansion expand_grid(const SweepConfig& config, const ParameterGrid& grid);

/// Vehicles for a scenario: scaled demand sampled with the scenario seed.
std::vector<simkit::VehicleSpec> scenario_vehicles(const SweepConfig& config, const ScenarioSpec& s);
/// Timelines for every intersection of `net`, offsets progressing in network order.
simkit::SignalSet scenario_signals(const simkit::Network& net, const ScenarioSpec& s);

class Backend {
 public:
  virtual ~Backend() = default;
  virtual std::string name() const = 0;
  /// Returns a reason when the backend cannot run at all.
  virtual std::optional<std::string> unavailable() const { return std::nullopt; }
  /// `workdir` is the scenario's persistent output directory.
  virtual simkit::RunResult run(const SweepConfig& config, const ScenarioSpec& s,
                                const std::filesystem::path& workdir) const = 0;
};

class ToyBackend : public Backend {
 public:
  explicit ToyBackend(simkit::Network net);
  std::string name() const override { return "toy"; }
  simkit::RunResult run(const SweepConfig& config, const ScenarioSpec& s,
                        const std::filesystem::path& workdir) const override;

 private:
  simkit::Network net_;
};

class ExternalBackend : public Backend {
 public:
  ExternalBackend(simkit::Network net, std::string command_template, std::chrono::duration<double> timeout);
  std::string name() const override { return "external"; }
  std::optional<std::string> unavailable() const override;
  simkit::RunResult run(const SweepConfig& config, const ScenarioSpec& s,
                        const std::filesystem::path& workdir) const override;

 private:
  simkit::Network net_;
  std::string command_;
  std::chrono::duration<double> timeout_;
};

enum class Status { ok, failed };

struct SweepRow {
  std::string scenario_id;
  nlohmann::json axes;
  Status status = Status::ok;
  std::map<std::string, std::optional<double>> metrics;
  std::string error;
};

struct SweepResult {
  std::vector<SweepRow> rows;  // sorted by scenario_id
  std::map<std::string, std::string> best;  // metric -> scenario_id
  std::vector<DroppedScenario> dropped;
  // run bookkeeping, excluded from the canonical form
  std::size_t executed = 0;
  std::size_t resumed = 0;
  double wall_seconds = 0.0;
};

struct MetricInfo {
  std::string name;
  bool lower_is_better = true;
};
/// Registered metrics; extend by adding entries.
const std::vector<MetricInfo>& metric_registry();
const MetricInfo& metric_info(const std::string& name);

struct RunOptions {
  std::size_t workers = 1;
  std::optional<std::filesystem::path> out_dir;  // results/{id}/, manifest and CSV go here
  bool resume = false;
};

/// Throws BackendError before launching anything when the backend is unavailable.
SweepResult run_parallel(const SweepConfig& config, const Expansion& expansion, const Backend& backend,
                         const RunOptions& options);

/// Canonical sweep document (rows, best, dropped), byte-identical for equal outcomes.
nlohmann::json to_json(const SweepResult& r);
std::string results_csv(const SweepResult& r);

/// Argmin (or argmax) of `metric` over ok rows; ties -> smaller scenario_id.
/// Throws InputError when no ok row carries the metric.
const SweepRow& select_best(const SweepResult& result, const std::string& metric = "mean_corridor_travel_time");

}  // namespace trafficlens::orchestrate
