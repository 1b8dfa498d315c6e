#include "trafficlens/orchestrate.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>
#include <unistd.h>

#include "trafficlens/csv.hpp"
#include "trafficlens/error.hpp"
#include "trafficlens/geojson.hpp"

namespace trafficlens::orchestrate {

namespace fs = std::filesystem;
using nlohmann::json;

const std::vector<std::string>& known_axes() {
  static const std::vector<std::string> axes{"cycle_length", "demand_scale", "offset", "seed", "speed_factor", "splits"};
  return axes;
}

namespace {

json canonicalize(const json& v) {
  if (v.is_number()) return json(v.get<double>());
  if (v.is_array()) {
    json out = json::array();
    for (const auto& x : v) out.push_back(canonicalize(x));
    return out;
  }
  if (v.is_object()) {
    json out = json::object();
    for (const auto& [k, x] : v.items()) out[k] = canonicalize(x);
    return out;
  }
  return v;
}

std::string status_name(Status s) { return s == Status::ok ? "ok" : "failed"; }

double ring_available(const signal::RingBarrierPlan& plan, int ring, double cycle) {
  double a = cycle;
  for (int p = 1 + 4 * ring; p <= 4 + 4 * ring; ++p) a -= plan.spec(p).yellow + plan.spec(p).all_red;
  return a;
}

std::array<double, signal::kPhases> eight(const json& v, const char* what) {
  if (!v.is_array() || v.size() != signal::kPhases) throw InputError(std::string(what) + " needs 8 numbers");
  std::array<double, signal::kPhases> out{};
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = v[i].get<double>();
  return out;
}

// Splits for one combination. Schemes are either 8 green times in seconds or
// {"fractions": [...]}, shares of each ring's green time after clearances.
std::array<double, signal::kPhases> scheme_splits(const signal::RingBarrierPlan& base, const json* scheme,
                                                   double cycle) {
  std::array<double, signal::kPhases> frac{};
  if (scheme) {
    const json& body = scheme->is_object() && scheme->contains("value") ? scheme->at("value") : *scheme;
    if (body.is_array()) return eight(body, "split scheme");
    if (!body.is_object() || !body.contains("fractions"))
      throw InputError("split scheme must be 8 seconds or {\"fractions\": [...]}");
    frac = eight(body.at("fractions"), "split fractions");
  } else {
    if (cycle == base.cycle_length) return base.splits;
    for (int p = 1; p <= signal::kPhases; ++p) {
      const int r = signal::ring_of(p);
      frac[static_cast<std::size_t>(p - 1)] = base.split(p) / ring_available(base, r, base.cycle_length);
    }
  }
  std::array<double, signal::kPhases> out{};
  for (int p = 1; p <= signal::kPhases; ++p)
    out[static_cast<std::size_t>(p - 1)] =
        frac[static_cast<std::size_t>(p - 1)] * ring_available(base, signal::ring_of(p), cycle);
  return out;
}

std::string sha256_hex(const std::string& text) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(text.data(), text.size(), md, &len, EVP_sha256(), nullptr) != 1)
    throw Error("SHA-256 computation failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 15];
  }
  return out;
}

void write_text(const fs::path& p, const std::string& text) {
  fs::create_directories(p.parent_path());
  const fs::path tmp = p.string() + ".tmp";
  {
    std::ofstream out(tmp);
    if (!out) throw Error("cannot write " + tmp.string());
    out << text;
  }
  fs::rename(tmp, p);
}

std::string axis_text(const json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number()) return csv::format_double(v.get<double>());
  return canonical_json(v);
}

}  // namespace

std::string canonical_json(const json& v) { return canonicalize(v).dump(); }

std::string scenario_id(const json& axes) { return sha256_hex(canonical_json(axes)).substr(0, 16); }

std::pair<SweepConfig, ParameterGrid> grid_from_json(const json& doc) {
  try {
    if (!doc.is_object()) throw InputError("grid must be a JSON object");
    static const std::set<std::string> keys{"base_plan", "demand", "horizon", "sim", "axes"};
    for (const auto& [k, v] : doc.items())
      if (!keys.count(k)) throw InputError("unknown grid key '" + k + "'");
    SweepConfig cfg;
    cfg.base_plan = signal::plan_from_json(doc.at("base_plan"));
    const auto& demand = doc.at("demand");
    if (demand.contains("counts")) cfg.counts = demand.at("counts").get<std::map<std::string, long>>();
    if (demand.contains("approaches"))
      for (const auto& a : demand.at("approaches")) {
        simkit::ApproachDemand d;
        d.total = a.at("total").get<long>();
        for (const auto& [k, p] : a.at("split").items()) d.split.emplace_back(k, p.get<double>());
        cfg.approaches.push_back(std::move(d));
      }
    if (cfg.counts.empty() && cfg.approaches.empty()) throw InputError("grid demand needs counts or approaches");
    if (doc.contains("horizon")) {
      const auto& h = doc.at("horizon");
      cfg.horizon = {h.at(0).get<double>(), h.at(1).get<double>()};
    }
    if (doc.contains("sim")) {
      const auto& s = doc.at("sim");
      cfg.sim.saturation_headway = s.value("saturation_headway", cfg.sim.saturation_headway);
      cfg.sim.startup_lost_time = s.value("startup_lost_time", cfg.sim.startup_lost_time);
      if (s.contains("horizon_end")) cfg.sim.horizon_end = s.at("horizon_end").get<double>();
    }
    ParameterGrid grid;
    if (doc.contains("axes")) {
      for (const auto& [name, values] : doc.at("axes").items()) {
        if (std::find(known_axes().begin(), known_axes().end(), name) == known_axes().end())
          throw InputError("unknown grid axis '" + name + "'");
        std::vector<json> vals;
        if (name == "splits" && values.is_object()) {
          for (const auto& [n, v] : values.items()) vals.push_back({{"name", n}, {"value", v}});
        } else if (values.is_array()) {
          for (const auto& v : values) vals.push_back(v);
        } else {
          throw InputError("axis '" + name + "' must be a list");
        }
        if (vals.empty()) throw InputError("axis '" + name + "' is empty");
        grid.axes[name] = std::move(vals);
      }
    }
    return {cfg, grid};
  } catch (const json::exception& e) {
    throw InputError(std::string("bad grid JSON: ") + e.what());
  }
}

Expansion expand_grid(const SweepConfig& config, const ParameterGrid& grid) {
  for (const auto& [name, values] : grid.axes) {
    if (std::find(known_axes().begin(), known_axes().end(), name) == known_axes().end())
      throw InputError("unknown grid axis '" + name + "'");
    if (values.empty()) throw InputError("axis '" + name + "' is empty");
  }
  std::vector<std::pair<std::string, const std::vector<json>*>> axes;
  for (const auto& [name, values] : grid.axes) axes.emplace_back(name, &values);  // std::map: sorted

  Expansion out;
  std::set<std::string> ids;
  std::vector<std::size_t> idx(axes.size(), 0);
  for (;;) {
    json values = json::object();
    for (std::size_t a = 0; a < axes.size(); ++a) values[axes[a].first] = (*axes[a].second)[idx[a]];

    ScenarioSpec s;
    s.axes = canonicalize(values);
    s.plan = config.base_plan;
    try {
      const double cycle = values.contains("cycle_length") ? values["cycle_length"].get<double>() : config.base_plan.cycle_length;
      s.plan.cycle_length = cycle;
      s.plan.splits = scheme_splits(config.base_plan, values.contains("splits") ? &values["splits"] : nullptr, cycle);
      if (values.contains("offset")) s.offset = values["offset"].get<double>();
      if (values.contains("demand_scale")) s.demand_scale = values["demand_scale"].get<double>();
      if (values.contains("seed")) s.seed = values["seed"].get<std::uint64_t>();
      if (values.contains("speed_factor")) {
        const auto& m = values["speed_factor"];
        s.speed = {m.at("mean").get<double>(), m.value("std", 0.0)};
      }
    } catch (const json::exception& e) {
      throw InputError(std::string("bad axis value: ") + e.what());
    }
    if (!(s.demand_scale >= 0.0)) throw InputError("demand_scale must be non-negative");

    const auto violations = signal::validate_plan(s.plan);
    if (violations.empty()) {
      s.scenario_id = scenario_id(s.axes);
      if (!ids.insert(s.scenario_id).second) throw Error("scenario id collision: " + s.scenario_id);
      out.scenarios.push_back(std::move(s));
    } else {
      DroppedScenario d;
      d.axes = s.axes;
      for (const auto& v : violations) d.violations.push_back(v.message);
      out.dropped.push_back(std::move(d));
    }

    // odometer, last axis fastest
    std::size_t a = axes.size();
    while (a > 0) {
      --a;
      if (++idx[a] < axes[a].second->size()) break;
      idx[a] = 0;
      if (a == 0) return out;
    }
    if (axes.empty()) return out;
  }
}

std::vector<simkit::VehicleSpec> scenario_vehicles(const SweepConfig& config, const ScenarioSpec& s) {
  if (!config.approaches.empty()) {
    auto scaled = config.approaches;
    for (auto& a : scaled) a.total = std::llround(static_cast<double>(a.total) * s.demand_scale);
    auto v = simkit::sample_routes(scaled, config.horizon, s.seed, s.speed);
    if (config.counts.empty()) return v;
    // both forms given: sample the explicit counts on a derived stream
    std::map<std::string, long> counts;
    for (const auto& [k, n] : config.counts) counts[k] = std::llround(static_cast<double>(n) * s.demand_scale);
    auto w = simkit::sample_routes(counts, config.horizon, s.seed ^ 0x9e3779b97f4a7c15ULL, s.speed);
    v.insert(v.end(), w.begin(), w.end());
    std::sort(v.begin(), v.end(), [](const auto& a, const auto& b) { return std::tie(a.depart, a.id) < std::tie(b.depart, b.id); });
    return v;
  }
  std::map<std::string, long> counts;
  for (const auto& [k, n] : config.counts) counts[k] = std::llround(static_cast<double>(n) * s.demand_scale);
  return simkit::sample_routes(counts, config.horizon, s.seed, s.speed);
}

simkit::SignalSet scenario_signals(const simkit::Network& net, const ScenarioSpec& s) {
  const auto timeline = signal::compile_plan(s.plan);
  simkit::SignalSet out;
  for (std::size_t k = 0; k < net.intersections.size(); ++k)
    out[net.intersections[k]] = {timeline, static_cast<double>(k) * s.offset};
  return out;
}

ToyBackend::ToyBackend(simkit::Network net) : net_(std::move(net)) { simkit::validate_network(net_); }

simkit::RunResult ToyBackend::run(const SweepConfig& config, const ScenarioSpec& s, const fs::path&) const {
  const auto vehicles = scenario_vehicles(config, s);
  auto r = simkit::run_toy_sim(net_, scenario_signals(net_, s), vehicles, config.sim);
  r.scenario_id = s.scenario_id;
  return r;
}

ExternalBackend::ExternalBackend(simkit::Network net, std::string command_template,
                                 std::chrono::duration<double> timeout)
    : net_(std::move(net)), command_(std::move(command_template)), timeout_(timeout) {}

std::optional<std::string> ExternalBackend::unavailable() const {
  if (command_.find("${config}") == std::string::npos || command_.find("${output}") == std::string::npos)
    return "command template needs ${config} and ${output}";
  std::istringstream in(command_);
  std::string exe;
  in >> exe;
  if (exe.empty()) return "empty command template";
  auto runnable = [](const fs::path& p) { return access(p.c_str(), X_OK) == 0 && !fs::is_directory(p); };
  if (exe.find('/') != std::string::npos) {
    if (!runnable(exe)) return "'" + exe + "' is not executable";
    return std::nullopt;
  }
  const char* path = std::getenv("PATH");
  std::istringstream dirs(path ? path : "");
  for (std::string d; std::getline(dirs, d, ':');)
    if (!d.empty() && runnable(fs::path(d) / exe)) return std::nullopt;
  return "'" + exe + "' not found on PATH";
}

simkit::RunResult ExternalBackend::run(const SweepConfig& config, const ScenarioSpec& s, const fs::path& workdir) const {
  simkit::ExternalScenario sc;
  sc.scenario_id = s.scenario_id;
  sc.network = net_;
  const auto timeline = signal::compile_plan(s.plan);
  for (std::size_t k = 0; k < net_.intersections.size(); ++k)
    sc.programs[net_.intersections[k]] = {timeline, static_cast<double>(k) * s.offset};
  sc.vehicles = scenario_vehicles(config, s);
  return simkit::run_external(sc, command_, workdir, timeout_);
}

const std::vector<MetricInfo>& metric_registry() {
  static const std::vector<MetricInfo> metrics{{"mean_corridor_travel_time", true},
                                               {"mean_delay", true},
                                               {"p95_travel_time", true},
                                               {"throughput", false},
                                               {"incomplete", true}};
  return metrics;
}

const MetricInfo& metric_info(const std::string& name) {
  for (const auto& m : metric_registry())
    if (m.name == name) return m;
  throw InputError("unknown metric '" + name + "'");
}

namespace {

SweepRow row_from(const ScenarioSpec& s, const simkit::RunResult& r) {
  SweepRow row;
  row.scenario_id = s.scenario_id;
  row.axes = s.axes;
  row.status = Status::ok;
  for (const auto& m : metric_registry()) row.metrics[m.name] = r.metric(m.name);
  return row;
}

std::optional<SweepRow> load_previous(const fs::path& dir, const ScenarioSpec& s) {
  const fs::path status = dir / "status.json", result = dir / "result.json";
  if (!fs::exists(status) || !fs::exists(result)) return std::nullopt;
  try {
    const json st = geojson::read_json(status);
    if (st.value("status", "") != "ok" || st.value("scenario_id", "") != s.scenario_id) return std::nullopt;
    return row_from(s, simkit::run_result_from_json(geojson::read_json(result)));
  } catch (const Error&) {
    return std::nullopt;
  }
}

}  // namespace

SweepResult run_parallel(const SweepConfig& config, const Expansion& expansion, const Backend& backend,
                         const RunOptions& options) {
  if (options.workers < 1) throw InputError("workers must be >= 1");
  if (const auto why = backend.unavailable()) throw BackendError("backend '" + backend.name() + "' unavailable: " + *why);
  const auto t0 = std::chrono::steady_clock::now();
  const auto& scenarios = expansion.scenarios;
  const std::size_t n = scenarios.size();

  fs::path scratch;
  if (!options.out_dir) {
    scratch = fs::temp_directory_path() / ("trafficlens-sweep-" + std::to_string(::getpid()) + "-" +
                                           std::to_string(std::chrono::steady_clock::now().time_since_epoch().count()));
  }
  const fs::path root = options.out_dir ? *options.out_dir : scratch;
  auto run_dir = [&](const ScenarioSpec& s) { return root / "results" / s.scenario_id; };

  std::vector<SweepRow> rows(n);
  std::vector<char> resumed(n, 0);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) {
      const auto& s = scenarios[i];
      const fs::path dir = run_dir(s);
      if (options.resume && options.out_dir) {
        if (auto prev = load_previous(dir, s)) {
          rows[i] = std::move(*prev);
          resumed[i] = 1;
          continue;
        }
      }
      try {
        if (options.out_dir || backend.name() != "toy") fs::create_directories(dir);
        auto r = backend.run(config, s, dir);
        r.scenario_id = s.scenario_id;
        rows[i] = row_from(s, r);
        if (options.out_dir) {
          write_text(dir / "result.json", simkit::to_json(r).dump(1) + "\n");
          write_text(dir / "status.json", json{{"scenario_id", s.scenario_id}, {"status", "ok"}}.dump(1) + "\n");
        }
      } catch (const std::exception& e) {
        SweepRow row;
        row.scenario_id = s.scenario_id;
        row.axes = s.axes;
        row.status = Status::failed;
        row.error = e.what();
        for (const auto& m : metric_registry()) row.metrics[m.name] = std::nullopt;
        rows[i] = std::move(row);
        if (options.out_dir) {
          try {
            write_text(dir / "status.json",
                       json{{"scenario_id", s.scenario_id}, {"status", "failed"}, {"error", e.what()}}.dump(1) + "\n");
          } catch (const std::exception&) {
          }
        }
      }
    }
  };
  {
    std::vector<std::jthread> pool;
    const std::size_t w = std::min(options.workers, std::max<std::size_t>(n, 1));
    for (std::size_t i = 0; i < w; ++i) pool.emplace_back(worker);
  }
  if (!scratch.empty()) {
    std::error_code ec;
    fs::remove_all(scratch, ec);
  }

  SweepResult result;
  result.rows = std::move(rows);
  std::sort(result.rows.begin(), result.rows.end(),
            [](const SweepRow& a, const SweepRow& b) { return a.scenario_id < b.scenario_id; });
  result.dropped = expansion.dropped;
  for (const auto& m : metric_registry()) {
    try {
      result.best[m.name] = select_best(result, m.name).scenario_id;
    } catch (const InputError&) {
    }
  }
  for (char r : resumed) (r ? result.resumed : result.executed) += 1;
  result.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  if (options.out_dir) {
    json manifest = {{"backend", backend.name()}, {"scenarios", json::array()}, {"dropped", json::array()}};
    for (const auto& r : result.rows)
      manifest["scenarios"].push_back({{"scenario_id", r.scenario_id}, {"axes", r.axes}, {"status", status_name(r.status)}});
    for (const auto& d : result.dropped) manifest["dropped"].push_back({{"axes", d.axes}, {"violations", d.violations}});
    manifest["best"] = result.best;
    manifest["executed"] = result.executed;
    manifest["resumed"] = result.resumed;
    write_text(*options.out_dir / "sweep_manifest.json", manifest.dump(2) + "\n");
    write_text(*options.out_dir / "sweep_result.json", to_json(result).dump(2) + "\n");
    write_text(*options.out_dir / "results.csv", results_csv(result));
  }
  return result;
}

json to_json(const SweepResult& r) {
  json rows = json::array();
  for (const auto& row : r.rows) {
    json metrics = json::object();
    for (const auto& [k, v] : row.metrics) metrics[k] = v ? json(*v) : json(nullptr);
    json j = {{"scenario_id", row.scenario_id}, {"axes", row.axes}, {"status", status_name(row.status)}, {"metrics", metrics}};
    if (row.status == Status::failed) j["error"] = row.error;
    rows.push_back(std::move(j));
  }
  json dropped = json::array();
  for (const auto& d : r.dropped) dropped.push_back({{"axes", d.axes}, {"violations", d.violations}});
  return {{"rows", rows}, {"best", r.best}, {"dropped", dropped}};
}

std::string results_csv(const SweepResult& r) {
  std::set<std::string> axis_names;
  for (const auto& row : r.rows)
    for (const auto& [k, v] : row.axes.items()) axis_names.insert(k);
  std::vector<std::string> header{"scenario_id"};
  header.insert(header.end(), axis_names.begin(), axis_names.end());
  header.push_back("status");
  for (const auto& m : metric_registry()) header.push_back(m.name);
  header.push_back("error");
  std::ostringstream out;
  out << csv::join(header) << '\n';
  for (const auto& row : r.rows) {
    std::vector<std::string> f{row.scenario_id};
    for (const auto& a : axis_names) f.push_back(row.axes.contains(a) ? axis_text(row.axes.at(a)) : std::string());
    f.push_back(status_name(row.status));
    for (const auto& m : metric_registry()) {
      const auto it = row.metrics.find(m.name);
      f.push_back(it != row.metrics.end() && it->second ? csv::format_double(*it->second) : std::string());
    }
    f.push_back(row.error);
    out << csv::join(f) << '\n';
  }
  return out.str();
}

const SweepRow& select_best(const SweepResult& result, const std::string& metric) {
  const auto& info = metric_info(metric);
  const SweepRow* best = nullptr;
  double best_v = 0.0;
  for (const auto& row : result.rows) {
    if (row.status != Status::ok) continue;
    const auto it = row.metrics.find(metric);
    if (it == row.metrics.end() || !it->second) continue;
    const double v = *it->second;
    const bool better = !best || (info.lower_is_better ? v < best_v : v > best_v) ||
                        (v == best_v && row.scenario_id < best->scenario_id);
    if (better) {
      best = &row;
      best_v = v;
    }
  }
  if (!best) throw InputError("no ok row carries metric '" + metric + "'");
  return *best;
}

}  // namespace trafficlens::orchestrate
