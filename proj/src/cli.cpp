#include "trafficlens/cli.hpp"

#include <chrono>
#include <future>
#include <iostream>
#include <mutex>
#include <optional>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "trafficlens/config.hpp"
#include "trafficlens/detect.hpp"
#include "trafficlens/error.hpp"
#include "trafficlens/geojson.hpp"
#include "trafficlens/ingest.hpp"
#include "trafficlens/masks.hpp"
#include "trafficlens/orchestrate.hpp"
#include "trafficlens/report.hpp"
#include "trafficlens/store.hpp"
#include "trafficlens/synth.hpp"

namespace trafficlens::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Streams {
  std::ostream& out;
  std::ostream& err;
  std::mutex mu;
};

std::string require(const std::string& flag_value, const std::string& config_value, const char* what) {
  if (!flag_value.empty()) return flag_value;
  if (!config_value.empty()) return config_value;
  throw InputError(std::string("missing ") + what);
}

const masks::Mask& intersection_mask(const masks::MaskSet& set, const std::string& id) {
  const masks::Mask* m = set.find_intersection(id);
  if (!m) throw InputError("mask set has no intersection '" + id + "'");
  return *m;
}

// Runs fn(item) for every item on up to `workers` threads; the first exception wins.
template <class T, class F>
void fan_out(const std::vector<T>& items, std::size_t workers, F&& fn) {
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex mu;
  auto worker = [&] {
    for (std::size_t i = next++; i < items.size(); i = next++) {
      try {
        fn(items[i]);
      } catch (...) {
        std::lock_guard lock(mu);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < std::max<std::size_t>(1, std::min(workers, items.size())); ++w) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);
}

// ---------------------------------------------------------------------------

struct MasksArgs {
  std::string roads, intersections, out;
  std::optional<double> width, radius;
};

int cmd_masks(const MasksArgs& a, const Config& cfg, Streams& io) {
  masks::MaskBuildOptions opts;
  opts.half_width = a.width.value_or(cfg.thresholds.mask_half_width);
  opts.radius = a.radius.value_or(cfg.thresholds.mask_radius);
  if (!(opts.half_width > 0.0)) throw InputError("--width must be positive");
  if (!(opts.radius > 0.0)) throw InputError("--radius must be positive");
  const auto inputs = masks::read_mask_inputs(a.roads, a.intersections);
  const auto set = masks::build_mask_set(inputs, opts);
  const std::string out = require(a.out, cfg.paths.masks, "--out");
  masks::write_mask_set(out, set);
  std::size_t ni = 0, nc = 0;
  for (const auto& m : set.masks) (m.kind == masks::MaskKind::intersection ? ni : nc) += 1;
  io.out << "masks: " << ni << " intersection, " << nc << " corridor -> " << out << '\n';
  return kOk;
}

struct IngestArgs {
  std::vector<std::string> inputs;
  std::string masks, store, rejects;
};

int cmd_ingest(const IngestArgs& a, const Config& cfg, Streams& io) {
  std::vector<fs::path> paths(a.inputs.begin(), a.inputs.end());
  const auto mask_set = masks::read_mask_set(require(a.masks, cfg.paths.masks, "--masks"));
  const fs::path store_root = require(a.store, cfg.paths.store, "--store");
  auto load = ingest::load_trajectories(paths);
  const std::size_t loaded = load.journeys.size();
  auto kept = ingest::filter_journeys(std::move(load.journeys), cfg.thresholds.min_journey_duration);
  const auto fragments = ingest::clip_to_masks(kept, mask_set, cfg.thresholds.min_fragment_length);

  std::map<std::string, std::vector<Journey>> by_intersection;
  for (const auto& f : fragments) {
    const masks::Mask* m = mask_set.find(f.mask_id);
    by_intersection[m && m->intersection_id ? *m->intersection_id : std::string()].push_back(f);
  }
  ingest::JourneyStore store(store_root);
  for (const auto& [iid, js] : by_intersection) store.put(js, iid);
  store.refresh_manifest();
  const fs::path rejects = a.rejects.empty() ? store_root / "rejects.ndjson" : fs::path(a.rejects);
  ingest::write_rejects(rejects, load.rejects);
  io.out << "journeys: " << loaded << " loaded, " << kept.size() << " kept after filters; " << fragments.size()
         << " fragments stored; " << load.rejects.size() << " rejects -> " << rejects.string() << '\n';
  return kOk;
}

struct AnalyzeArgs {
  std::string store, masks, window, out;
  std::vector<std::string> intersections;
  bool svg = false;
};

int cmd_analyze(const AnalyzeArgs& a, const Config& cfg, Streams& io) {
  const auto mask_set = masks::read_mask_set(require(a.masks, cfg.paths.masks, "--masks"));
  const ingest::JourneyStore store(require(a.store, cfg.paths.store, "--store"));
  const TimeRange window = parse_window(a.window);
  const fs::path out = require(a.out, cfg.paths.out, "--out");
  if (a.intersections.empty()) throw InputError("--intersection is required");
  const json config = to_json(cfg);
  const auto proj = mask_set.projection();
  fan_out(a.intersections, cfg.workers, [&](const std::string& iid) {
    const auto& mask = intersection_mask(mask_set, iid);
    auto fragments = store.load(window, iid);
    std::erase_if(fragments, [&](const Journey& j) { return j.mask_id != mask.id; });
    const auto report = analytics::analyze(fragments, mask, window, cfg.analysis_params());
    const fs::path dir = a.intersections.size() == 1 ? out : out / iid;
    analytics::write_bundle(dir, report, proj, config, a.svg);
    std::lock_guard lock(io.mu);
    io.out << iid << ": " << report.fragments << " fragments, " << report.movements.size() << " classified, "
           << report.stops.size() << " stops, " << report.braking.size() << " braking events"
           << (report.empty() ? " (empty report)" : "") << " -> " << dir.string() << '\n';
  });
  return kOk;
}

struct DetectArgs {
  std::string store, masks, window, out, method = "abod", baselines = "auto", detector_map;
  std::vector<std::string> intersections, atspm;
  std::optional<double> contamination;
  std::optional<int> k;
};

std::vector<TimeRange> baseline_windows(const DetectArgs& a, const TimeRange& w) {
  std::vector<TimeRange> out;
  if (a.baselines == "auto") {
    for (int k = 1; k <= 2; ++k) out.push_back({w.start - k * kSecondsPerWeek, w.end - k * kSecondsPerWeek});
    return out;
  }
  std::istringstream in(a.baselines);
  for (std::string part; std::getline(in, part, ',');) out.push_back(parse_window(part));
  if (out.empty()) throw InputError("--baselines lists no windows");
  return out;
}

json window_json(const TimeRange& w) { return {{"start", format_iso(w.start)}, {"end", format_iso(w.end)}}; }

// Returns the exit code for one intersection.
int detect_abod(const DetectArgs& a, const Config& cfg, const std::string& iid, const masks::MaskSet& mask_set,
                const ingest::JourneyStore& store, const TimeRange& window, json& doc, std::ostream& warn) {
  const auto& mask = intersection_mask(mask_set, iid);
  analytics::StopParams sp{cfg.thresholds.stop_speed, cfg.thresholds.stop_min_duration};
  std::vector<detect::FeatureVector> vectors;
  auto add = [&](const TimeRange& w, detect::Cohort c) {
    std::size_t n = 0;
    for (const auto& f : store.load(w, iid)) {
      if (f.mask_id != mask.id || f.samples.size() < 2) continue;
      vectors.push_back(detect::featurize(f, c, sp));
      ++n;
    }
    return n;
  };
  const std::size_t n_current = add(window, detect::Cohort::current);
  const auto bws = baseline_windows(a, window);
  json used = json::array();
  std::size_t n_base = 0;
  for (std::size_t i = 0; i < bws.size(); ++i) {
    const auto cohort = i == 0 ? detect::Cohort::week_minus_1 : detect::Cohort::week_minus_2;
    const std::size_t n = add(bws[i], cohort);
    if (n == 0) warn << "warning: " << iid << ": no baseline journeys in " << window_label(bws[i]) << '\n';
    used.push_back({{"window", window_json(bws[i])}, {"journeys", n}});
    n_base += n;
  }
  if (n_base == 0) throw InputError(iid + ": no baseline journeys available; ABOD needs context");
  if (n_current == 0) warn << "warning: " << iid << ": no journeys in the current window\n";

  const auto k = static_cast<std::size_t>(a.k.value_or(static_cast<int>(cfg.thresholds.abod_k)));
  const double c = a.contamination.value_or(cfg.thresholds.contamination);
  auto scores = detect::flag_outliers(detect::abof_scores(vectors, k), c);
  json rows = json::array(), flagged = json::array();
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const auto& s = scores[i];
    const auto& v = vectors[i];
    rows.push_back({{"journey_id", s.journey_id},
                    {"cohort", detect::to_string(s.cohort)},
                    {"abof", s.abof},
                    {"flagged", s.flagged},
                    {"features",
                     {{"stopped_time", v.stopped_time},
                      {"avg_speed", v.avg_speed},
                      {"speed_std", v.speed_std},
                      {"travel_time", v.travel_time}}}});
    if (s.flagged) flagged.push_back(s.journey_id);
  }
  doc = {{"method", "abod"},
         {"intersection", iid},
         {"window", window_json(window)},
         {"baselines", used},
         {"k", k},
         {"k_effective", detect::effective_k(vectors.size(), k)},
         {"contamination", c},
         {"current_journeys", n_current},
         {"flagged", flagged},
         {"scores", rows}};
  return flagged.empty() ? kOk : kFlags;
}

int detect_atspm(const DetectArgs& a, const Config& cfg, const std::string& iid, const TimeRange& window, json& doc,
                 std::ostream& warn) {
  if (a.atspm.empty()) throw InputError("--method atspm needs --atspm files");
  if (a.detector_map.empty()) throw InputError("--method atspm needs --detector-map");
  std::vector<fs::path> files(a.atspm.begin(), a.atspm.end());
  const auto dmap = ingest::read_detector_map(a.detector_map);
  const double bin = cfg.thresholds.atspm_bin;
  const auto current = ingest::phase_volumes(ingest::load_atspm(files, iid, window).events, dmap, bin);
  std::vector<ingest::PhaseVolumeTable> baselines;
  json used = json::array();
  for (const auto& bw : baseline_windows(a, window)) {
    const auto ev = ingest::load_atspm(files, iid, bw).events;
    used.push_back({{"window", window_json(bw)}, {"events", ev.size()}});
    if (ev.empty()) {
      warn << "warning: " << iid << ": no controller events in " << window_label(bw) << '\n';
      continue;
    }
    baselines.push_back(
        ingest::phase_volumes(ev, dmap, bin).shifted(static_cast<std::int64_t>(std::llround(window.start - bw.start))));
  }
  const auto cmp = detect::atspm_interruption(iid, current, baselines, cfg.thresholds.atspm_threshold);
  json devs = json::array(), none = json::array();
  bool any = false;
  for (const auto& d : cmp.deviations) {
    devs.push_back({{"phase", d.phase},
                    {"hour", format_iso(static_cast<double>(d.hour))},
                    {"current", d.current},
                    {"baseline_mean", d.baseline_mean},
                    {"score", d.score},
                    {"flagged", d.flagged}});
    any = any || d.flagged;
  }
  for (const auto& n : cmp.no_baseline)
    none.push_back({{"phase", n.phase}, {"hour", format_iso(static_cast<double>(n.hour))}, {"current", n.current}});
  doc = {{"method", "atspm"},
         {"intersection", iid},
         {"window", window_json(window)},
         {"baselines", used},
         {"threshold", cfg.thresholds.atspm_threshold},
         {"unmapped", current.unmapped},
         {"deviations", devs},
         {"no_baseline", none}};
  return any ? kFlags : kOk;
}

int cmd_detect(const DetectArgs& a, const Config& cfg, Streams& io) {
  if (a.method != "abod" && a.method != "atspm") throw InputError("--method must be abod or atspm");
  if (a.intersections.empty()) throw InputError("--intersection is required");
  const TimeRange window = parse_window(a.window);
  const fs::path out = require(a.out, cfg.paths.out, "--out");
  std::optional<masks::MaskSet> mask_set;
  std::optional<ingest::JourneyStore> store;
  if (a.method == "abod") {
    mask_set = masks::read_mask_set(require(a.masks, cfg.paths.masks, "--masks"));
    store.emplace(require(a.store, cfg.paths.store, "--store"));
  }
  int code = kOk;
  fan_out(a.intersections, cfg.workers, [&](const std::string& iid) {
    json doc;
    std::ostringstream warn;
    const int rc = a.method == "abod" ? detect_abod(a, cfg, iid, *mask_set, *store, window, doc, warn)
                                      : detect_atspm(a, cfg, iid, window, doc, warn);
    doc["config"] = to_json(cfg);
    const fs::path file = a.intersections.size() == 1 && out.extension() == ".json"
                              ? out
                              : out / ("detect_" + a.method + "_" + iid + ".json");
    geojson::write_json(file, doc);
    std::lock_guard lock(io.mu);
    io.err << warn.str();
    const std::size_t nflag = a.method == "abod" ? doc["flagged"].size() : 0;
    if (a.method == "abod")
      io.out << iid << ": " << nflag << " journeys flagged -> " << file.string() << '\n';
    else
      io.out << iid << ": " << (rc == kFlags ? "phase-volume deviations flagged" : "no deviations") << " -> "
             << file.string() << '\n';
    code = std::max(code, rc);
  });
  return code;
}

struct SweepArgs {
  std::string grid, network, backend, out, metric = "mean_corridor_travel_time", command;
  std::optional<std::size_t> workers;
  std::optional<double> timeout;
  bool resume = false;
};

int cmd_sweep(const SweepArgs& a, const Config& cfg, Streams& io) {
  auto [sweep_cfg, grid] = orchestrate::grid_from_json(geojson::read_json(a.grid));
  const auto net = simkit::network_from_json(geojson::read_json(a.network));
  const std::string kind = a.backend.empty() ? cfg.backend.kind : a.backend;
  const std::size_t workers = a.workers.value_or(cfg.workers);
  if (workers < 1) throw InputError("--workers must be >= 1");
  orchestrate::metric_info(a.metric);
  std::unique_ptr<orchestrate::Backend> backend;
  if (kind == "toy") {
    backend = std::make_unique<orchestrate::ToyBackend>(net);
  } else if (kind == "external") {
    const std::string cmd = a.command.empty() ? cfg.backend.command : a.command;
    if (cmd.empty()) throw InputError("external backend needs a command template");
    backend = std::make_unique<orchestrate::ExternalBackend>(
        net, cmd, std::chrono::duration<double>(a.timeout.value_or(cfg.backend.timeout)));
  } else {
    throw InputError("--backend must be toy or external");
  }
  const auto expansion = orchestrate::expand_grid(sweep_cfg, grid);
  for (const auto& d : expansion.dropped)
    io.err << "dropped " << orchestrate::canonical_json(d.axes) << ": " << d.violations.front() << '\n';
  orchestrate::RunOptions opts;
  opts.workers = workers;
  opts.out_dir = fs::path(require(a.out, cfg.paths.out, "--out"));
  opts.resume = a.resume;
  const auto result = orchestrate::run_parallel(sweep_cfg, expansion, *backend, opts);
  std::size_t ok = 0;
  for (const auto& r : result.rows) ok += r.status == orchestrate::Status::ok;
  io.out << "scenarios: " << result.rows.size() << " (" << ok << " ok, " << result.rows.size() - ok << " failed), "
         << expansion.dropped.size() << " dropped; executed " << result.executed << ", resumed " << result.resumed
         << '\n';
  if (ok == 0) {
    io.err << "no scenario succeeded\n";
    for (const auto& r : result.rows)
      if (!r.error.empty()) {
        io.err << r.scenario_id << ": " << r.error << '\n';
        break;
      }
    return kBackend;
  }
  try {
    const auto& best = orchestrate::select_best(result, a.metric);
    io.out << "best: " << best.scenario_id << ' ' << a.metric << '=' << *best.metrics.at(a.metric) << ' '
           << orchestrate::canonical_json(best.axes) << '\n';
  } catch (const InputError& e) {
    io.err << e.what() << '\n';
    return kBackend;
  }
  return kOk;
}

struct SynthArgs {
  std::string kind, out, start, id_prefix, intersection = "I1";
  std::uint64_t seed = 1;
  double duration = 3600.0, volume_scale = 1.0, spacing = 400.0;
  int blockages = 0, braking = 5, hours = 1, intersections = 1;
};

int cmd_synth(const SynthArgs& a, Streams& io) {
  if (a.out.empty()) throw InputError("--out is required");
  if (!(a.volume_scale >= 0.0)) throw InputError("--volume-scale must be non-negative");
  const double start = a.start.empty() ? synth::kDefaultStart : parse_timestamp(a.start);
  if (a.kind == "trajectories") {
    synth::TrajectoryParams p;
    p.seed = a.seed;
    p.start = start;
    p.duration = a.duration;
    p.blockages = a.blockages;
    p.braking_events = a.braking;
    p.id_prefix = a.id_prefix;
    p.intersection_id = a.intersection;
    for (auto& [d, v] : p.volumes) v *= a.volume_scale;
    synth::write_trajectory_set(a.out, p);
  } else if (a.kind == "atspm") {
    synth::AtspmParams p;
    p.seed = a.seed;
    p.start = start;
    p.hours = a.hours;
    p.intersection_id = a.intersection;
    for (auto& [ph, v] : p.volumes) v = std::llround(static_cast<double>(v) * a.volume_scale);
    synth::write_atspm_set(a.out, p);
  } else if (a.kind == "network") {
    synth::NetworkParams p;
    p.intersections = a.intersections;
    p.spacing = a.spacing;
    synth::write_network_set(a.out, p);
  } else {
    throw InputError("synth kind must be trajectories, atspm or network");
  }
  io.out << "synth " << a.kind << " -> " << a.out << '\n';
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Streams io{out, err, {}};
  CLI::App app{"Probe-trajectory and signal-timing analytics toolkit", "trafficlens"};
  app.require_subcommand(1);
  std::string config_path;
  app.add_option("--config", config_path, "JSON config file (default: $TRAFFICLENS_CONFIG)");

  MasksArgs ma;
  auto* masks_cmd = app.add_subcommand("masks", "build corridor and intersection masks");
  masks_cmd->add_option("--roads", ma.roads, "road centerlines GeoJSON")->required();
  masks_cmd->add_option("--intersections", ma.intersections, "intersection points GeoJSON")->required();
  masks_cmd->add_option("--out", ma.out, "mask set GeoJSON to write");
  masks_cmd->add_option("--width", ma.width, "corridor half width, m (35)");
  masks_cmd->add_option("--radius", ma.radius, "intersection radius, m (125)");

  IngestArgs ia;
  auto* ingest_cmd = app.add_subcommand("ingest", "load, filter, clip and store trajectories");
  ingest_cmd->add_option("inputs", ia.inputs, "trajectory CSV/NDJSON files")->required();
  ingest_cmd->add_option("--masks", ia.masks);
  ingest_cmd->add_option("--store", ia.store);
  ingest_cmd->add_option("--rejects", ia.rejects, "rejects report (default <store>/rejects.ndjson)");

  AnalyzeArgs aa;
  auto* analyze_cmd = app.add_subcommand("analyze", "descriptive report for intersections and a window");
  analyze_cmd->add_option("--store", aa.store);
  analyze_cmd->add_option("--masks", aa.masks);
  analyze_cmd->add_option("--intersection", aa.intersections, "intersection id (repeatable)")->required();
  analyze_cmd->add_option("--window", aa.window, "start..end (ISO-8601 or epoch seconds)")->required();
  analyze_cmd->add_option("--out", aa.out, "report directory");
  analyze_cmd->add_flag("--svg", aa.svg, "also write stops.svg");

  DetectArgs da;
  auto* detect_cmd = app.add_subcommand("detect", "interruption detection against week-over-week baselines");
  detect_cmd->add_option("--store", da.store);
  detect_cmd->add_option("--masks", da.masks);
  detect_cmd->add_option("--intersection", da.intersections)->required();
  detect_cmd->add_option("--window", da.window)->required();
  detect_cmd->add_option("--method", da.method, "abod or atspm");
  detect_cmd->add_option("--baselines", da.baselines, "auto, or comma-separated start..end windows");
  detect_cmd->add_option("--out", da.out, "output directory or .json file");
  detect_cmd->add_option("--contamination", da.contamination);
  detect_cmd->add_option("--k", da.k, "ABOD neighbours");
  detect_cmd->add_option("--atspm", da.atspm, "controller event CSV files");
  detect_cmd->add_option("--detector-map", da.detector_map, "detector -> phase JSON");

  SweepArgs sa;
  auto* sweep_cmd = app.add_subcommand("sweep", "grid search over signal plans");
  sweep_cmd->add_option("--grid", sa.grid)->required();
  sweep_cmd->add_option("--network", sa.network)->required();
  sweep_cmd->add_option("--backend", sa.backend, "toy or external");
  sweep_cmd->add_option("--workers", sa.workers);
  sweep_cmd->add_option("--out", sa.out, "sweep output directory");
  sweep_cmd->add_option("--metric", sa.metric);
  sweep_cmd->add_option("--command", sa.command, "external command template with ${config} and ${output}");
  sweep_cmd->add_option("--timeout", sa.timeout, "external run timeout, s");
  sweep_cmd->add_flag("--resume", sa.resume, "skip scenarios with stored ok results");

  SynthArgs ya;
  auto* synth_cmd = app.add_subcommand("synth", "seeded synthetic data");
  synth_cmd->add_option("kind", ya.kind, "trajectories, atspm or network")->required();
  synth_cmd->add_option("--out", ya.out)->required();
  synth_cmd->add_option("--seed", ya.seed);
  synth_cmd->add_option("--start", ya.start, "ISO-8601 or epoch seconds");
  synth_cmd->add_option("--duration", ya.duration, "s (trajectories)");
  synth_cmd->add_option("--blockages", ya.blockages, "stretched stops (trajectories)");
  synth_cmd->add_option("--braking", ya.braking, "hard-braking injections (trajectories)");
  synth_cmd->add_option("--id-prefix", ya.id_prefix);
  synth_cmd->add_option("--intersection", ya.intersection);
  synth_cmd->add_option("--volume-scale", ya.volume_scale);
  synth_cmd->add_option("--hours", ya.hours, "(atspm)");
  synth_cmd->add_option("--intersections", ya.intersections, "corridor length (network)");
  synth_cmd->add_option("--spacing", ya.spacing, "m (network)");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e, out, err);
    return rc == 0 ? kOk : kUsage;
  }

  try {
    if (synth_cmd->parsed()) return cmd_synth(ya, io);
    const Config cfg = load_config(config_path.empty() ? std::nullopt : std::optional<fs::path>(config_path));
    if (masks_cmd->parsed()) return cmd_masks(ma, cfg, io);
    if (ingest_cmd->parsed()) return cmd_ingest(ia, cfg, io);
    if (analyze_cmd->parsed()) return cmd_analyze(aa, cfg, io);
    if (detect_cmd->parsed()) return cmd_detect(da, cfg, io);
    if (sweep_cmd->parsed()) return cmd_sweep(sa, cfg, io);
  } catch (const BackendError& e) {
    err << "backend error: " << e.what() << '\n';
    if (!e.output().empty()) err << e.output() << '\n';
    return kBackend;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  }
  return kUsage;
}

int run(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run(args, std::cout, std::cerr);
}

}  // namespace trafficlens::cli
