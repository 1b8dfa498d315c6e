// Acceptance run: one PASS/FAIL line per criterion. Exit status is nonzero when
// any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <numbers>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "../testing.hpp"
#include "trafficlens/cli.hpp"
#include "trafficlens/detect.hpp"
#include "trafficlens/error.hpp"
#include "trafficlens/geo.hpp"
#include "trafficlens/ingest.hpp"
#include "trafficlens/masks.hpp"
#include "trafficlens/orchestrate.hpp"
#include "trafficlens/signal.hpp"
#include "trafficlens/simkit.hpp"
#include "trafficlens/store.hpp"
#include "trafficlens/synth.hpp"

using namespace trafficlens;
using nlohmann::json;
using Clock = std::chrono::steady_clock;

namespace {

// Pinned tolerances.
constexpr double kBufferBand = 0.002;         // polygonal approximation band, relative to width
constexpr double kGeometryBudget = 5.0;       // s
constexpr double kTravelTimeRel = 0.02;       // truth vs report, per O-D cell
constexpr double kQueueRel = 0.05;            // mu and sigma
constexpr std::size_t kQueueMinSamples = 30;
constexpr double kBrakingStartTol = 3.0;      // s, one sample interval
constexpr double kAnalyzeBudget = 180.0;      // s per intersection-hour
constexpr double kAbofRel = 1e-9;
constexpr double kFreeFlowAbs = 1e-6;         // s
constexpr double kSpeedupRatio = 0.6;
constexpr int kDetectSeeds = 20;
constexpr int kInjectedBlockages = 3;

int failures = 0;

void report(bool ok, const std::string& name, const std::string& detail) {
  std::cout << (ok ? "PASS " : "FAIL ") << name << ": " << detail << std::endl;
  failures += !ok;
}

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(double x, int prec = 4) {
  std::ostringstream o;
  o.precision(prec);
  o << x;
  return o.str();
}

int cli_run(const std::vector<std::string>& args, std::string* err_text = nullptr) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  if (err_text) *err_text = err.str();
  return code;
}

json read_json(const std::filesystem::path& p) {
  std::ifstream in(p);
  return json::parse(in);
}

// ---------------------------------------------------------------------------
// Geometry

double segment_distance(const PlanarPoint& p, const PlanarPoint& a, const PlanarPoint& b) {
  const double dx = b.x - a.x, dy = b.y - a.y;
  const double len2 = dx * dx + dy * dy;
  const double t = len2 > 0 ? std::clamp(((p.x - a.x) * dx + (p.y - a.y) * dy) / len2, 0.0, 1.0) : 0.0;
  return std::hypot(p.x - (a.x + t * dx), p.y - (a.y + t * dy));
}

double polyline_distance(const PlanarPoint& p, const geo::Polyline& l) {
  double d = INFINITY;
  for (std::size_t i = 0; i + 1 < l.vertices.size(); ++i)
    d = std::min(d, segment_distance(p, l.vertices[i], l.vertices[i + 1]));
  return d;
}

bool scanline_inside(const PlanarPoint& p, const geo::Polygon& poly) {
  int crossings = 0;
  auto ring = [&](const geo::Ring& r) {
    for (std::size_t i = 0, j = r.size() - 1; i < r.size(); j = i++) {
      const auto& a = r[i];
      const auto& b = r[j];
      if ((a.y > p.y) != (b.y > p.y) && p.x < (b.x - a.x) * (p.y - a.y) / (b.y - a.y) + a.x) ++crossings;
    }
  };
  ring(poly.exterior);
  for (const auto& h : poly.holes) ring(h);
  return crossings % 2 == 1;
}

double boundary_distance(const PlanarPoint& p, const geo::Polygon& poly) {
  double d = INFINITY;
  auto ring = [&](const geo::Ring& r) {
    for (std::size_t i = 0, j = r.size() - 1; i < r.size(); j = i++) d = std::min(d, segment_distance(p, r[j], r[i]));
  };
  ring(poly.exterior);
  for (const auto& h : poly.holes) ring(h);
  return d;
}

geo::Ring star(std::mt19937_64& rng, PlanarPoint c, double r0, int n) {
  std::uniform_real_distribution<double> u(0.5, 1.0);
  geo::Ring r;
  for (int i = 0; i < n; ++i) {
    const double a = 2 * std::numbers::pi * i / n;
    const double rr = r0 * u(rng);
    r.push_back({c.x + rr * std::cos(a), c.y + rr * std::sin(a)});
  }
  return r;
}

void geometry_suite() {
  const auto t0 = Clock::now();
  std::size_t probes = 0, mismatches = 0;
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> u(-400, 400);
  // buffer vs brute-force distance, outside the approximation band
  for (int shape = 0; shape < 10; ++shape) {
    geo::Polyline line;
    for (int i = 0; i < 2 + shape % 5; ++i) line.vertices.push_back({u(rng) * 0.5, u(rng) * 0.5});
    const double w = 15.0 + 5.0 * shape;
    const auto poly = geo::buffer_polyline(line, w);
    for (int k = 0; k < 1000; ++k) {
      const PlanarPoint p{u(rng), u(rng)};
      const double d = polyline_distance(p, line);
      if (std::abs(d - w) <= kBufferBand * w) continue;
      ++probes;
      mismatches += geo::point_in_polygon(p, poly) != (d < w);
    }
  }
  // point in polygon vs scan line on star polygons with holes
  for (int shape = 0; shape < 10; ++shape) {
    const auto poly = geo::normalized(geo::Polygon{star(rng, {0, 0}, 300, 10 + shape), {star(rng, {0, 0}, 90, 6 + shape)}});
    for (int k = 0; k < 1000; ++k) {
      const PlanarPoint p{u(rng), u(rng)};
      if (boundary_distance(p, poly) < 1e-6) continue;
      ++probes;
      mismatches += geo::point_in_polygon(p, poly) != scanline_inside(p, poly);
    }
  }
  // corridor minus discs vs oracle classification
  for (int shape = 0; shape < 5; ++shape) {
    geo::Polyline road{{{-400, u(rng) * 0.1}, {0, u(rng) * 0.1}, {400, u(rng) * 0.1}}};
    const auto strip = geo::buffer_polyline(road, 35);
    std::vector<geo::Polygon> discs{geo::buffer_circle({-150.0 + u(rng) * 0.1, 0}, 125),
                                    geo::buffer_circle({200.0 + u(rng) * 0.1, 0}, 125)};
    const auto pieces = geo::clip_difference(strip, discs);
    for (int k = 0; k < 1000; ++k) {
      const PlanarPoint p{u(rng), u(rng) * 0.15};
      bool near = boundary_distance(p, strip) < 1e-3;
      for (const auto& d : discs) near = near || boundary_distance(p, d) < 1e-3;
      if (near) continue;
      bool expect = scanline_inside(p, strip);
      for (const auto& d : discs) expect = expect && !scanline_inside(p, d);
      bool got = false;
      for (const auto& piece : pieces) got = got || geo::point_in_polygon(p, piece);
      ++probes;
      mismatches += got != expect;
    }
  }
  const double secs = seconds_since(t0);
  report(mismatches == 0 && secs < kGeometryBudget, "geometry oracles",
         std::to_string(probes) + " probes over 25 shapes, " + std::to_string(mismatches) + " mismatches, " +
             fmt(secs, 3) + " s (budget " + fmt(kGeometryBudget) + " s)");
}

// ---------------------------------------------------------------------------
// Preprocessing

Journey straight_journey(const std::string& id, const geo::LocalProjection& proj, double t0, double y0, double y1,
                         double duration, Ignition ig) {
  Journey j;
  j.id = id;
  const int n = static_cast<int>(std::ceil(duration / 3.0));
  for (int i = 0; i <= n; ++i) {
    const double f = static_cast<double>(i) / n;
    TrajectorySample s;
    s.t = t0 + f * duration;
    s.pos = proj.unproject({0.5, y0 + f * (y1 - y0)});
    s.speed = std::abs(y1 - y0) / duration;
    s.ignition = ig;
    j.samples.push_back(s);
  }
  return j;
}

void preprocessing_suite() {
  testing_util::TempDir dir("acc_pre");
  synth::TrajectoryParams tp;
  std::ofstream(dir / "roads.geojson") << synth::roads_geojson(tp).dump();
  std::ofstream(dir / "intersections.geojson") << synth::intersections_geojson(tp).dump();
  const geo::LocalProjection proj(tp.center);
  std::vector<Journey> corpus;
  std::set<std::string> expect_kept, expect_removed;
  const double t0 = tp.start + 60;
  for (int k = 0; k < 10; ++k) {
    const auto s = std::to_string(k);
    // through trips of 120..210 s: kept (120 s sits exactly on the threshold)
    corpus.push_back(straight_journey("keep" + s, proj, t0 + k, -600, 600, 120.0 + 10 * k, Ignition::on));
    expect_kept.insert("keep" + s);
    // unknown ignition is not evidence of a parked vehicle
    corpus.push_back(straight_journey("unk" + s, proj, t0 + k, 600, -600, 150.0, Ignition::unknown));
    expect_kept.insert("unk" + s);
    // 150 m creeping inside the intersection disc: kept by the length rule at 160+ m
    corpus.push_back(straight_journey("creep" + s, proj, t0 + k, -80 - k, 80 + k, 300.0, Ignition::on));
    expect_kept.insert("creep" + s);
    // under two minutes
    corpus.push_back(straight_journey("short" + s, proj, t0 + k, -600, 600, 100.0 + 2 * k, Ignition::on));
    expect_removed.insert("short" + s);
    // ignition off throughout
    corpus.push_back(straight_journey("off" + s, proj, t0 + k, -600, 600, 200.0, Ignition::off));
    expect_removed.insert("off" + s);
    // ignition-off tail leaves less than two minutes of driving
    auto tail = straight_journey("tail" + s, proj, t0 + k, -600, 600, 240.0, Ignition::on);
    for (auto& smp : tail.samples)
      if (smp.t - tail.samples.front().t > 100.0 + k) smp.ignition = Ignition::off;
    corpus.push_back(tail);
    expect_removed.insert("tail" + s);
    // long enough in time, but every clipped fragment is under 150 m
    corpus.push_back(straight_journey("stub" + s, proj, t0 + k, -60 - k, 60 + k, 300.0, Ignition::on));
    expect_removed.insert("stub" + s);
  }
  std::ofstream(dir / "corpus.csv") << synth::trajectories_csv(corpus);
  const auto d = [&](const char* s) { return (dir / s).string(); };
  std::string err;
  int code = cli_run({"masks", "--roads", d("roads.geojson"), "--intersections", d("intersections.geojson"), "--out",
                      d("masks.geojson")},
                     &err);
  if (code == 0) code = cli_run({"ingest", d("corpus.csv"), "--masks", d("masks.geojson"), "--store", d("store")}, &err);
  if (code != 0) {
    report(false, "preprocessing thresholds", "pipeline exited " + std::to_string(code) + ": " + err);
    return;
  }
  const ingest::JourneyStore store(dir / "store");
  const TimeRange all{tp.start - 3600, tp.start + 7200};
  std::set<std::string> kept;
  std::size_t short_fragments = 0;
  for (const auto* iid : {"I1", ""})
    for (const auto& f : store.load(all, iid)) {
      kept.insert(f.id);
      short_fragments += f.path_length() < ingest::kMinFragmentLength - 1e-6;
    }
  std::size_t false_removals = 0, missed = 0;
  std::string wrong;
  for (const auto& id : expect_kept)
    if (!kept.count(id)) ++false_removals, wrong += " -" + id;
  for (const auto& id : expect_removed)
    if (kept.count(id)) ++missed, wrong += " +" + id;
  report(false_removals == 0 && missed == 0 && short_fragments == 0, "preprocessing thresholds",
         std::to_string(corpus.size()) + " labeled journeys, " + std::to_string(expect_removed.size()) +
             " should go; wrongly kept " + std::to_string(missed) + ", false removals " +
             std::to_string(false_removals) + ", stored fragments under 150 m " + std::to_string(short_fragments) +
             (wrong.empty() ? "" : " (" + wrong.substr(1) + ")"));
}

// ---------------------------------------------------------------------------
// Closed-loop analytics

struct Pipeline {
  bool ok = false;
  std::string error;
  double analyze_seconds = 0.0;
  json report, truth;
};

Pipeline run_pipeline(const testing_util::TempDir& dir, std::vector<std::string> synth_extra) {
  Pipeline p;
  const auto d = [&](const char* s) { return (dir / s).string(); };
  std::vector<std::string> synth_args{"synth", "trajectories", "--out", d("syn")};
  synth_args.insert(synth_args.end(), synth_extra.begin(), synth_extra.end());
  int code = cli_run(synth_args, &p.error);
  if (code == 0)
    code = cli_run({"masks", "--roads", d("syn/roads.geojson"), "--intersections", d("syn/intersections.geojson"),
                    "--out", d("masks.geojson")},
                   &p.error);
  if (code == 0)
    code = cli_run({"ingest", d("syn/trajectories.csv"), "--masks", d("masks.geojson"), "--store", d("store")},
                   &p.error);
  if (code != 0) return p;
  const auto truth = read_json(dir / "syn/truth.json");
  const std::string window = format_iso(truth["start"].get<double>()) + ".." +
                             format_iso(truth["start"].get<double>() + truth["duration"].get<double>());
  const auto t0 = Clock::now();
  code = cli_run({"analyze", "--store", d("store"), "--masks", d("masks.geojson"), "--intersection", "I1", "--window",
                  window, "--out", d("report")},
                 &p.error);
  p.analyze_seconds = seconds_since(t0);
  if (code != 0) return p;
  p.report = read_json(dir / "report/report.json");
  p.truth = truth;
  p.ok = true;
  return p;
}

void closed_loop_suite() {
  testing_util::TempDir dir("acc_loop"), smooth_dir("acc_smooth");
  const auto p = run_pipeline(dir, {"--seed", "11", "--braking", "5"});
  if (!p.ok) {
    report(false, "closed-loop analytics", "pipeline failed: " + p.error);
    return;
  }
  std::vector<std::string> problems;
  // O-D exact
  long od_total = 0;
  for (const auto& [o, row] : p.truth["od"].items())
    for (const auto& [dst, n] : row.items()) {
      od_total += n.get<long>();
      if (p.report["od_matrix"][o][dst] != n) problems.push_back("od " + o + "->" + dst);
    }
  // travel times
  double worst_tt = 0.0;
  for (const auto& [o, row] : p.truth["travel_time_mean"].items())
    for (const auto& [dst, v] : row.items()) {
      const auto& got = p.report["travel_time_mean"][o][dst];
      if (v.is_null() != got.is_null()) {
        problems.push_back("tt presence " + o + "->" + dst);
        continue;
      }
      if (v.is_null()) continue;
      worst_tt = std::max(worst_tt, std::abs(got.get<double>() - v.get<double>()) / v.get<double>());
    }
  if (worst_tt > kTravelTimeRel) problems.push_back("travel time off by " + fmt(worst_tt * 100, 3) + "%");
  // queues
  double worst_q = 0.0;
  int queue_approaches = 0;
  for (const auto& tq : p.truth["queues"]) {
    if (tq["n"].get<std::size_t>() < kQueueMinSamples) continue;
    ++queue_approaches;
    const json* rq = nullptr;
    for (const auto& q : p.report["queues"])
      if (q["approach"] == tq["approach"]) rq = &q;
    if (!rq) {
      problems.push_back("queue missing for " + tq["approach"].get<std::string>());
      continue;
    }
    for (const auto* key : {"mu", "sigma"})
      worst_q = std::max(worst_q, std::abs((*rq)[key].get<double>() - tq[key].get<double>()) / tq[key].get<double>());
  }
  if (worst_q > kQueueRel) problems.push_back("queue stats off by " + fmt(worst_q * 100, 3) + "%");
  if (queue_approaches == 0) problems.push_back("no approach reached " + std::to_string(kQueueMinSamples) + " stops");
  // braking: the injected set, nothing more
  std::map<std::string, double> injected, found;
  for (const auto& b : p.truth["braking"]) injected[b["journey_id"]] = b["t_start"].get<double>();
  for (const auto& b : p.report["braking"]) found[b["journey_id"]] = b["t_start"].get<double>();
  bool braking_exact = injected.size() == found.size() && p.report["braking"].size() == injected.size();
  for (const auto& [id, t] : injected)
    braking_exact = braking_exact && found.count(id) && std::abs(found[id] - t) <= kBrakingStartTol;
  if (!braking_exact)
    problems.push_back("braking " + std::to_string(found.size()) + " found vs " + std::to_string(injected.size()));
  // smooth traffic: no braking events at all
  const auto smooth = run_pipeline(smooth_dir, {"--seed", "12", "--braking", "0"});
  const std::size_t smooth_fp = smooth.ok ? smooth.report["braking"].size() : 1;
  if (!smooth.ok || smooth_fp) problems.push_back("smooth traffic braking false positives " + std::to_string(smooth_fp));
  const double per_hour = std::max(p.analyze_seconds, smooth.analyze_seconds);
  if (per_hour > kAnalyzeBudget) problems.push_back("analyze took " + fmt(per_hour) + " s");

  std::string detail = "od " + std::to_string(od_total) + " trips exact; travel time max rel err " +
                       fmt(worst_tt * 100, 3) + "% (tol " + fmt(kTravelTimeRel * 100) + "%); queue mu/sigma max rel err " +
                       fmt(worst_q * 100, 3) + "% over " + std::to_string(queue_approaches) + " approaches (tol " +
                       fmt(kQueueRel * 100) + "%); braking " + std::to_string(found.size()) + "/" +
                       std::to_string(injected.size()) + ", smooth false positives " + std::to_string(smooth_fp) +
                       "; analyze " + fmt(per_hour, 3) + " s per intersection-hour";
  for (const auto& pr : problems) detail += "; " + pr;
  report(problems.empty(), "closed-loop analytics", detail);
}

// ---------------------------------------------------------------------------
// ABOD

std::vector<double> brute_abof(const std::vector<detect::Point>& pts) {
  const std::size_t n = pts.size(), d = pts[0].size();
  std::vector<double> out(n);
  for (std::size_t a = 0; a < n; ++a) {
    std::vector<double> xs, ws;
    for (std::size_t b = 0; b < n; ++b)
      for (std::size_t c = b + 1; c < n; ++c) {
        if (b == a || c == a) continue;
        double ab2 = 0, ac2 = 0, dot = 0;
        for (std::size_t j = 0; j < d; ++j) {
          const double u = pts[b][j] - pts[a][j], v = pts[c][j] - pts[a][j];
          ab2 += u * u;
          ac2 += v * v;
          dot += u * v;
        }
        ws.push_back(1.0 / std::sqrt(ab2 * ac2));
        xs.push_back(dot / (ab2 * ac2));
      }
    double sw = 0, swv = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      sw += ws[i];
      swv += ws[i] * xs[i];
    }
    const double mean = swv / sw;
    double var = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) var += ws[i] * (xs[i] - mean) * (xs[i] - mean);
    out[a] = var / sw;
  }
  return out;
}

std::vector<detect::Point> gaussian_points(std::mt19937_64& rng, std::size_t n, std::size_t d) {
  std::normal_distribution<double> g(0, 1);
  std::vector<detect::Point> p(n, detect::Point(d));
  for (auto& row : p)
    for (auto& x : row) x = g(rng);
  return p;
}

double max_rel(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]) / std::abs(b[i]));
  return m;
}

void abod_suite() {
  std::mt19937_64 rng(99);
  double worst_exact = 0.0, worst_inv = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 5 + rng() % 26;
    const auto pts = gaussian_points(rng, n, 4);
    const auto fast = detect::abof(pts, n - 1);
    worst_exact = std::max(worst_exact, max_rel(fast, brute_abof(pts)));
    // random rotation in two planes plus translation
    auto moved = pts;
    std::uniform_real_distribution<double> ang(0, 2 * std::numbers::pi), shift(-50, 50);
    const double a1 = ang(rng), a2 = ang(rng);
    const std::array<double, 4> off{shift(rng), shift(rng), shift(rng), shift(rng)};
    for (auto& p : moved) {
      const double x = p[0], y = p[1], z = p[2], w = p[3];
      p[0] = std::cos(a1) * x - std::sin(a1) * y + off[0];
      p[1] = std::sin(a1) * x + std::cos(a1) * y + off[1];
      p[2] = std::cos(a2) * z - std::sin(a2) * w + off[2];
      p[3] = std::sin(a2) * z + std::cos(a2) * w + off[3];
    }
    worst_inv = std::max(worst_inv, max_rel(detect::abof(moved, n - 1), fast));
  }
  int outlier_wins = 0;
  for (int seed = 0; seed < 100; ++seed) {
    std::mt19937_64 r(1000 + seed);
    auto pts = gaussian_points(r, 20, 4);
    pts.push_back({12.0, -9.0, 10.0, 8.0});
    const auto s = detect::abof(pts, 10);
    outlier_wins += std::min_element(s.begin(), s.end()) - s.begin() == 20;
  }
  report(worst_exact <= kAbofRel && worst_inv <= kAbofRel && outlier_wins == 100, "ABOD correctness",
         "fast vs brute max rel err " + fmt(worst_exact, 3) + " over 50 sets; rotation/translation max rel err " +
             fmt(worst_inv, 3) + " (tol " + fmt(kAbofRel) + "); far outlier ranked lowest in " +
             std::to_string(outlier_wins) + "/100 seeds");
}

// ---------------------------------------------------------------------------
// Interruption detection end to end

void detect_suite() {
  constexpr double kWeek = 7 * 86400.0;
  int passed = 0, clean_flags = 0, injected_hits = 0;
  std::string first_problem, failing;
  for (int seed = 1; seed <= kDetectSeeds; ++seed) {
    testing_util::TempDir dir("acc_detect");
    const auto d = [&](const std::string& s) { return (dir / s).string(); };
    const double start = synth::kDefaultStart;
    std::string err;
    int code = 0;
    const std::vector<std::tuple<std::string, double, std::string, int>> weeks{
        {"w2", start - 2 * kWeek, "a", 0}, {"w1", start - kWeek, "b", 0}, {"cur", start, "c", kInjectedBlockages}};
    for (const auto& [name, t, prefix, blockages] : weeks)
      if (code == 0)
        code = cli_run({"synth", "trajectories", "--out", d(name), "--seed", std::to_string(seed * 10 + (int)prefix[0]),
                        "--start", fmt(t, 12), "--id-prefix", prefix, "--blockages", std::to_string(blockages)},
                       &err);
    if (code == 0)
      code = cli_run({"masks", "--roads", d("cur/roads.geojson"), "--intersections", d("cur/intersections.geojson"),
                      "--out", d("masks.geojson")},
                     &err);
    if (code == 0)
      code = cli_run({"ingest", d("w2/trajectories.csv"), d("w1/trajectories.csv"), d("cur/trajectories.csv"),
                      "--masks", d("masks.geojson"), "--store", d("store")},
                     &err);
    const std::string window = format_iso(start) + ".." + format_iso(start + 3600);
    const auto detect = [&](double contamination, const std::string& out) {
      return cli_run({"detect", "--method", "abod", "--store", d("store"), "--masks", d("masks.geojson"),
                      "--intersection", "I1", "--window", window, "--contamination", fmt(contamination, 17), "--out",
                      out},
                     &err);
    };
    // first pass learns the current cohort size, second sizes contamination to the injection count
    if (code == 0) {
      const int c = detect(0.01, d("probe.json"));
      if (c != cli::kFlags && c != cli::kOk) code = c;
    }
    std::set<std::string> injected;
    if (code == 0) {
      const auto truth = read_json(dir / "cur/truth.json");
      for (const auto& v : truth["vehicles"])
        if (v["blocked"].get<bool>() && v["in_window"].get<bool>()) injected.insert(v["id"]);
      const auto n = read_json(dir / "probe.json")["current_journeys"].get<double>();
      const int c = detect(static_cast<double>(injected.size()) / n, d("detect.json"));
      if (c != cli::kFlags && c != cli::kOk) code = c;
    }
    if (code != 0 || injected.empty()) {
      if (first_problem.empty())
        first_problem = "seed " + std::to_string(seed) + ": exit " + std::to_string(code) + " " + err +
                        (injected.empty() ? " (no injected journey in window)" : "");
      continue;
    }
    int hits = 0, clean = 0;
    const auto flagged = read_json(dir / "detect.json")["flagged"];
    for (const auto& id : flagged) injected.count(id) ? ++hits : ++clean;
    injected_hits += hits;
    clean_flags += clean;
    if (hits >= 1 && clean == 0)
      ++passed;
    else
      failing += " " + std::to_string(seed) + "(" + std::to_string(hits) + "+" + std::to_string(clean) + ")";
  }
  report(passed == kDetectSeeds, "interruption detection end to end",
         std::to_string(passed) + "/" + std::to_string(kDetectSeeds) + " seeds with >=1 injected and 0 clean flagged; " +
             std::to_string(injected_hits) + " injected hits, " + std::to_string(clean_flags) + " clean flags in total" +
             (failing.empty() ? "" : "; failing seeds (injected+clean flagged):" + failing) +
             (first_problem.empty() ? "" : "; " + first_problem));
}

// ---------------------------------------------------------------------------
// Signal model

void signal_suite() {
  using signal::ViolationKind;
  const auto base = synth::textbook_plan();
  std::vector<std::pair<std::string, std::pair<signal::RingBarrierPlan, ViolationKind>>> cases;
  auto add = [&](const std::string& name, auto mutate, ViolationKind k) {
    auto p = base;
    mutate(p);
    cases.push_back({name, {p, k}});
  };
  add("invalid phase spec", [](auto& p) { p.phases[2].phase = 7; }, ViolationKind::invalid_phase_spec);
  add("yellow too short", [](auto& p) { p.phases[1].yellow = 2.5; }, ViolationKind::yellow_too_short);
  add("negative all-red", [](auto& p) { p.phases[1].all_red = -1; }, ViolationKind::negative_all_red);
  add("split below min", [](auto& p) { p.split(1) = 5, p.split(2) = 49; }, ViolationKind::split_below_min);
  add("split above max", [](auto& p) { p.splits = {12, 62, 6, 16, 12, 62, 6, 16}; }, ViolationKind::split_above_max);
  add("ring sum mismatch", [](auto& p) { p.cycle_length = 121; }, ViolationKind::ring_sum_mismatch);
  add("barrier desync", [](auto& p) { p.split(2) += 2, p.split(4) -= 2; }, ViolationKind::barrier_desync);
  add("conflicting greens", [](auto& p) { p.ring1 = {1, 3, 2, 4}; }, ViolationKind::conflicting_greens);
  int rejected = 0;
  std::string missed;
  for (const auto& [name, c] : cases) {
    bool hit = false;
    for (const auto& v : signal::validate_plan(c.first)) hit = hit || v.kind == c.second;
    bool compile_throws = false;
    try {
      signal::compile_plan(c.first);
    } catch (const Error&) {
      compile_throws = true;
    }
    if (hit && compile_throws)
      ++rejected;
    else
      missed += " " + name;
  }
  // compatibility of everything not red, on several valid plans
  std::vector<signal::RingBarrierPlan> valid{base};
  valid.push_back(base);
  valid.back().ring2 = {6, 5, 8, 7};
  valid.push_back(base);
  valid.back().ring1 = {2, 1, 4, 3};
  valid.back().splits = {10, 44, 12, 30, 16, 38, 14, 28};
  std::size_t probes = 0, violations = 0;
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(-5000, 5000);
  for (const auto& plan : valid) {
    const auto tl = signal::compile_plan(plan);
    for (int k = 0; k < 10000 / static_cast<int>(valid.size()) + 1; ++k) {
      const auto s = signal::state_at(tl, u(rng), u(rng) / 40);
      ++probes;
      for (int a = 1; a <= signal::kPhases; ++a)
        for (int b = a + 1; b <= signal::kPhases; ++b)
          if (s[a - 1] != signal::Light::R && s[b - 1] != signal::Light::R && !signal::compatible(a, b)) ++violations;
    }
  }
  report(rejected == 8 && violations == 0 && probes >= 10000, "signal model",
         std::to_string(rejected) + "/8 violation classes rejected" + (missed.empty() ? "" : " (missed:" + missed + ")") +
             "; " + std::to_string(probes) + " probe times over " + std::to_string(valid.size()) + " plans, " +
             std::to_string(violations) + " incompatible non-red pairs");
}

// ---------------------------------------------------------------------------
// Route sampling

std::vector<long> enumerate_best(long total, const std::vector<double>& p) {
  std::vector<long> best, cur(p.size());
  double best_cost = INFINITY;
  auto rec = [&](auto&& self, std::size_t i, long left) -> void {
    if (i + 1 == p.size()) {
      cur[i] = left;
      double cost = 0;
      for (std::size_t j = 0; j < p.size(); ++j) {
        const double d = static_cast<double>(cur[j]) - static_cast<double>(total) * p[j];
        cost += d * d;
      }
      // ties go to the earlier index, i.e. the lexicographically largest vector
      if (cost < best_cost - 1e-9 || (std::abs(cost - best_cost) <= 1e-9 && cur > best)) {
        best_cost = std::min(best_cost, cost);
        best = cur;
      }
      return;
    }
    for (long k = 0; k <= left; ++k) {
      cur[i] = k;
      self(self, i + 1, left - k);
    }
  };
  rec(rec, 0, total);
  return best;
}

void route_suite() {
  std::mt19937_64 rng(31);
  int exact_tables = 0;
  for (int trial = 0; trial < 100; ++trial) {
    std::map<std::string, long> counts;
    const int keys = 1 + static_cast<int>(rng() % 8);
    for (int k = 0; k < keys; ++k) counts["m" + std::to_string(k)] = static_cast<long>(rng() % 80);
    std::map<std::string, long> got;
    for (const auto& v : simkit::sample_routes(counts, {0, 3600}, rng(), {1.0, 0.15})) ++got[v.route.at(0)];
    bool ok = true;
    for (const auto& [k, n] : counts) ok = ok && got[k] == n;
    exact_tables += ok;
  }
  int oracle_agree = 0;
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t m = 2 + rng() % 3;
    std::vector<long> w(m);
    for (auto& x : w) x = static_cast<long>(rng() % 7);
    w[0] += 1;
    const double sw = static_cast<double>(std::accumulate(w.begin(), w.end(), 0L));
    std::vector<double> p(m);
    for (std::size_t i = 0; i < m; ++i) p[i] = static_cast<double>(w[i]) / sw;
    const long total = static_cast<long>(rng() % 15);
    oracle_agree += simkit::largest_remainder(total, p) == enumerate_best(total, p);
  }
  report(exact_tables == 100 && oracle_agree == 300, "route sampling exactness",
         std::to_string(exact_tables) + "/100 count tables exact; largest remainder matches enumeration in " +
             std::to_string(oracle_agree) + "/300 cases");
}

// ---------------------------------------------------------------------------
// Toy simulator

simkit::Network single_approach() {
  simkit::Network net;
  net.intersections = {"X"};
  net.links = {{"a", "", "X", 300, 15, -1}, {"b", "X", "", 200, 10, -1}};
  net.movements = {{"thru", "X", "a", "b", 2, simkit::Turn::through}};
  return net;
}

simkit::SignalSet textbook_signals(const simkit::Network& net, double offset = 0.0) {
  simkit::SignalSet s;
  for (const auto& i : net.intersections) s[i] = {signal::compile_plan(synth::textbook_plan()), offset};
  return s;
}

void toy_sim_suite() {
  const auto net = single_approach();
  const auto signals = textbook_signals(net);
  // free flow: reach the stop line while phase 2 is green ([20, 60) each cycle)
  double worst_ff = 0.0;
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> fu(0.6, 1.8), at(25, 58);
  for (int k = 0; k < 20; ++k) {
    const double f = fu(rng), arrive_line = at(rng) + 120.0 * (k % 3);
    std::vector<simkit::VehicleSpec> vs{{"v", arrive_line - 300.0 / (15 * f), {"thru"}, f}};
    const auto r = simkit::run_toy_sim(net, signals, vs);
    const double expect = 300.0 / (15 * f) + 200.0 / (10 * f);
    worst_ff = std::max(worst_ff, r.vehicles[0].arrive ? std::abs(r.vehicles[0].travel_time - expect) : INFINITY);
  }
  // red arrival: line at 70 s, green again at 140 s, served after the 2 s lost time
  // at 142 s, then 20 s to exit; delay = 142 - 70 = 72 s
  int red_exact = 0, red_cases = 0;
  for (double line : {70.0, 0.0 + 65.0, 90.0, 139.0}) {
    ++red_cases;
    const double served = std::max(142.0, line);
    std::vector<simkit::VehicleSpec> vs{{"v", line - 20.0, {"thru"}, 1.0}};
    const auto r = simkit::run_toy_sim(net, signals, vs);
    red_exact += r.vehicles[0].arrive && *r.vehicles[0].arrive == served + 20.0 && r.vehicles[0].delay == served - line;
  }
  // conservation
  synth::NetworkParams np;
  np.intersections = 3;
  const auto big = synth::generate_network(np);
  std::vector<std::string> keys{"corridor.EB", "corridor.WB"};
  for (const auto& m : big.movements) keys.push_back(m.id);
  int conserved = 0;
  for (int trial = 0; trial < 50; ++trial) {
    std::map<std::string, long> counts;
    for (int k = 0; k < 8; ++k) counts[keys[rng() % keys.size()]] += static_cast<long>(rng() % 80);
    const auto vs = simkit::sample_routes(counts, {0, 1800}, rng());
    simkit::SimParams sp;
    if (trial % 2) sp.horizon_end = 200.0 + static_cast<double>(rng() % 1800);
    const auto r = simkit::run_toy_sim(big, textbook_signals(big, 7.0 * trial), vs, sp);
    conserved += r.injected == vs.size() && r.injected == r.completed + r.incomplete;
  }
  report(worst_ff <= kFreeFlowAbs && red_exact == red_cases && conserved == 50, "toy simulator sanity",
         "free-flow max abs err " + fmt(worst_ff, 3) + " s over 20 cases (tol " + fmt(kFreeFlowAbs) +
             "); red-arrival exact " + std::to_string(red_exact) + "/" + std::to_string(red_cases) +
             "; conservation exact " + std::to_string(conserved) + "/50");
}

// ---------------------------------------------------------------------------
// Sweep determinism and parallelism

// Toy results after a fixed wall-clock wait, standing in for a simulator process.
class SlowBackend : public orchestrate::Backend {
 public:
  explicit SlowBackend(simkit::Network net) : toy_(std::move(net)) {}
  std::string name() const override { return "slow"; }
  simkit::RunResult run(const orchestrate::SweepConfig& c, const orchestrate::ScenarioSpec& s,
                        const std::filesystem::path& w) const override {
    std::this_thread::sleep_for(std::chrono::seconds(1));
    return toy_.run(c, s, w);
  }

 private:
  orchestrate::ToyBackend toy_;
};

void sweep_suite() {
  const auto net = synth::generate_network({});
  auto doc = synth::example_grid(net);
  doc["axes"]["cycle_length"] = {90, 120};
  doc["axes"]["demand_scale"] = {1.0, 1.2};
  doc["axes"]["seed"] = {1, 2};
  const auto [cfg, grid] = orchestrate::grid_from_json(doc);
  const auto ex = orchestrate::expand_grid(cfg, grid);
  const orchestrate::ToyBackend toy(net);
  std::set<std::string> docs;
  for (std::size_t w : {1u, 2u, 4u}) docs.insert(orchestrate::to_json(orchestrate::run_parallel(cfg, ex, toy, {w})).dump());
  const bool deterministic = docs.size() == 1 && ex.scenarios.size() == 16;

  const SlowBackend slow(net);
  auto t0 = Clock::now();
  const auto r1 = orchestrate::run_parallel(cfg, ex, slow, {1});
  const double w1 = seconds_since(t0);
  t0 = Clock::now();
  const auto r4 = orchestrate::run_parallel(cfg, ex, slow, {4});
  const double w4 = seconds_since(t0);
  const bool same = orchestrate::to_json(r1).dump() == orchestrate::to_json(r4).dump();
  const unsigned cores = std::thread::hardware_concurrency();
  const double ratio = w4 / w1;
  report(deterministic && same && ratio <= kSpeedupRatio, "sweep determinism and parallelism",
         std::to_string(ex.scenarios.size()) + " scenarios identical for workers 1/2/4; 1 s-per-scenario backend: " +
             fmt(w1, 3) + " s at 1 worker, " + fmt(w4, 3) + " s at 4 workers (ratio " + fmt(ratio, 3) + ", limit " +
             fmt(kSpeedupRatio) + "); host has " + std::to_string(cores) +
             (cores >= 4 ? " cores" : " core(s), so CPU-bound speedup cannot be shown here"));
}

// ---------------------------------------------------------------------------
// Grid optimum

void grid_optimum_suite() {
  const auto net = synth::generate_network({});
  using masks::Direction;
  using simkit::Turn;
  auto mv = [](Direction d, Turn t) { return synth::movement_id("I1", d, t); };
  // north-south through demand dominates; east-west is light
  json counts = {{mv(Direction::NB, Turn::through), 520}, {mv(Direction::SB, Turn::through), 500},
                 {mv(Direction::EB, Turn::through), 140}, {mv(Direction::WB, Turn::through), 150},
                 {mv(Direction::NB, Turn::left), 40},     {mv(Direction::SB, Turn::left), 40},
                 {mv(Direction::EB, Turn::left), 30},     {mv(Direction::WB, Turn::left), 30}};
  auto doc = synth::example_grid(net);
  doc["demand"] = {{"counts", counts}};
  doc["axes"] = {{"cycle_length", {120}},
                 {"splits",
                  {{"ew_heavy", {14, 22, 14, 46, 14, 22, 14, 46}},
                   {"balanced", {14, 34, 14, 34, 14, 34, 14, 34}},
                   {"ns_lean", {14, 40, 14, 28, 14, 40, 14, 28}},
                   {"ns_heavy", {14, 50, 14, 18, 14, 50, 14, 18}}}}};
  const auto [cfg, grid] = orchestrate::grid_from_json(doc);
  const auto ex = orchestrate::expand_grid(cfg, grid);
  const auto result = orchestrate::run_parallel(cfg, ex, orchestrate::ToyBackend(net), {2});
  const auto& best = orchestrate::select_best(result, "mean_delay");
  // exhaustive enumeration: simulate every grid point directly
  std::string argmin, argmin_name;
  double min_delay = INFINITY;
  for (const auto& s : ex.scenarios) {
    const auto vs = orchestrate::scenario_vehicles(cfg, s);
    const auto r = simkit::run_toy_sim(net, orchestrate::scenario_signals(net, s), vs, cfg.sim);
    if (r.mean_delay < min_delay || (r.mean_delay == min_delay && s.scenario_id < argmin)) {
      min_delay = r.mean_delay;
      argmin = s.scenario_id;
      argmin_name = s.axes["splits"].dump();
    }
  }
  report(best.scenario_id == argmin && argmin_name.find("ns_heavy") != std::string::npos && ex.scenarios.size() == 4,
         "grid-search optimum",
         "select_best " + best.scenario_id + ", enumeration " + argmin + " (" + argmin_name.substr(0, 24) +
             "), mean delay " + fmt(min_delay, 4) + " s over " + std::to_string(ex.scenarios.size()) + " plans");
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, void (*)()>> suites{
      {"geometry oracles", geometry_suite},
      {"preprocessing thresholds", preprocessing_suite},
      {"closed-loop analytics", closed_loop_suite},
      {"ABOD correctness", abod_suite},
      {"interruption detection end to end", detect_suite},
      {"signal model", signal_suite},
      {"route sampling exactness", route_suite},
      {"toy simulator sanity", toy_sim_suite},
      {"sweep determinism and parallelism", sweep_suite},
      {"grid-search optimum", grid_optimum_suite}};
  for (const auto& [name, fn] : suites) {
    try {
      fn();
    } catch (const std::exception& e) {
      report(false, name, std::string("threw: ") + e.what());
    }
  }
  std::cout << (failures ? std::to_string(failures) + " criteria failed" : "all criteria passed") << std::endl;
  return failures ? 1 : 0;
}
