#include "trafficlens/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <random>
#include <set>
#include <sstream>

#include "trafficlens/analytics.hpp"
#include "trafficlens/csv.hpp"
#include "trafficlens/error.hpp"
#include "trafficlens/geojson.hpp"

namespace trafficlens::synth {

using masks::Direction;
using nlohmann::json;
using simkit::Turn;

signal::RingBarrierPlan textbook_plan() {
  signal::RingBarrierPlan plan;
  for (int p = 1; p <= signal::kPhases; ++p) {
    const bool left = p % 2 == 1;
    plan.phases[static_cast<std::size_t>(p - 1)] = {p, left ? 6.0 : 10.0, left ? 30.0 : 60.0, 4.0, 2.0};
  }
  plan.splits = {14, 40, 14, 28, 14, 40, 14, 28};
  plan.cycle_length = 120.0;
  return plan;
}

int nema_phase(Direction origin, Turn turn) {
  const bool left = turn == Turn::left;
  switch (origin) {
    case Direction::NB:
      return left ? 5 : 2;
    case Direction::SB:
      return left ? 1 : 6;
    case Direction::EB:
      return left ? 7 : 4;
    case Direction::WB:
      return left ? 3 : 8;
  }
  return 2;
}

namespace {

PlanarPoint unit(Direction d) {
  switch (d) {
    case Direction::NB:
      return {0.0, 1.0};
    case Direction::SB:
      return {0.0, -1.0};
    case Direction::EB:
      return {1.0, 0.0};
    case Direction::WB:
      return {-1.0, 0.0};
  }
  return {0.0, 0.0};
}

Direction from_unit(const PlanarPoint& u) {
  if (u.y > 0.5) return Direction::NB;
  if (u.y < -0.5) return Direction::SB;
  return u.x > 0 ? Direction::EB : Direction::WB;
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : g_(seed) {}
  double uniform() { return simkit::uniform01(g_()); }
  double uniform(double a, double b) { return a + (b - a) * uniform(); }
  double exponential(double rate) { return -std::log(1.0 - uniform()) / rate; }

 private:
  std::mt19937_64 g_;
};

// Piecewise-constant-acceleration motion along the path coordinate s.
struct Seg {
  double t0, t1, s0, v0, a;
  double s(double t) const { return s0 + v0 * (t - t0) + 0.5 * a * (t - t0) * (t - t0); }
  double v(double t) const { return v0 + a * (t - t0); }
};

struct Motion {
  std::vector<Seg> segs;

  void add(double duration, double a) {
    const double t0 = segs.empty() ? start : segs.back().t1;
    const double s0 = segs.empty() ? 0.0 : segs.back().s(segs.back().t1);
    const double v0 = segs.empty() ? v_start : segs.back().v(segs.back().t1);
    segs.push_back({t0, t0 + duration, s0, v0, a});
  }
  /// Cruise at the current speed until reaching s_target.
  void cruise_to(double s_target) {
    const double s0 = segs.empty() ? 0.0 : segs.back().s(segs.back().t1);
    const double v0 = segs.empty() ? v_start : segs.back().v(segs.back().t1);
    add(std::max(0.0, (s_target - s0) / v0), 0.0);
  }
  const Seg& at(double t) const {
    for (const auto& g : segs)
      if (t <= g.t1) return g;
    return segs.back();
  }
  double s(double t) const { return at(t).s(t); }
  double v(double t) const { return std::max(0.0, at(t).v(t)); }
  double end() const { return segs.back().t1; }
  double time_at(double s) const {
    for (const auto& g : segs) {
      if (g.s(g.t1) < s - 1e-12) continue;
      const double d = s - g.s0;
      if (g.a == 0.0) return g.v0 > 0.0 ? g.t0 + d / g.v0 : g.t0;
      return g.t0 + (-g.v0 + std::sqrt(std::max(0.0, g.v0 * g.v0 + 2.0 * g.a * d))) / g.a;
    }
    return segs.back().t1;
  }

  double start = 0.0;
  double v_start = 0.0;
};

struct Vehicle {
  std::string id;
  Direction origin;
  Turn turn;
  Direction dest;
  double t_enter;
  double v0;
  double sample_phase;
  bool braking = false;
  // signal interaction
  double t_free = 0.0;  // free-flow arrival at the stop bar
  bool stopped = false;
  double queue = 0.0;   // m behind the stop bar
  double t_stop = 0.0, t_release = 0.0, t_cross = 0.0;
  bool blocked = false;
  Motion motion;
};

// Time to cover `q` meters from standstill accelerating to v0.
double from_standstill(double q, double v0, double a) {
  const double d_acc = v0 * v0 / (2.0 * a);
  if (q <= d_acc) return std::sqrt(2.0 * q / a);
  return v0 / a + (q - d_acc) / v0;
}

void build_stopped_motion(Vehicle& v, const TrajectoryParams& p, double s_stop_bar, double path_len) {
  Motion m;
  m.start = v.t_enter;
  m.v_start = v.v0;
  const double s_stop = s_stop_bar - v.queue;
  m.cruise_to(s_stop - v.v0 * v.v0 / (2.0 * p.decel));
  m.add(v.v0 / p.decel, -p.decel);
  m.add(std::max(0.0, v.t_release - m.end()), 0.0);
  m.add(v.v0 / p.accel, p.accel);
  m.cruise_to(path_len);
  v.motion = std::move(m);
}

}  // namespace

Direction turn_destination(Direction origin, Turn turn) {
  const PlanarPoint u = unit(origin);
  switch (turn) {
    case Turn::left:
      return from_unit({-u.y, u.x});
    case Turn::right:
      return from_unit({u.y, -u.x});
    case Turn::through:
      return origin;
  }
  return origin;
}

TrajectorySet generate_trajectories(const TrajectoryParams& p) {
  if (!(p.duration > p.sample_interval) || !(p.sample_interval > 0.0)) throw InputError("bad synth duration");
  if (std::abs(p.p_left + p.p_through + p.p_right - 1.0) > 1e-6 || p.p_left < 0 || p.p_through < 0 || p.p_right < 0)
    throw InputError("turn probabilities must be non-negative and sum to 1");
  if (!(p.leg_length > p.mask_radius + 50.0)) throw InputError("legs must extend well beyond the mask");
  if (p.braking_events < 0 || p.blockages < 0) throw InputError("injection counts must be non-negative");
  if (!(p.cruise_speed - p.cruise_spread > 2.0)) throw InputError("cruise speed too low");
  const auto timeline = signal::compile_plan(p.plan);
  const double L = p.leg_length;
  const double path_len = 2.0 * L;
  const double s_bar = L - masks::kInnerBoxHalfWidth;
  Rng rng(p.seed);

  std::vector<Vehicle> vs;
  for (auto d : masks::kDirections) {
    const auto it = p.volumes.find(d);
    const double rate = it == p.volumes.end() ? 0.0 : it->second / 3600.0;
    if (rate < 0) throw InputError("negative volume");
    if (rate == 0.0) continue;
    for (double t = p.start + rng.exponential(rate); t < p.start + p.duration - p.sample_interval;
         t += rng.exponential(rate)) {
      Vehicle v;
      v.origin = d;
      const double u = rng.uniform();
      v.turn = u < p.p_left ? Turn::left : u < p.p_left + p.p_through ? Turn::through : Turn::right;
      v.dest = turn_destination(d, v.turn);
      v.t_enter = t;
      v.v0 = rng.uniform(p.cruise_speed - p.cruise_spread, p.cruise_speed + p.cruise_spread);
      v.sample_phase = rng.uniform(0.0, p.sample_interval);
      vs.push_back(std::move(v));
    }
  }
  std::sort(vs.begin(), vs.end(), [](const Vehicle& a, const Vehicle& b) { return a.t_enter < b.t_enter; });
  for (std::size_t i = 0; i < vs.size(); ++i) {
    std::ostringstream id;
    id << p.id_prefix << 'v' << std::setw(5) << std::setfill('0') << i;
    vs[i].id = id.str();
  }

  // Signal service per lane: left-turn bay, and a shared through/right lane.
  std::map<std::pair<int, bool>, std::vector<Vehicle*>> lanes;
  for (auto& v : vs) {
    v.t_free = v.t_enter + s_bar / v.v0;
    lanes[{static_cast<int>(v.origin), v.turn == Turn::left}].push_back(&v);
  }
  for (auto& [key, lane] : lanes) {
    std::stable_sort(lane.begin(), lane.end(), [](const Vehicle* a, const Vehicle* b) { return a->t_free < b->t_free; });
    double last = -INFINITY;
    std::vector<double> crossings;
    for (Vehicle* v : lane) {
      const int phase = nema_phase(v->origin, v->turn);
      const double d = signal::earliest_service(timeline, phase, std::max(v->t_free, last + p.saturation_headway), 0.0,
                                                p.startup_lost_time);
      const bool green = signal::state_at(timeline, v->t_free)[static_cast<std::size_t>(phase - 1)] == signal::Light::G;
      if (d - v->t_free <= 1e-9 || (green && d - v->t_free < 4.0)) {
        v->t_cross = v->t_free;
        v->motion.start = v->t_enter;
        v->motion.v_start = v->v0;
        v->motion.cruise_to(path_len);
      } else {
        long ahead = 0;
        for (double c : crossings)
          if (c > v->t_free) ++ahead;
        v->stopped = true;
        v->queue = static_cast<double>(ahead) * p.jam_spacing;
        const double t_stop = v->t_enter + (s_bar - v->queue - v->v0 * v->v0 / (2.0 * p.decel)) / v->v0 + v->v0 / p.decel;
        v->t_stop = t_stop;
        v->t_release = std::max(t_stop, d - from_standstill(v->queue, v->v0, p.accel));
        v->t_cross = v->t_release + from_standstill(v->queue, v->v0, p.accel);
        build_stopped_motion(*v, p, s_bar, path_len);
      }
      last = v->t_cross;
      crossings.push_back(v->t_cross);
    }
  }

  // Blockages: stretch some moderate stops fivefold. Other vehicles are not
  // held up by them.
  std::vector<Vehicle*> candidates;
  for (auto& v : vs) {
    const double dur = v.t_release - v.t_stop;
    if (v.stopped && dur >= 20.0 && dur <= 60.0 && v.queue + masks::kInnerBoxHalfWidth < p.mask_radius - 10.0)
      candidates.push_back(&v);
  }
  if (static_cast<int>(candidates.size()) < p.blockages)
    throw InputError("not enough stopped vehicles to inject " + std::to_string(p.blockages) + " blockages");
  for (int b = 0; b < p.blockages; ++b) {
    const auto k = static_cast<std::size_t>(rng.uniform() * static_cast<double>(candidates.size() - b)) + b;
    std::swap(candidates[static_cast<std::size_t>(b)], candidates[std::min(k, candidates.size() - 1)]);
    Vehicle& v = *candidates[static_cast<std::size_t>(b)];
    v.blocked = true;
    v.t_release = v.t_stop + 5.0 * (v.t_release - v.t_stop);
    v.t_cross = v.t_release + from_standstill(v.queue, v.v0, p.accel);
    build_stopped_motion(v, p, s_bar, path_len);
  }

  // Braking injections: free-running 15 m/s through vehicles.
  const double brake = 0.47 * analytics::kGravity;
  for (int b = 0; b < p.braking_events; ++b) {
    Vehicle v;
    v.origin = masks::kDirections[std::min<std::size_t>(3, static_cast<std::size_t>(rng.uniform() * 4.0))];
    v.turn = Turn::through;
    v.dest = v.origin;
    v.t_enter = rng.uniform(p.start, p.start + p.duration - p.sample_interval);
    v.v0 = 15.0;
    v.sample_phase = rng.uniform(0.0, p.sample_interval);
    v.braking = true;
    std::ostringstream id;
    id << p.id_prefix << 'b' << std::setw(3) << std::setfill('0') << b;
    v.id = id.str();
    v.motion.start = v.t_enter;
    v.motion.v_start = v.v0;
    v.motion.cruise_to(L - 100.0);
    v.motion.add(2.0, -brake);
    v.motion.add(2.0 * brake / p.accel, p.accel);
    v.motion.cruise_to(path_len);
    v.t_cross = v.motion.time_at(s_bar);
    vs.push_back(std::move(v));
  }

  const geo::LocalProjection proj(p.center);
  auto position = [&](const Vehicle& v, double s) {
    const PlanarPoint ui = unit(v.origin), uo = unit(v.dest);
    if (s <= L) return PlanarPoint{-L * ui.x + s * ui.x, -L * ui.y + s * ui.y};
    return PlanarPoint{(s - L) * uo.x, (s - L) * uo.y};
  };

  TrajectorySet out;
  json tv = json::array(), stops = json::array(), braking = json::array();
  analytics::DirectionMatrix<long> od{};
  analytics::DirectionMatrix<double> tt_sum{};
  std::array<std::vector<double>, 4> queue_truth;
  for (const auto& v : vs) {
    const auto& m = v.motion;
    std::vector<double> times;
    for (double t = v.t_enter + v.sample_phase; t <= m.end(); t += p.sample_interval) times.push_back(t);
    double tb = 0.0;
    if (v.braking) {
      tb = m.time_at(L - 100.0);
      std::erase_if(times, [&](double t) { return std::abs(t - tb) < 0.2 || std::abs(t - tb - 2.0) < 0.2; });
      times.push_back(tb);
      times.push_back(tb + 2.0);
      std::sort(times.begin(), times.end());
    }
    Journey j;
    j.id = v.id;
    for (double t : times) {
      TrajectorySample s;
      s.t = t;
      s.pos = proj.unproject(position(v, m.s(t)));
      s.speed = m.v(t);
      s.ignition = Ignition::on;
      j.samples.push_back(s);
    }
    out.journeys.push_back(std::move(j));

    const double t_in = m.time_at(L - p.mask_radius), t_out = m.time_at(L + p.mask_radius);
    // same rule as the store: a fragment belongs to the window holding its first sample
    const bool in_window = t_in >= p.start && t_in < p.start + p.duration;
    const auto o = analytics::index(v.origin), d = analytics::index(v.dest);
    if (in_window) {
      ++od[o][d];
      tt_sum[o][d] += t_out - t_in;
    }
    json rec = {{"id", v.id},
                {"origin", masks::to_string(v.origin)},
                {"dest", masks::to_string(v.dest)},
                {"turn", simkit::to_string(v.turn)},
                {"t_enter", v.t_enter},
                {"t_in", t_in},
                {"t_out", t_out},
                {"travel_time", t_out - t_in},
                {"in_window", in_window},
                {"stopped", v.stopped},
                {"blocked", v.blocked},
                {"braking", v.braking}};
    if (v.stopped) {
      const double dur = v.t_release - v.t_stop;
      const bool in_mask = v.queue + masks::kInnerBoxHalfWidth < p.mask_radius;
      stops.push_back({{"journey_id", v.id},
                       {"t_start", v.t_stop},
                       {"duration", dur},
                       {"queue_distance", v.queue},
                       {"approach", masks::to_string(v.origin)},
                       {"in_mask", in_mask}});
      if (in_window && in_mask && dur > 10.0) queue_truth[analytics::index(v.origin)].push_back(v.queue);
    }
    if (v.braking) braking.push_back({{"journey_id", v.id}, {"t_start", tb}, {"duration", 2.0}, {"decel", -brake}});
    tv.push_back(std::move(rec));
  }

  json od_j = json::object(), tt_j = json::object(), queues = json::array();
  for (auto a : masks::kDirections) {
    json row = json::object(), trow = json::object();
    for (auto b : masks::kDirections) {
      const long n = od[analytics::index(a)][analytics::index(b)];
      row[std::string(masks::to_string(b))] = n;
      trow[std::string(masks::to_string(b))] =
          n ? json(tt_sum[analytics::index(a)][analytics::index(b)] / static_cast<double>(n)) : json(nullptr);
    }
    od_j[std::string(masks::to_string(a))] = row;
    tt_j[std::string(masks::to_string(a))] = trow;
    const auto& q = queue_truth[analytics::index(a)];
    if (q.empty()) continue;
    double mu = 0.0;
    for (double x : q) mu += x / static_cast<double>(q.size());
    double ss = 0.0;
    for (double x : q) ss += (x - mu) * (x - mu);
    queues.push_back({{"approach", masks::to_string(a)},
                      {"mu", mu},
                      {"sigma", q.size() > 1 ? std::sqrt(ss / static_cast<double>(q.size() - 1)) : 0.0},
                      {"n", q.size()}});
  }
  out.truth = {{"seed", p.seed},
               {"intersection", p.intersection_id},
               {"start", p.start},
               {"duration", p.duration},
               {"window", format_iso(p.start) + ".." + format_iso(p.start + p.duration)},
               {"vehicles", tv},
               {"od", od_j},
               {"travel_time_mean", tt_j},
               {"stops", stops},
               {"queues", queues},
               {"braking", braking}};
  std::sort(out.journeys.begin(), out.journeys.end(), [](const Journey& a, const Journey& b) { return a.id < b.id; });
  return out;
}

json roads_geojson(const TrajectoryParams& p) {
  const geo::LocalProjection proj(p.center);
  auto line = [&](PlanarPoint a, PlanarPoint b) {
    const GeoPoint ga = proj.unproject(a), gb = proj.unproject(b);
    return json{{"type", "Feature"},
                {"properties", json::object()},
                {"geometry", {{"type", "LineString"}, {"coordinates", {{ga.lon, ga.lat}, {gb.lon, gb.lat}}}}}};
  };
  const double L = p.leg_length;
  return {{"type", "FeatureCollection"},
          {"features", {line({-L, 0.0}, {L, 0.0}), line({0.0, -L}, {0.0, L})}}};
}

json intersections_geojson(const TrajectoryParams& p) {
  return {{"type", "FeatureCollection"},
          {"features",
           {{{"type", "Feature"},
             {"properties", {{"id", p.intersection_id}}},
             {"geometry", {{"type", "Point"}, {"coordinates", {p.center.lon, p.center.lat}}}}}}}};
}

std::string trajectories_csv(const std::vector<Journey>& journeys) {
  std::ostringstream out;
  out << "journey_id,timestamp,lat,lon,speed_mps,ignition\n";
  for (const auto& j : journeys)
    for (const auto& s : j.samples)
      out << csv::join({j.id, csv::format_double(s.t), csv::format_double(s.pos.lat), csv::format_double(s.pos.lon),
                        s.speed ? csv::format_double(*s.speed) : std::string(), std::string(to_string(s.ignition))})
          << '\n';
  return out.str();
}

namespace {

void write_text(const std::filesystem::path& p, const std::string& text) {
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream out(p);
  if (!out) throw InputError("cannot write " + p.string());
  out << text;
}

}  // namespace

void write_trajectory_set(const std::filesystem::path& dir, const TrajectoryParams& p) {
  const auto set = generate_trajectories(p);
  std::filesystem::create_directories(dir);
  write_text(dir / "trajectories.csv", trajectories_csv(set.journeys));
  geojson::write_json(dir / "truth.json", set.truth);
  geojson::write_json(dir / "roads.geojson", roads_geojson(p));
  geojson::write_json(dir / "intersections.geojson", intersections_geojson(p));
  geojson::write_json(dir / "signal_plan.json", signal::to_json(p.plan));
}

AtspmSet generate_atspm(const AtspmParams& p) {
  if (p.hours < 1 || p.detectors_per_phase < 1 || p.unmapped_per_hour < 0) throw InputError("bad ATSPM synth params");
  Rng rng(p.seed);
  AtspmSet out;
  for (int ph = 1; ph <= signal::kPhases; ++ph)
    for (int k = 1; k <= p.detectors_per_phase; ++k) out.detector_to_phase[ph * 10 + k] = ph;
  constexpr int kUnmappedDetector = 99;
  auto stamp = [&](double bin) { return bin + std::floor(rng.uniform() * 36000.0) / 10.0; };
  for (int h = 0; h < p.hours; ++h) {
    const double bin = p.start + 3600.0 * h;
    for (const auto& [ph, n] : p.volumes) {
      if (ph < 1 || ph > signal::kPhases || n < 0) throw InputError("bad ATSPM volume entry");
      for (long i = 0; i < n; ++i) {
        const double t = stamp(bin);
        const int det = ph * 10 + static_cast<int>(i % p.detectors_per_phase) + 1;
        out.events.push_back({p.intersection_id, t, 82, det});
        out.events.push_back({p.intersection_id, std::round((t + 0.3) * 10.0) / 10.0, 81, det});
      }
    }
    for (long i = 0; i < p.unmapped_per_hour; ++i) out.events.push_back({p.intersection_id, stamp(bin), 82, kUnmappedDetector});
  }
  std::sort(out.events.begin(), out.events.end(), [](const auto& a, const auto& b) {
    return std::tie(a.t, a.event_code, a.parameter) < std::tie(b.t, b.event_code, b.parameter);
  });
  return out;
}

void write_atspm_set(const std::filesystem::path& dir, const AtspmParams& p) {
  const auto set = generate_atspm(p);
  std::ostringstream csv;
  csv << "intersection_id,timestamp,event_code,parameter\n" << std::fixed << std::setprecision(1);
  for (const auto& e : set.events) csv << e.intersection_id << ',' << e.t << ',' << e.event_code << ',' << e.parameter << '\n';
  write_text(dir / "atspm.csv", csv.str());
  json map = json::object();
  for (const auto& [d, ph] : set.detector_to_phase) map[std::to_string(d)] = ph;
  geojson::write_json(dir / "detector_map.json", map);
}

std::string movement_id(const std::string& intersection, Direction origin, Turn turn) {
  const char t = turn == Turn::left ? 'L' : turn == Turn::through ? 'T' : 'R';
  return intersection + "." + std::string(masks::to_string(origin)) + "." + t;
}

simkit::Network generate_network(const NetworkParams& p) {
  if (p.intersections < 1 || !(p.spacing > 0) || !(p.leg_length > 0) || !(p.free_speed > 0))
    throw InputError("bad network synth params");
  const int n = p.intersections;
  simkit::Network net;
  auto iid = [](int k) { return "I" + std::to_string(k); };
  for (int k = 1; k <= n; ++k) net.intersections.push_back(iid(k));
  std::set<std::string> seen;
  auto add_link = [&](const std::string& id, const std::string& from, const std::string& to, double len, bool inbound) {
    if (!seen.insert(id).second) return;
    net.links.push_back({id, from, to, len, p.free_speed, inbound ? p.left_turn_buffer : -1});
  };
  // Side a vehicle enters from / leaves to.
  auto entry_side = [](Direction d) { return d == Direction::NB ? 'S' : d == Direction::SB ? 'N' : d == Direction::EB ? 'W' : 'E'; };
  auto exit_side = [](Direction d) { return d == Direction::NB ? 'N' : d == Direction::SB ? 'S' : d == Direction::EB ? 'E' : 'W'; };
  auto link_in = [&](int k, char side) {
    const std::string I = iid(k);
    if (side == 'N' || side == 'S') {
      add_link(I + "." + side + ".in", "", I, p.leg_length, true);
      return I + "." + side + ".in";
    }
    if (side == 'W') {
      if (k == 1) {
        add_link(I + ".W.in", "", I, p.leg_length, true);
        return I + ".W.in";
      }
      const std::string id = iid(k - 1) + ">" + I;
      add_link(id, iid(k - 1), I, p.spacing, true);
      return id;
    }
    if (k == n) {
      add_link(I + ".E.in", "", I, p.leg_length, true);
      return I + ".E.in";
    }
    const std::string id = iid(k + 1) + ">" + I;
    add_link(id, iid(k + 1), I, p.spacing, true);
    return id;
  };
  auto link_out = [&](int k, char side) {
    const std::string I = iid(k);
    if (side == 'N' || side == 'S') {
      add_link(I + "." + side + ".out", I, "", p.leg_length, false);
      return I + "." + side + ".out";
    }
    if (side == 'E') {
      if (k == n) {
        add_link(I + ".E.out", I, "", p.leg_length, false);
        return I + ".E.out";
      }
      return link_in(k + 1, 'W');
    }
    if (k == 1) {
      add_link(I + ".W.out", I, "", p.leg_length, false);
      return I + ".W.out";
    }
    return link_in(k - 1, 'E');
  };
  for (int k = 1; k <= n; ++k)
    for (auto o : masks::kDirections)
      for (Turn t : {Turn::left, Turn::through, Turn::right}) {
        simkit::Movement m;
        m.id = movement_id(iid(k), o, t);
        m.intersection = iid(k);
        m.in_link = link_in(k, entry_side(o));
        m.out_link = link_out(k, exit_side(turn_destination(o, t)));
        m.phase = nema_phase(o, t);
        m.turn = t;
        net.movements.push_back(std::move(m));
      }
  std::vector<std::string> eb, wb;
  for (int k = 1; k <= n; ++k) eb.push_back(movement_id(iid(k), Direction::EB, Turn::through));
  for (int k = n; k >= 1; --k) wb.push_back(movement_id(iid(k), Direction::WB, Turn::through));
  net.routes["corridor.EB"] = eb;
  net.routes["corridor.WB"] = wb;
  simkit::validate_network(net);
  return net;
}

json example_grid(const simkit::Network& net) {
  json counts = json::object();
  counts["corridor.EB"] = 300;
  counts["corridor.WB"] = 280;
  for (const auto& i : net.intersections)
    for (auto o : {Direction::NB, Direction::SB}) {
      counts[movement_id(i, o, Turn::left)] = 40;
      counts[movement_id(i, o, Turn::through)] = 150;
      counts[movement_id(i, o, Turn::right)] = 30;
    }
  // shares of each ring's green time after clearances (96 s at a 120 s cycle)
  auto fractions = [](std::array<double, 4> ring) {
    json f = json::array();
    for (int r = 0; r < 2; ++r)
      for (double x : ring) f.push_back(x / 96.0);
    return json{{"fractions", f}};
  };
  return {{"base_plan", signal::to_json(textbook_plan())},
          {"demand", {{"counts", counts}}},
          {"horizon", {0.0, 3600.0}},
          {"sim", {{"saturation_headway", 2.0}, {"startup_lost_time", 2.0}, {"horizon_end", 4500.0}}},
          {"axes",
           {{"cycle_length", {90, 120, 150}},
            {"demand_scale", {1.0, 1.2}},
            {"splits", {{"balanced", fractions({14, 40, 14, 28})}, {"arterial", fractions({12, 30, 14, 40})}}}}}};
}

void write_network_set(const std::filesystem::path& dir, const NetworkParams& p) {
  const auto net = generate_network(p);
  geojson::write_json(dir / "network.json", simkit::to_json(net));
  geojson::write_json(dir / "grid.json", example_grid(net));
}

}  // namespace trafficlens::synth
