#include "trafficlens/simkit.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <numeric>
#include <queue>
#include <random>
#include <set>

#include "trafficlens/error.hpp"

namespace trafficlens::simkit {

using nlohmann::json;

std::string_view to_string(Turn t) {
  switch (t) {
    case Turn::left:
      return "left";
    case Turn::through:
      return "through";
    case Turn::right:
      return "right";
  }
  return "?";
}

Turn parse_turn(std::string_view s) {
  if (s == "left" || s == "L") return Turn::left;
  if (s == "through" || s == "T") return Turn::through;
  if (s == "right" || s == "R") return Turn::right;
  throw InputError("unknown turn '" + std::string(s) + "'");
}

const Link* Network::link(const std::string& id) const {
  for (const auto& l : links)
    if (l.id == id) return &l;
  return nullptr;
}

const Movement* Network::movement(const std::string& id) const {
  for (const auto& m : movements)
    if (m.id == id) return &m;
  return nullptr;
}

std::vector<std::string> Network::resolve(const std::string& key) const {
  if (const auto it = routes.find(key); it != routes.end()) return it->second;
  if (movement(key)) return {key};
  throw InputError("route '" + key + "' names no route or movement");
}

void validate_network(const Network& net) {
  std::set<std::string> ids;
  for (const auto& i : net.intersections)
    if (!ids.insert(i).second) throw InputError("duplicate intersection '" + i + "'");
  std::set<std::string> link_ids;
  for (const auto& l : net.links) {
    if (!link_ids.insert(l.id).second) throw InputError("duplicate link '" + l.id + "'");
    if (!(l.length > 0.0) || !std::isfinite(l.length)) throw InputError("link '" + l.id + "' needs length > 0");
    if (!(l.free_speed > 0.0) || !std::isfinite(l.free_speed))
      throw InputError("link '" + l.id + "' needs free_speed > 0");
  }
  std::set<std::string> mv_ids;
  for (const auto& m : net.movements) {
    if (!mv_ids.insert(m.id).second) throw InputError("duplicate movement '" + m.id + "'");
    if (!ids.count(m.intersection))
      throw InputError("movement '" + m.id + "' references unknown intersection '" + m.intersection + "'");
    if (!link_ids.count(m.in_link)) throw InputError("movement '" + m.id + "' references unknown link '" + m.in_link + "'");
    if (m.out_link && !link_ids.count(*m.out_link))
      throw InputError("movement '" + m.id + "' references unknown link '" + *m.out_link + "'");
    if (m.phase < 1 || m.phase > signal::kPhases) throw InputError("movement '" + m.id + "' has no valid phase");
  }
  for (const auto& [rid, mvs] : net.routes) {
    if (mvs.empty()) throw InputError("route '" + rid + "' is empty");
    for (std::size_t i = 0; i < mvs.size(); ++i) {
      const Movement* m = net.movement(mvs[i]);
      if (!m) throw InputError("route '" + rid + "' references unknown movement '" + mvs[i] + "'");
      if (i + 1 < mvs.size()) {
        const Movement* n = net.movement(mvs[i + 1]);
        if (n && (!m->out_link || *m->out_link != n->in_link))
          throw InputError("route '" + rid + "' is not connected after '" + mvs[i] + "'");
      }
    }
  }
}

Network network_from_json(const json& doc) {
  try {
    Network net;
    for (const auto& i : doc.at("intersections"))
      net.intersections.push_back(i.is_string() ? i.get<std::string>() : i.at("id").get<std::string>());
    for (const auto& l : doc.at("links")) {
      Link k;
      k.id = l.at("id").get<std::string>();
      k.from = l.value("from", "");
      k.to = l.value("to", "");
      k.length = l.at("length").get<double>();
      k.free_speed = l.at("free_speed").get<double>();
      k.left_turn_buffer_capacity = l.value("left_turn_buffer_capacity", -1);
      net.links.push_back(std::move(k));
    }
    for (const auto& m : doc.at("movements")) {
      Movement v;
      v.id = m.at("id").get<std::string>();
      v.intersection = m.at("intersection").get<std::string>();
      v.in_link = m.at("in_link").get<std::string>();
      if (m.contains("out_link") && !m.at("out_link").is_null()) v.out_link = m.at("out_link").get<std::string>();
      v.phase = m.at("phase").get<int>();
      v.turn = parse_turn(m.value("turn", "through"));
      net.movements.push_back(std::move(v));
    }
    if (doc.contains("routes")) net.routes = doc.at("routes").get<std::map<std::string, std::vector<std::string>>>();
    validate_network(net);
    return net;
  } catch (const json::exception& e) {
    throw InputError(std::string("bad network JSON: ") + e.what());
  }
}

json to_json(const Network& net) {
  json links = json::array(), mvs = json::array();
  for (const auto& l : net.links)
    links.push_back({{"id", l.id},
                     {"from", l.from},
                     {"to", l.to},
                     {"length", l.length},
                     {"free_speed", l.free_speed},
                     {"left_turn_buffer_capacity", l.left_turn_buffer_capacity}});
  for (const auto& m : net.movements)
    mvs.push_back({{"id", m.id},
                   {"intersection", m.intersection},
                   {"in_link", m.in_link},
                   {"out_link", m.out_link ? json(*m.out_link) : json(nullptr)},
                   {"phase", m.phase},
                   {"turn", to_string(m.turn)}});
  return {{"intersections", net.intersections}, {"links", links}, {"movements", mvs}, {"routes", net.routes}};
}

// ---------------------------------------------------------------------------
// Demand

SpeedFactorModel fit_speed_factor(std::span<const double> max_speeds, double speed_limit) {
  if (!(speed_limit > 0.0)) throw InputError("speed limit must be positive");
  if (max_speeds.empty()) throw InputError("speed-factor fit needs at least one observation");
  const double n = static_cast<double>(max_speeds.size());
  double mean = 0.0;
  for (double v : max_speeds) mean += v / speed_limit;
  mean /= n;
  double ss = 0.0;
  for (double v : max_speeds) ss += (v / speed_limit - mean) * (v / speed_limit - mean);
  SpeedFactorModel m;
  m.mean = mean;
  m.std = max_speeds.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
  if (!(m.mean > 0.0)) throw InputError("fitted speed factor mean must be positive");
  return m;
}

std::vector<long> largest_remainder(long total, std::span<const double> probabilities) {
  if (total < 0) throw InputError("negative demand total");
  double sum = 0.0;
  for (double p : probabilities) {
    if (!(p >= 0.0)) throw InputError("probabilities must be non-negative");
    sum += p;
  }
  if (probabilities.empty() || std::abs(sum - 1.0) > 1e-6) throw InputError("probabilities must sum to 1");
  std::vector<long> out(probabilities.size());
  std::vector<double> frac(probabilities.size());
  long assigned = 0;
  for (std::size_t i = 0; i < probabilities.size(); ++i) {
    double q = static_cast<double>(total) * probabilities[i];
    // products like 100 * 0.29 land a hair below the integer they denote
    if (std::abs(q - std::round(q)) < 1e-9) q = std::round(q);
    out[i] = static_cast<long>(std::floor(q));
    // quantized so that remainders equal up to rounding tie to the lower index
    frac[i] = std::round((q - std::floor(q)) * 1e9) / 1e9;
    assigned += out[i];
  }
  std::vector<std::size_t> order(probabilities.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return frac[a] > frac[b]; });
  for (std::size_t i = 0; assigned < total; ++i, ++assigned) ++out[order[i % order.size()]];
  return out;
}

double uniform01(std::uint64_t bits) { return static_cast<double>(bits >> 11) * 0x1.0p-53; }

namespace {

class Stream {
 public:
  explicit Stream(std::uint64_t seed) : rng_(seed) {}
  double uniform() { return uniform01(rng_()); }
  double normal() {
    // Box-Muller; u1 in (0, 1]
    const double u1 = 1.0 - uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

 private:
  std::mt19937_64 rng_;
};

double draw_speed_factor(Stream& s, const SpeedFactorModel& m) {
  if (m.std <= 0.0) {
    s.normal();  // keep the stream length independent of the model
    return std::clamp(m.mean, kMinSpeedFactor, kMaxSpeedFactor);
  }
  for (int i = 0; i < 1000; ++i) {
    const double v = m.mean + m.std * s.normal();
    if (v >= kMinSpeedFactor && v <= kMaxSpeedFactor) return v;
  }
  return std::clamp(m.mean, kMinSpeedFactor, kMaxSpeedFactor);
}

}  // namespace

std::vector<VehicleSpec> sample_routes(const std::map<std::string, long>& counts, const Horizon& horizon,
                                       std::uint64_t seed, const SpeedFactorModel& speed) {
  if (!(horizon.end > horizon.start)) throw InputError("demand horizon must have end > start");
  if (!(speed.mean > 0.0) || speed.std < 0.0) throw InputError("speed-factor model needs mean > 0, std >= 0");
  Stream s(seed);
  std::vector<VehicleSpec> out;
  for (const auto& [key, n] : counts) {
    if (n < 0) throw InputError("negative count for '" + key + "'");
    for (long i = 0; i < n; ++i) {
      VehicleSpec v;
      v.id = key + "#" + std::to_string(i);
      v.depart = horizon.start + s.uniform() * (horizon.end - horizon.start);
      v.route = {key};
      v.speed_factor = draw_speed_factor(s, speed);
      out.push_back(std::move(v));
    }
  }
  std::sort(out.begin(), out.end(),
            [](const VehicleSpec& a, const VehicleSpec& b) { return std::tie(a.depart, a.id) < std::tie(b.depart, b.id); });
  return out;
}

std::vector<VehicleSpec> sample_routes(const std::vector<ApproachDemand>& approaches, const Horizon& horizon,
                                       std::uint64_t seed, const SpeedFactorModel& speed) {
  std::map<std::string, long> counts;
  for (const auto& a : approaches) {
    std::vector<double> p;
    for (const auto& [k, pr] : a.split) p.push_back(pr);
    const auto alloc = largest_remainder(a.total, p);
    for (std::size_t i = 0; i < alloc.size(); ++i) counts[a.split[i].first] += alloc[i];
  }
  return sample_routes(counts, horizon, seed, speed);
}

// ---------------------------------------------------------------------------
// Results

std::optional<double> RunResult::metric(const std::string& name) const {
  if (name == "throughput") return static_cast<double>(completed);
  if (name == "incomplete") return static_cast<double>(incomplete);
  if (completed == 0) return std::nullopt;
  if (name == "mean_corridor_travel_time") return mean_corridor_travel_time;
  if (name == "p95_travel_time") return p95_travel_time;
  if (name == "mean_delay") return mean_delay;
  return std::nullopt;
}

void summarize(RunResult& r) {
  r.injected = r.vehicles.size();
  std::vector<double> tt;
  double delay = 0.0;
  for (const auto& v : r.vehicles)
    if (v.arrive) {
      tt.push_back(v.travel_time);
      delay += v.delay;
    }
  r.completed = tt.size();
  r.incomplete = r.injected - r.completed;
  r.mean_corridor_travel_time = r.mean_delay = r.p95_travel_time = 0.0;
  if (tt.empty()) return;
  const double n = static_cast<double>(tt.size());
  r.mean_corridor_travel_time = std::accumulate(tt.begin(), tt.end(), 0.0) / n;
  r.mean_delay = delay / n;
  std::sort(tt.begin(), tt.end());
  const auto rank = static_cast<std::size_t>(std::ceil(0.95 * n));
  r.p95_travel_time = tt[std::max<std::size_t>(rank, 1) - 1];
}

json to_json(const RunResult& r, bool include_vehicles) {
  json doc = {{"scenario_id", r.scenario_id},
              {"injected", r.injected},
              {"completed", r.completed},
              {"incomplete", r.incomplete},
              {"mean_corridor_travel_time", r.mean_corridor_travel_time},
              {"p95_travel_time", r.p95_travel_time},
              {"mean_delay", r.mean_delay},
              {"approach_delay", r.approach_delay}};
  if (include_vehicles) {
    json vs = json::array();
    for (const auto& v : r.vehicles)
      vs.push_back({{"id", v.id},
                    {"depart", v.depart},
                    {"arrive", v.arrive ? json(*v.arrive) : json(nullptr)},
                    {"travel_time", v.travel_time},
                    {"delay", v.delay},
                    {"stops", v.stops}});
    doc["vehicles"] = vs;
  }
  return doc;
}

RunResult run_result_from_json(const json& doc) {
  try {
    RunResult r;
    r.scenario_id = doc.at("scenario_id").get<std::string>();
    r.injected = doc.at("injected").get<std::size_t>();
    r.completed = doc.at("completed").get<std::size_t>();
    r.incomplete = doc.at("incomplete").get<std::size_t>();
    r.mean_corridor_travel_time = doc.at("mean_corridor_travel_time").get<double>();
    r.p95_travel_time = doc.at("p95_travel_time").get<double>();
    r.mean_delay = doc.at("mean_delay").get<double>();
    r.approach_delay = doc.at("approach_delay").get<std::map<std::string, double>>();
    if (doc.contains("vehicles"))
      for (const auto& v : doc.at("vehicles")) {
        VehicleResult x;
        x.id = v.at("id").get<std::string>();
        x.depart = v.at("depart").get<double>();
        if (!v.at("arrive").is_null()) x.arrive = v.at("arrive").get<double>();
        x.travel_time = v.at("travel_time").get<double>();
        x.delay = v.at("delay").get<double>();
        x.stops = v.at("stops").get<int>();
        r.vehicles.push_back(std::move(x));
      }
    return r;
  } catch (const json::exception& e) {
    throw ParseError(std::string("bad run result: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// Toy simulator

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct PhaseService {
  std::optional<signal::GreenWindow> window;
  double cycle = 0.0;
  double offset = 0.0;
};

double earliest_service(const PhaseService& s, double t0, double lost) {
  if (!s.window) return kInf;
  return signal::earliest_service(*s.window, s.cycle, t0, s.offset, lost);
}

struct Vehicle {
  std::vector<const Movement*> legs;
  std::size_t leg = 0;
  double queue_arrival = 0.0;
  double free_flow = 0.0;
};

struct Lane {
  std::deque<std::size_t> q;
  double last = -kInf;
  bool pending = false;
};

struct Approach {
  std::string key;
  int capacity = -1;
  Lane shared, left;
  double delay_sum = 0.0;
  long served = 0;
};

struct Event {
  double t;
  std::uint64_t seq;
  int kind;          // 0 arrive, 1 serve
  std::size_t a;     // vehicle (arrive) or approach (serve)
  bool left = false; // serve: which lane
  bool operator>(const Event& o) const { return std::tie(t, seq) > std::tie(o.t, o.seq); }
};

class ToySim {
 public:
  ToySim(const Network& net, const SignalSet& signals, std::span<const VehicleSpec> specs, const SimParams& p)
      : net_(net), specs_(specs), p_(p), horizon_(p.horizon_end.value_or(kInf)) {
    if (!(p.saturation_headway > 0.0) || p.startup_lost_time < 0.0)
      throw InputError("saturation headway must be positive and lost time non-negative");
    validate_network(net);
    for (const auto& m : net.movements) {
      const auto it = signals.find(m.intersection);
      if (it == signals.end()) throw InputError("no signal timeline for intersection '" + m.intersection + "'");
      service_[&m] = {signal::green_window(it->second.timeline, m.phase), it->second.timeline.cycle_length,
                      it->second.offset};
      const std::string key = m.intersection + "/" + m.in_link;
      if (!approach_index_.count(key)) {
        approach_index_[key] = approaches_.size();
        Approach a;
        a.key = key;
        a.capacity = net.link(m.in_link)->left_turn_buffer_capacity;
        approaches_.push_back(std::move(a));
      }
    }
    vehicles_.resize(specs.size());
    for (std::size_t i = 0; i < specs.size(); ++i) {
      const auto& spec = specs[i];
      if (!(spec.speed_factor > 0.0)) throw InputError("vehicle '" + spec.id + "' needs speed_factor > 0");
      if (spec.route.empty()) throw InputError("vehicle '" + spec.id + "' has an empty route");
      auto& v = vehicles_[i];
      for (const auto& key : spec.route)
        for (const auto& mid : net.resolve(key)) v.legs.push_back(net.movement(mid));
      for (std::size_t l = 0; l + 1 < v.legs.size(); ++l)
        if (!v.legs[l]->out_link || *v.legs[l]->out_link != v.legs[l + 1]->in_link)
          throw InputError("route of vehicle '" + spec.id + "' is not connected after movement '" + v.legs[l]->id + "'");
      v.free_flow = travel(i, v.legs.front()->in_link);
      for (const auto* m : v.legs)
        if (m->out_link) v.free_flow += travel(i, *m->out_link);
    }
  }

  RunResult run() {
    RunResult r;
    r.vehicles.resize(specs_.size());
    results_ = &r.vehicles;
    for (std::size_t i = 0; i < specs_.size(); ++i) {
      r.vehicles[i].id = specs_[i].id;
      r.vehicles[i].depart = specs_[i].depart;
      if (specs_[i].depart > horizon_) continue;
      push({specs_[i].depart + travel(i, vehicles_[i].legs.front()->in_link), 0, 0, i});
    }
    while (!events_.empty()) {
      const Event e = events_.top();
      events_.pop();
      if (e.t > horizon_) break;
      if (e.kind == 0)
        arrive(e.a, e.t);
      else
        serve(e.a, e.left, e.t);
    }
    for (const auto& a : approaches_)
      if (a.served > 0) r.approach_delay[a.key] = a.delay_sum / static_cast<double>(a.served);
    summarize(r);
    return r;
  }

 private:
  double travel(std::size_t v, const std::string& link) const {
    const Link* l = net_.link(link);
    return l->length / (l->free_speed * specs_[v].speed_factor);
  }

  void push(Event e) {
    e.seq = seq_++;
    events_.push(e);
  }

  Approach& approach_of(const Movement* m) { return approaches_[approach_index_.at(m->intersection + "/" + m->in_link)]; }

  bool uses_bay(const Movement* m, const Approach& a) const { return m->turn == Turn::left && a.capacity != 0; }

  void arrive(std::size_t vi, double t) {
    auto& v = vehicles_[vi];
    v.queue_arrival = t;
    const Movement* m = v.legs[v.leg];
    auto& a = approach_of(m);
    const bool bay = uses_bay(m, a) && (a.capacity < 0 || static_cast<int>(a.left.q.size()) < a.capacity) &&
                     !has_waiting_left(a);
    (bay ? a.left : a.shared).q.push_back(vi);
    schedule(approach_index_.at(a.key), bay, t);
  }

  // A left-turner already waiting in the shared lane keeps its place ahead of later ones.
  bool has_waiting_left(const Approach& a) const {
    for (std::size_t vi : a.shared.q)
      if (vehicles_[vi].legs[vehicles_[vi].leg]->turn == Turn::left) return true;
    return false;
  }

  void schedule(std::size_t ai, bool left, double now) {
    auto& a = approaches_[ai];
    Lane& lane = left ? a.left : a.shared;
    if (lane.pending || lane.q.empty()) return;
    const std::size_t head = lane.q.front();
    const Movement* m = vehicles_[head].legs[vehicles_[head].leg];
    if (!left && uses_bay(m, a)) {
      // spilled left-turner: it moves into the bay once there is room and blocks the lane until then
      if (a.capacity < 0 || static_cast<int>(a.left.q.size()) < a.capacity) {
        lane.q.pop_front();
        a.left.q.push_back(head);
        schedule(ai, true, now);
        schedule(ai, false, now);
      }
      return;
    }
    const double t0 = std::max(now, lane.last + p_.saturation_headway);
    const double t = earliest_service(service_.at(m), t0, p_.startup_lost_time);
    if (!std::isfinite(t) || t > horizon_) return;
    lane.pending = true;
    push({t, 0, 1, ai, left});
  }

  void serve(std::size_t ai, bool left, double t) {
    auto& a = approaches_[ai];
    Lane& lane = left ? a.left : a.shared;
    lane.pending = false;
    const std::size_t vi = lane.q.front();
    lane.q.pop_front();
    lane.last = t;
    auto& v = vehicles_[vi];
    const double wait = t - v.queue_arrival;
    a.delay_sum += wait;
    ++a.served;
    auto& res = (*results_)[vi];
    if (wait > 1e-9) ++res.stops;

    const Movement* m = v.legs[v.leg];
    const double out = m->out_link ? travel(vi, *m->out_link) : 0.0;
    ++v.leg;
    if (v.leg < v.legs.size()) {
      push({t + out, 0, 0, vi});
    } else if (t + out <= horizon_) {
      res.arrive = t + out;
      res.travel_time = *res.arrive - res.depart;
      res.delay = res.travel_time - v.free_flow;
    }
    schedule(ai, left, t);
    if (left) schedule(ai, false, t);
  }

  const Network& net_;
  std::span<const VehicleSpec> specs_;
  SimParams p_;
  double horizon_;
  std::map<const Movement*, PhaseService> service_;
  std::map<std::string, std::size_t> approach_index_;
  std::vector<Approach> approaches_;
  std::vector<Vehicle> vehicles_;
  std::vector<VehicleResult>* results_ = nullptr;
  std::priority_queue<Event, std::vector<Event>, std::greater<>> events_;
  std::uint64_t seq_ = 0;
};

}  // namespace

RunResult run_toy_sim(const Network& net, const SignalSet& signals, std::span<const VehicleSpec> vehicles,
                      const SimParams& params) {
  ToySim sim(net, signals, vehicles, params);
  return sim.run();
}

}  // namespace trafficlens::simkit
