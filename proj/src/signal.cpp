#include "trafficlens/signal.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>

#include "trafficlens/csv.hpp"
#include "trafficlens/error.hpp"

namespace trafficlens::signal {

namespace {

using nlohmann::json;

constexpr double kMergeEps = 1e-9;

bool valid_phase(int p) { return p >= 1 && p <= kPhases; }

std::string phase_name(int p) { return "phase " + std::to_string(p); }

// Breakpoints of one ring: (time, phase, light from that time on).
struct Step {
  double t;
  int phase;
  Light light;
};

std::vector<Step> ring_steps(const RingBarrierPlan& plan, const RingSequence& seq) {
  std::vector<Step> out;
  double t = 0.0;
  for (int p : seq) {
    const auto& s = plan.spec(p);
    out.push_back({t, p, Light::G});
    t += plan.split(p);
    out.push_back({t, p, Light::Y});
    t += s.yellow;
    if (s.all_red > 0.0) out.push_back({t, p, Light::R});
    t += s.all_red;
  }
  return out;
}

// Light of phase p at cycle time tt given its ring sequence.
Light light_in_ring(const RingBarrierPlan& plan, const RingSequence& seq, int phase, double tt) {
  double t = 0.0;
  for (int p : seq) {
    const double g_end = t + plan.split(p);
    const double y_end = g_end + plan.spec(p).yellow;
    const double r_end = y_end + plan.spec(p).all_red;
    if (p == phase) {
      if (tt >= t && tt < g_end) return Light::G;
      if (tt >= g_end && tt < y_end) return Light::Y;
      return Light::R;
    }
    t = r_end;
  }
  return Light::R;
}

}  // namespace

double RingBarrierPlan::phase_time(int phase) const {
  const auto& s = spec(phase);
  return split(phase) + s.yellow + s.all_red;
}

int barrier_group(int phase) {
  if (!valid_phase(phase)) throw InputError("no such phase: " + std::to_string(phase));
  const int k = (phase - 1) % 4;
  return k < 2 ? 0 : 1;
}

int ring_of(int phase) {
  if (!valid_phase(phase)) throw InputError("no such phase: " + std::to_string(phase));
  return phase <= 4 ? 0 : 1;
}

bool compatible(int p, int q) { return ring_of(p) != ring_of(q) && barrier_group(p) == barrier_group(q); }

std::string_view to_string(ViolationKind k) {
  switch (k) {
    case ViolationKind::invalid_phase_spec:
      return "invalid_phase_spec";
    case ViolationKind::yellow_too_short:
      return "yellow_too_short";
    case ViolationKind::negative_all_red:
      return "negative_all_red";
    case ViolationKind::split_below_min:
      return "split_below_min";
    case ViolationKind::split_above_max:
      return "split_above_max";
    case ViolationKind::ring_sum_mismatch:
      return "ring_sum_mismatch";
    case ViolationKind::barrier_desync:
      return "barrier_desync";
    case ViolationKind::conflicting_greens:
      return "conflicting_greens";
  }
  return "?";
}

std::vector<Violation> validate_plan(const RingBarrierPlan& plan, double tol) {
  std::vector<Violation> out;
  auto add = [&](ViolationKind k, std::optional<int> p, std::string msg) { out.push_back({k, p, std::move(msg)}); };

  for (int p = 1; p <= kPhases; ++p) {
    const auto& s = plan.spec(p);
    if (s.phase != p)
      add(ViolationKind::invalid_phase_spec, p, "slot " + std::to_string(p) + " holds phase " + std::to_string(s.phase));
    if (!(s.min_green > 0.0) || !(s.min_green <= s.max_green) || !std::isfinite(s.max_green))
      add(ViolationKind::invalid_phase_spec, p, phase_name(p) + ": need 0 < min_green <= max_green");
    if (!(s.yellow >= kMinYellow)) add(ViolationKind::yellow_too_short, p, phase_name(p) + ": yellow below 3 s");
    if (!(s.all_red >= 0.0)) add(ViolationKind::negative_all_red, p, phase_name(p) + ": negative all-red");
    const double g = plan.split(p);
    if (!std::isfinite(g) || g < s.min_green - tol)
      add(ViolationKind::split_below_min, p, phase_name(p) + ": split below min_green");
    if (g > s.max_green + tol) add(ViolationKind::split_above_max, p, phase_name(p) + ": split above max_green");
  }

  // Ring structure: each ring runs its own four phases, two per barrier group,
  // and both rings cross the barrier together.
  bool structure_ok = true;
  const RingSequence* rings[2] = {&plan.ring1, &plan.ring2};
  for (int r = 0; r < 2; ++r) {
    std::set<int> seen;
    for (std::size_t i = 0; i < 4; ++i) {
      const int p = (*rings[r])[i];
      if (!valid_phase(p) || ring_of(p) != r || !seen.insert(p).second) {
        structure_ok = false;
        add(ViolationKind::conflicting_greens, valid_phase(p) ? std::optional<int>(p) : std::nullopt,
            "ring " + std::to_string(r + 1) + " sequence must list its own four phases once");
        break;
      }
    }
  }
  if (structure_ok) {
    for (std::size_t i = 0; i < 4; i += 2) {
      const int g1 = barrier_group(plan.ring1[i]);
      for (const RingSequence* seq : rings)
        if (barrier_group((*seq)[i]) != g1 || barrier_group((*seq)[i + 1]) != g1) {
          structure_ok = false;
          add(ViolationKind::conflicting_greens, (*seq)[i],
              "sequence crosses a barrier: positions " + std::to_string(i + 1) + "-" + std::to_string(i + 2) +
                  " must share a barrier group in both rings");
        }
    }
  }

  if (!(plan.cycle_length > 0.0) || !std::isfinite(plan.cycle_length))
    add(ViolationKind::ring_sum_mismatch, std::nullopt, "cycle_length must be positive");
  for (int r = 0; r < 2; ++r) {
    double sum = 0.0;
    for (int p = 1 + 4 * r; p <= 4 + 4 * r; ++p) sum += plan.phase_time(p);
    if (std::abs(sum - plan.cycle_length) > tol) {
      std::ostringstream m;
      m << "ring " << r + 1 << " sums to " << sum << " s, cycle is " << plan.cycle_length << " s";
      add(ViolationKind::ring_sum_mismatch, r + 1, m.str());
    }
  }
  for (int g = 0; g < 2; ++g) {
    double side[2] = {0.0, 0.0};
    for (int p = 1; p <= kPhases; ++p)
      if (barrier_group(p) == g) side[ring_of(p)] += plan.phase_time(p);
    if (std::abs(side[0] - side[1]) > tol) {
      std::ostringstream m;
      m << "barrier group " << (g == 0 ? 'A' : 'B') << ": ring 1 side " << side[0] << " s, ring 2 side " << side[1]
        << " s";
      add(ViolationKind::barrier_desync, g, m.str());
    }
  }
  return out;
}

std::vector<double> SignalTimeline::starts() const {
  std::vector<double> s;
  s.reserve(intervals.size());
  double t = 0.0;
  for (const auto& iv : intervals) {
    s.push_back(t);
    t += iv.duration;
  }
  return s;
}

SignalTimeline compile_plan(const RingBarrierPlan& plan) {
  const auto violations = validate_plan(plan);
  if (!violations.empty()) {
    std::string msg = "invalid signal plan:";
    for (const auto& v : violations) msg += "\n  " + v.message;
    throw InputError(msg);
  }
  std::vector<double> cuts;
  for (const RingSequence* seq : {&plan.ring1, &plan.ring2})
    for (const auto& st : ring_steps(plan, *seq)) cuts.push_back(st.t);
  cuts.push_back(plan.cycle_length);
  std::sort(cuts.begin(), cuts.end());
  std::vector<double> merged;
  for (double c : cuts) {
    if (c >= plan.cycle_length - kMergeEps) c = plan.cycle_length;
    if (merged.empty() || c - merged.back() > kMergeEps) merged.push_back(c);
  }
  if (merged.front() != 0.0) merged.insert(merged.begin(), 0.0);

  SignalTimeline tl;
  tl.cycle_length = plan.cycle_length;
  for (std::size_t i = 0; i + 1 < merged.size(); ++i) {
    Interval iv;
    iv.duration = merged[i + 1] - merged[i];
    const double mid = 0.5 * (merged[i] + merged[i + 1]);
    for (int p = 1; p <= kPhases; ++p)
      iv.state[static_cast<std::size_t>(p - 1)] = light_in_ring(plan, ring_of(p) == 0 ? plan.ring1 : plan.ring2, p, mid);
    tl.intervals.push_back(iv);
  }
  return tl;
}

std::array<Light, kPhases> state_at(const SignalTimeline& timeline, double t, double offset) {
  if (timeline.intervals.empty() || !(timeline.cycle_length > 0.0)) throw InputError("empty signal timeline");
  double tt = std::fmod(t - offset, timeline.cycle_length);
  if (tt < 0.0) tt += timeline.cycle_length;
  double start = 0.0;
  for (const auto& iv : timeline.intervals) {
    if (tt < start + iv.duration) return iv.state;
    start += iv.duration;
  }
  // Rounding left tt at the very end of the cycle: wrap to the first interval.
  return timeline.intervals.front().state;
}

std::optional<GreenWindow> green_window(const SignalTimeline& timeline, int phase) {
  if (!valid_phase(phase)) throw InputError("no such phase: " + std::to_string(phase));
  const auto idx = static_cast<std::size_t>(phase - 1);
  const auto& ivs = timeline.intervals;
  const std::size_t n = ivs.size();
  const auto starts = timeline.starts();
  auto green = [&](std::size_t i) { return ivs[i % n].state[idx] == Light::G; };
  // First interval that is green and whose predecessor is not.
  for (std::size_t i = 0; i < n; ++i) {
    if (!green(i) || green(i + n - 1)) continue;
    GreenWindow w{starts[i], 0.0};
    for (std::size_t j = i; j < i + n && green(j); ++j) w.length += ivs[j % n].duration;
    return w;
  }
  bool any = false;
  for (std::size_t i = 0; i < n; ++i) any = any || green(i);
  if (any) return GreenWindow{0.0, timeline.cycle_length};  // green all cycle
  return std::nullopt;
}

double earliest_service(const GreenWindow& w, double cycle, double t0, double offset, double lost_time) {
  const double first = offset + w.start + lost_time;
  const double end = offset + w.start + w.length;
  if (!(first < end)) return INFINITY;
  if (w.length >= cycle) return std::max(t0, first);  // never turns red: one onset only
  const double k = std::floor((t0 - end) / cycle) + 1.0;
  double t = std::max(t0, first + k * cycle);
  if (t >= end + k * cycle) t = first + (k + 1.0) * cycle;  // rounding at the window edge
  return t;
}

double earliest_service(const SignalTimeline& timeline, int phase, double t0, double offset, double lost_time) {
  const auto w = green_window(timeline, phase);
  if (!w) return INFINITY;
  return earliest_service(*w, timeline.cycle_length, t0, offset, lost_time);
}

MovementMap default_movement_map() {
  MovementMap m;
  for (int p = 1; p <= kPhases; ++p) m[p] = {p - 1};
  return m;
}

std::string emit_tls_program(const SignalTimeline& timeline, const MovementMap& movement_map,
                             const std::string& tls_id, const std::string& program_id, double offset) {
  int heads = 0;
  for (int p = 1; p <= kPhases; ++p) {
    const auto it = movement_map.find(p);
    if (it == movement_map.end()) throw InputError("movement map does not cover phase " + std::to_string(p));
    for (int h : it->second) {
      if (h < 0) throw InputError("negative signal-head index for phase " + std::to_string(p));
      heads = std::max(heads, h + 1);
    }
  }
  for (const auto& [p, hs] : movement_map)
    if (!valid_phase(p)) throw InputError("movement map names unknown phase " + std::to_string(p));
  if (heads == 0) throw InputError("movement map drives no signal heads");

  std::ostringstream xml;
  xml << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<additional>\n";
  xml << "    <tlLogic id=\"" << tls_id << "\" type=\"static\" programID=\"" << program_id << "\" offset=\""
      << csv::format_double(offset) << "\">\n";
  for (const auto& iv : timeline.intervals) {
    std::string state(static_cast<std::size_t>(heads), 'r');
    // A head driven by several phases shows the most permissive light.
    auto rank = [](char c) { return c == 'G' ? 2 : c == 'y' ? 1 : 0; };
    for (const auto& [p, hs] : movement_map) {
      const char c = static_cast<char>(iv.state[static_cast<std::size_t>(p - 1)]);
      for (int h : hs) {
        char& slot = state[static_cast<std::size_t>(h)];
        if (rank(c) > rank(slot)) slot = c;
      }
    }
    xml << "        <phase duration=\"" << csv::format_double(iv.duration) << "\" state=\"" << state << "\"/>\n";
  }
  xml << "    </tlLogic>\n</additional>\n";
  return xml.str();
}

std::vector<TlsPhase> parse_tls_program(const std::string& text) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    std::istringstream in(text);
    pt::read_xml(in, tree);
  } catch (const pt::xml_parser_error& e) {
    throw ParseError(std::string("bad traffic-light program: ") + e.what());
  }
  const auto root = tree.get_child_optional("additional");
  if (!root) throw ParseError("traffic-light program lacks <additional>");
  for (const auto& [name, logic] : *root) {
    if (name != "tlLogic") continue;
    std::vector<TlsPhase> out;
    for (const auto& [pname, ph] : logic) {
      if (pname != "phase") continue;
      const auto d = ph.get_optional<std::string>("<xmlattr>.duration");
      const auto s = ph.get_optional<std::string>("<xmlattr>.state");
      if (!d || !s) throw ParseError("<phase> needs duration and state");
      try {
        out.push_back({std::stod(*d), *s});
      } catch (const std::exception&) {
        throw ParseError("bad phase duration '" + *d + "'");
      }
    }
    return out;
  }
  throw ParseError("traffic-light program lacks <tlLogic>");
}

RingBarrierPlan plan_from_json(const json& doc) {
  try {
    RingBarrierPlan plan;
    if (!doc.is_object()) throw InputError("signal plan must be a JSON object");
    const auto& phases = doc.at("phases");
    if (!phases.is_array() || phases.size() != kPhases) throw InputError("signal plan needs 8 phases");
    std::set<int> seen;
    for (const auto& ph : phases) {
      const int p = ph.at("phase").get<int>();
      if (!valid_phase(p) || !seen.insert(p).second) throw InputError("bad or duplicate phase " + std::to_string(p));
      PhaseSpec s;
      s.phase = p;
      s.min_green = ph.at("min_green").get<double>();
      s.max_green = ph.at("max_green").get<double>();
      s.yellow = ph.value("yellow", kDefaultYellow);
      s.all_red = ph.value("all_red", kDefaultAllRed);
      plan.phases[static_cast<std::size_t>(p - 1)] = s;
    }
    const auto& splits = doc.at("splits");
    if (splits.is_array()) {
      if (splits.size() != kPhases) throw InputError("splits must list 8 values");
      for (std::size_t i = 0; i < kPhases; ++i) plan.splits[i] = splits[i].get<double>();
    } else if (splits.is_object()) {
      for (int p = 1; p <= kPhases; ++p) plan.split(p) = splits.at(std::to_string(p)).get<double>();
    } else {
      throw InputError("splits must be an array or an object keyed by phase");
    }
    plan.cycle_length = doc.at("cycle_length").get<double>();
    if (doc.contains("ring1")) plan.ring1 = doc.at("ring1").get<RingSequence>();
    if (doc.contains("ring2")) plan.ring2 = doc.at("ring2").get<RingSequence>();
    return plan;
  } catch (const json::exception& e) {
    throw InputError(std::string("bad signal plan JSON: ") + e.what());
  }
}

json to_json(const RingBarrierPlan& plan) {
  json phases = json::array();
  for (const auto& s : plan.phases)
    phases.push_back({{"phase", s.phase},
                      {"min_green", s.min_green},
                      {"max_green", s.max_green},
                      {"yellow", s.yellow},
                      {"all_red", s.all_red}});
  return {{"phases", phases},
          {"splits", plan.splits},
          {"cycle_length", plan.cycle_length},
          {"ring1", plan.ring1},
          {"ring2", plan.ring2}};
}

}  // namespace trafficlens::signal
