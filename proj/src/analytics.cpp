#include "trafficlens/analytics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "trafficlens/error.hpp"

namespace trafficlens::analytics {

namespace {

const masks::ApproachZone* nearest_approach(const masks::Mask& mask, double bearing) {
  const masks::ApproachZone* best = nullptr;
  double best_diff = INFINITY;
  for (const auto& a : mask.approaches) {
    const double d = masks::angle_between(bearing, a.entry_bearing);
    if (d < best_diff) {
      best_diff = d;
      best = &a;
    }
  }
  return best;
}

}  // namespace

std::vector<StopEvent> detect_stops(const Journey& journey, const StopParams& params) {
  std::vector<StopEvent> out;
  const auto& s = journey.samples;
  std::size_t i = 0;
  while (i < s.size()) {
    if (!s[i].speed) throw InputError("journey '" + journey.id + "' has samples without speed");
    if (*s[i].speed >= params.speed_threshold) {
      ++i;
      continue;
    }
    std::size_t k = i;
    while (k + 1 < s.size() && s[k + 1].speed && *s[k + 1].speed < params.speed_threshold) ++k;
    const double t_end = k + 1 < s.size() ? s[k + 1].t : s[k].t;
    const double duration = t_end - s[i].t;
    if (duration >= params.min_duration) out.push_back({journey.id, s[i].t, duration, s[i].xy, std::nullopt});
    i = k + 1;
  }
  return out;
}

MovementResult classify_movement(const Journey& fragment, const masks::Mask& mask, double boundary_tolerance) {
  if (fragment.samples.size() < 2) return {std::nullopt, "fragment has fewer than 2 samples"};
  if (mask.approaches.empty() || !mask.center || mask.geometry.empty())
    return {std::nullopt, "mask has no approaches"};
  const auto& poly = mask.geometry.front();
  const auto& first = fragment.samples.front();
  const auto& last = fragment.samples.back();
  if (geo::distance_to_boundary(first.xy, poly) > boundary_tolerance)
    return {std::nullopt, "fragment starts inside the mask"};
  if (geo::distance_to_boundary(last.xy, poly) > boundary_tolerance)
    return {std::nullopt, "fragment ends inside the mask"};

  const auto* in = nearest_approach(mask, geo::bearing(*mask.center, first.xy));
  const auto* out = nearest_approach(mask, geo::bearing(*mask.center, last.xy));
  const double tt = last.t - first.t;
  if (!(tt > 0.0)) return {std::nullopt, "non-positive travel time"};
  return {MovementRecord{fragment.id, in->direction, masks::opposite(out->direction), tt, first.t}, {}};
}

DirectionMatrix<long> od_matrix(std::span<const MovementRecord> records) {
  DirectionMatrix<long> m{};
  for (const auto& r : records) ++m[index(r.origin)][index(r.dest)];
  return m;
}

DirectionMatrix<std::optional<double>> travel_time_matrix(std::span<const MovementRecord> records) {
  DirectionMatrix<double> sum{};
  DirectionMatrix<long> n{};
  for (const auto& r : records) {
    sum[index(r.origin)][index(r.dest)] += r.travel_time;
    ++n[index(r.origin)][index(r.dest)];
  }
  DirectionMatrix<std::optional<double>> out{};
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 4; ++j)
      if (n[i][j] > 0) out[i][j] = sum[i][j] / static_cast<double>(n[i][j]);
  return out;
}

DirectionMatrix<std::optional<double>> travel_time_median_matrix(std::span<const MovementRecord> records) {
  DirectionMatrix<std::vector<double>> cells{};
  for (const auto& r : records) cells[index(r.origin)][index(r.dest)].push_back(r.travel_time);
  DirectionMatrix<std::optional<double>> out{};
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 4; ++j) {
      auto& v = cells[i][j];
      if (v.empty()) continue;
      std::sort(v.begin(), v.end());
      const std::size_t m = v.size() / 2;
      out[i][j] = v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
    }
  return out;
}

QueueReport queue_distributions(std::span<const StopEvent> stops, const masks::Mask& mask, double min_stop) {
  std::array<std::vector<double>, 4> dist;
  QueueReport report;
  for (const auto& s : stops) {
    if (!(s.duration > min_stop)) continue;
    const masks::ApproachZone* a = s.approach ? mask.approach(*s.approach) : nullptr;
    if (!a) {
      ++report.excluded;
      continue;
    }
    dist[index(a->direction)].push_back(geo::distance(s.location, a->stop_bar));
  }
  for (auto d : masks::kDirections) {
    const auto& v = dist[index(d)];
    if (v.empty()) continue;
    QueueDistribution q{d, 0.0, 0.0, v.size()};
    double sum = 0.0;
    for (double x : v) sum += x;
    q.mu = sum / static_cast<double>(v.size());
    if (v.size() > 1) {
      double ss = 0.0;
      for (double x : v) ss += (x - q.mu) * (x - q.mu);
      q.sigma = std::sqrt(ss / static_cast<double>(v.size() - 1));
    }
    report.distributions.push_back(q);
  }
  return report;
}

std::vector<BrakingEvent> detect_braking(const Journey& journey, const BrakingParams& params) {
  std::vector<BrakingEvent> out;
  const auto& s = journey.samples;
  if (s.size() < 2 || journey.duration() < params.sustain - 1e-9) return out;
  const double limit = -params.threshold_g * kGravity;
  auto accel = [&](std::size_t i) {
    if (!s[i].speed || !s[i + 1].speed) throw InputError("journey '" + journey.id + "' has samples without speed");
    const double dt = s[i + 1].t - s[i].t;
    return dt > 0.0 ? (*s[i + 1].speed - *s[i].speed) / dt : 0.0;
  };
  std::size_t i = 0;
  while (i + 1 < s.size()) {
    if (accel(i) > limit + 1e-9) {
      ++i;
      continue;
    }
    std::size_t k = i;  // last segment index in the window
    double peak = accel(i);
    while (k + 2 < s.size() && accel(k + 1) <= limit + 1e-9) {
      ++k;
      peak = std::min(peak, accel(k));
    }
    const double span = s[k + 1].t - s[i].t;
    if (span >= params.sustain - 1e-9) out.push_back({journey.id, s[i].t, span, peak, s[i].xy});
    i = k + 1;
  }
  return out;
}

void attribute_stops(std::vector<StopEvent>& stops, const Journey& fragment, const MovementRecord& movement,
                     const PlanarPoint& center) {
  double t_closest = fragment.t_first();
  double best = INFINITY;
  for (const auto& s : fragment.samples) {
    const double d = geo::distance(s.xy, center);
    if (d < best) {
      best = d;
      t_closest = s.t;
    }
  }
  for (auto& st : stops)
    if (st.t_start <= t_closest) st.approach = movement.origin;
}

}  // namespace trafficlens::analytics
