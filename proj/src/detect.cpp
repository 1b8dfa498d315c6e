#include "trafficlens/detect.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "trafficlens/error.hpp"

namespace trafficlens::detect {

std::string_view to_string(Cohort c) {
  switch (c) {
    case Cohort::current:
      return "current";
    case Cohort::week_minus_1:
      return "week_minus_1";
    case Cohort::week_minus_2:
      return "week_minus_2";
  }
  return "?";
}

FeatureVector featurize(const Journey& fragment, Cohort cohort, const analytics::StopParams& stops) {
  if (fragment.samples.size() < 2)
    throw InputError("journey '" + fragment.id + "' needs at least 2 samples to featurize");
  FeatureVector v;
  v.journey_id = fragment.id;
  v.cohort = cohort;
  for (const auto& s : analytics::detect_stops(fragment, stops)) v.stopped_time += s.duration;
  double sum = 0.0;
  for (const auto& s : fragment.samples) sum += *s.speed;
  const double n = static_cast<double>(fragment.samples.size());
  v.avg_speed = sum / n;
  double ss = 0.0;
  for (const auto& s : fragment.samples) ss += (*s.speed - v.avg_speed) * (*s.speed - v.avg_speed);
  v.speed_std = std::sqrt(ss / n);
  v.travel_time = fragment.duration();
  return v;
}

std::vector<Point> normalize(std::span<const Point> rows) {
  if (rows.size() < 2) throw InputError("normalization needs at least 2 vectors");
  const std::size_t d = rows.front().size();
  for (const auto& r : rows)
    if (r.size() != d) throw InputError("feature vectors differ in dimension");
  const double n = static_cast<double>(rows.size());
  std::vector<double> mean(d, 0.0), sd(d, 0.0);
  for (const auto& r : rows)
    for (std::size_t j = 0; j < d; ++j) mean[j] += r[j] / n;
  for (const auto& r : rows)
    for (std::size_t j = 0; j < d; ++j) sd[j] += (r[j] - mean[j]) * (r[j] - mean[j]) / n;
  for (auto& s : sd) s = std::sqrt(s);
  std::vector<Point> out;
  out.reserve(rows.size());
  for (const auto& r : rows) {
    Point z(d, 0.0);
    for (std::size_t j = 0; j < d; ++j)
      z[j] = sd[j] > 1e-12 * std::max(1.0, std::abs(mean[j])) ? (r[j] - mean[j]) / sd[j] : 0.0;
    out.push_back(std::move(z));
  }
  return out;
}

std::vector<Point> normalize(std::span<const FeatureVector> vectors) {
  std::vector<Point> rows;
  rows.reserve(vectors.size());
  for (const auto& v : vectors) rows.push_back(v.values());
  return normalize(rows);
}

std::size_t effective_k(std::size_t n, std::size_t k) { return n == 0 ? 0 : std::min(k, n - 1); }

std::vector<double> abof(std::span<const Point> points, std::size_t k) {
  const std::size_t n = points.size();
  if (n < 3) throw InputError("ABOF needs at least 3 points");
  if (k < 2) throw InputError("ABOF needs k >= 2");
  const std::size_t kk = effective_k(n, k);
  const std::size_t d = points.front().size();

  std::vector<double> out(n);
  std::vector<std::pair<double, std::size_t>> dist(n);
  std::vector<Point> diffs(kk, Point(d));
  std::vector<double> norms(kk);
  std::vector<double> vals, weights;

  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = 0; b < n; ++b) {
      double s = 0.0;
      for (std::size_t j = 0; j < d; ++j) {
        const double x = points[b][j] - points[a][j];
        s += x * x;
      }
      dist[b] = {b == a ? INFINITY : s, b};
    }
    std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(kk), dist.end());
    for (std::size_t i = 0; i < kk; ++i) {
      const auto& p = points[dist[i].second];
      for (std::size_t j = 0; j < d; ++j) diffs[i][j] = p[j] - points[a][j];
      norms[i] = std::sqrt(dist[i].first);
    }

    vals.clear();
    weights.clear();
    for (std::size_t i = 0; i < kk; ++i) {
      if (norms[i] == 0.0) continue;
      for (std::size_t m = i + 1; m < kk; ++m) {
        if (norms[m] == 0.0) continue;
        double dot = 0.0;
        for (std::size_t j = 0; j < d; ++j) dot += diffs[i][j] * diffs[m][j];
        const double nn = norms[i] * norms[m];
        vals.push_back(dot / (nn * nn));
        weights.push_back(1.0 / nn);
      }
    }
    if (vals.empty()) throw InputError("ABOF undefined: all neighbour pairs coincide with a point");
    double sw = 0.0, swv = 0.0;
    for (std::size_t i = 0; i < vals.size(); ++i) {
      sw += weights[i];
      swv += weights[i] * vals[i];
    }
    const double mean = swv / sw;
    double var = 0.0;
    for (std::size_t i = 0; i < vals.size(); ++i) var += weights[i] * (vals[i] - mean) * (vals[i] - mean);
    out[a] = var / sw;
  }
  return out;
}

std::vector<OutlierScore> abof_scores(std::span<const FeatureVector> vectors, std::size_t k) {
  const auto z = normalize(vectors);
  const auto f = abof(z, k);
  std::vector<OutlierScore> out;
  out.reserve(vectors.size());
  for (std::size_t i = 0; i < vectors.size(); ++i) out.push_back({vectors[i].journey_id, f[i], vectors[i].cohort, false});
  return out;
}

std::vector<OutlierScore> flag_outliers(std::vector<OutlierScore> scores, double contamination) {
  if (!(contamination > 0.0 && contamination < 0.5)) throw InputError("contamination must lie in (0, 0.5)");
  std::vector<std::size_t> eligible;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    scores[i].flagged = false;
    if (scores[i].cohort == Cohort::current) eligible.push_back(i);
  }
  const auto quota = static_cast<std::size_t>(std::floor(contamination * static_cast<double>(eligible.size()) + 1e-9));
  std::sort(eligible.begin(), eligible.end(), [&](std::size_t a, std::size_t b) {
    if (scores[a].abof != scores[b].abof) return scores[a].abof < scores[b].abof;
    return scores[a].journey_id < scores[b].journey_id;
  });
  for (std::size_t i = 0; i < quota && i < eligible.size(); ++i) scores[eligible[i]].flagged = true;
  return scores;
}

AtspmComparison atspm_interruption(const std::string& intersection_id, const ingest::PhaseVolumeTable& current,
                                   std::span<const ingest::PhaseVolumeTable> baselines, double threshold) {
  if (!(threshold > 0.0)) throw InputError("deviation threshold must be positive");
  std::set<std::pair<int, std::int64_t>> keys;
  for (const auto& [k, c] : current.counts) keys.insert(k);
  for (const auto& b : baselines)
    for (const auto& [k, c] : b.counts) keys.insert(k);

  AtspmComparison out;
  for (const auto& key : keys) {
    const auto it = current.counts.find(key);
    const std::int64_t cur = it == current.counts.end() ? 0 : it->second;
    double sum = 0.0;
    int n = 0;
    for (const auto& b : baselines) {
      const auto bt = b.counts.find(key);
      if (bt == b.counts.end()) continue;
      sum += static_cast<double>(bt->second);
      ++n;
    }
    if (n == 0) {
      out.no_baseline.push_back({key.first, key.second, cur});
      continue;
    }
    PhaseDeviation d;
    d.intersection_id = intersection_id;
    d.phase = key.first;
    d.hour = key.second;
    d.current = cur;
    d.baseline_mean = sum / n;
    d.score = (static_cast<double>(cur) - d.baseline_mean) / std::max(1.0, d.baseline_mean);
    d.flagged = std::abs(d.score) >= threshold;
    out.deviations.push_back(d);
  }
  return out;
}

}  // namespace trafficlens::detect
