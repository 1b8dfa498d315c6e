#include "trafficlens/trajectory.hpp"

#include "trafficlens/geo.hpp"

namespace trafficlens {

std::string_view to_string(Ignition ig) {
  switch (ig) {
    case Ignition::on:
      return "on";
    case Ignition::off:
      return "off";
    case Ignition::unknown:
      break;
  }
  return "unknown";
}

std::optional<Ignition> parse_ignition(std::string_view s) {
  if (s == "on" || s == "1" || s == "true") return Ignition::on;
  if (s == "off" || s == "0" || s == "false") return Ignition::off;
  if (s.empty() || s == "unknown") return Ignition::unknown;
  return std::nullopt;
}

double Journey::path_length() const {
  double len = 0.0;
  for (std::size_t i = 1; i < samples.size(); ++i) len += geo::distance(samples[i - 1].xy, samples[i].xy);
  return len;
}

bool Journey::gapped(double max_gap) const {
  for (std::size_t i = 1; i < samples.size(); ++i)
    if (samples[i].t - samples[i - 1].t > max_gap) return true;
  return false;
}

void Journey::project(const geo::LocalProjection& proj) {
  for (auto& s : samples) s.xy = proj.project(s.pos);
}

}  // namespace trafficlens
