#pragma once

// On-disk journey store partitioned as
//   <root>/date=YYYY-MM-DD/hour=HH/<intersection>.ndjson
// with one journey per line and a manifest.json at the root. Journeys without
// an intersection go to "_corridor.ndjson". A journey's partition is decided by
// its first sample time (UTC).

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "trafficlens/timeutil.hpp"
#include "trafficlens/trajectory.hpp"

namespace trafficlens::ingest {

class JourneyStore {
 public:
  explicit JourneyStore(std::filesystem::path root);

  const std::filesystem::path& root() const { return root_; }

  /// Writes journeys under `intersection_id` (empty for corridor fragments).
  /// Journeys already stored with the same (id, part, mask_id) are replaced.
  void put(std::span<const Journey> journeys, const std::string& intersection_id);

  /// Journeys whose first sample falls inside `window`, sorted by (id, part).
  std::vector<Journey> load(const TimeRange& window, const std::string& intersection_id) const;

  /// Every journey in one partition file.
  std::vector<Journey> load_partition(const std::string& date, int hour, const std::string& intersection_id) const;

  /// Rebuilds and writes manifest.json; returns it.
  nlohmann::json refresh_manifest() const;

 private:
  std::filesystem::path partition_path(const std::string& date, int hour, const std::string& intersection_id) const;

  std::filesystem::path root_;
};

nlohmann::json journey_to_json(const Journey& j);
Journey journey_from_json(const nlohmann::json& doc);

}  // namespace trafficlens::ingest
