#pragma once

#include <filesystem>
#include <random>
#include <string>

#include "trafficlens/trajectory.hpp"

namespace testing_util {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::mt19937_64 rng(std::random_device{}());
    path_ = std::filesystem::temp_directory_path() / ("trafficlens_" + tag + "_" + std::to_string(rng()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

// Planar journey with xy filled directly; pos mirrors xy for convenience.
inline trafficlens::Journey planar_journey(const std::string& id,
                                           std::initializer_list<std::tuple<double, double, double, double>> pts) {
  trafficlens::Journey j;
  j.id = id;
  for (const auto& [t, x, y, v] : pts) {
    trafficlens::TrajectorySample s;
    s.t = t;
    s.xy = {x, y};
    s.pos = {x, y};
    s.speed = v;
    s.ignition = trafficlens::Ignition::on;
    j.samples.push_back(s);
  }
  return j;
}

}  // namespace testing_util
