#pragma once

#include <atomic>
#include <chrono>
#include <filesystem>
#include <string>
#include <unistd.h>

#include "evotraj/simdata.hpp"

namespace testsupport {

/// Fresh directory under the system temp path, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("evotraj_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& rel) const { return path_ / rel; }

 private:
  std::filesystem::path path_;
};

/// A small real dataset: a few simulated episodes on 8x8 or larger grids.
inline evotraj::Dataset small_dataset(std::size_t episodes = 3, std::size_t tau = 3, std::size_t grid = 16,
                                      std::uint64_t seed = 11) {
  evotraj::EpisodeConfig ec;
  ec.steps = 30;
  ec.tau = tau;
  ec.lane_change_duration = 1.5;
  evotraj::GridConfig gc;
  gc.width = grid;
  gc.height = grid;
  std::vector<evotraj::SequenceSample> samples;
  for (std::size_t e = 0; e < episodes; ++e) {
    evotraj::Episode ep = evotraj::simulate_episode(ec, seed + e);
    ep.id = e;
    for (auto& s : evotraj::build_sequences(ep, tau, 2, gc)) samples.push_back(std::move(s));
  }
  evotraj::Dataset d = evotraj::split_dataset(std::move(samples), {}, seed);
  d.manifest.dt = ec.dt;
  d.manifest.episodes = episodes;
  return d;
}

}  // namespace testsupport
