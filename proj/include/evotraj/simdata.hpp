#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "evotraj/geometry.hpp"

namespace evotraj {

// ---------------------------------------------------------------------------
// Episodes
// ---------------------------------------------------------------------------

struct EgoState {
  double x = 0.0;        ///< lateral position, m (0 = left road edge)
  double y = 0.0;        ///< longitudinal position, m
  double heading = 0.0;  ///< radians from the +y axis, positive towards +x, in (-pi, pi]
  double v_f = 0.0;      ///< forward speed, km/h
  double v_delta = 0.0;  ///< angular velocity, rad/s
  std::int64_t t = 0;    ///< timestep index

  friend bool operator==(const EgoState&, const EgoState&) = default;
};

/// Highway generator settings. The ego vehicle is a point mass whose lateral
/// offset follows a normalised logistic profile during each lane change.
struct EpisodeConfig {
  std::size_t steps = 60;
  double dt = 0.1;
  int lanes = 3;
  double lane_width = 3.5;
  double v_min = 80.0;   ///< km/h
  double v_max = 130.0;  ///< km/h
  std::size_t lane_changes = 1;
  double lane_change_duration = 2.0;  ///< seconds from start to end of the manoeuvre
  double lane_change_steepness = 10.0;
  double accel_stddev = 8.0;  ///< km/h per second, std-dev of the speed random walk
  std::size_t tau = 5;        ///< sequence length the episode must support (steps >= 2 tau + 1)

  void validate() const;
};

struct Episode {
  std::vector<EgoState> states;
  double dt = 0.1;
  int lanes = 0;
  double lane_width = 0.0;
  std::uint64_t seed = 0;
  std::size_t id = 0;

  std::size_t size() const { return states.size(); }
  Vec2 position(std::size_t t) const { return {states.at(t).x, states.at(t).y}; }

  friend bool operator==(const Episode&, const Episode&) = default;
};

/// Lane-change lateral profile on u in [0, 1], rising from exactly 0 to exactly 1.
double lane_change_profile(double u, double steepness);

Episode simulate_episode(const EpisodeConfig& config, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Occupancy grids
// ---------------------------------------------------------------------------

struct GridConfig {
  std::size_t width = 32;
  std::size_t height = 32;
  std::size_t channels = 1;
  double lateral_span = 16.0;       ///< metres covered by the grid width
  double longitudinal_span = 32.0;  ///< metres covered by the grid height
  double ego_row_fraction = 0.75;   ///< vertical position of the ego centre (0 = top)
  double ego_width = 1.8;
  double ego_length = 4.5;
  double dash_length = 3.0;
  double dash_period = 9.0;
  bool road_surface = true;
  bool lane_markings = true;
  bool road_boundaries = true;

  void validate() const;
};

/// Row-major (row, column, channel) raster, every cell in [0, 1].
struct OccupancyGrid {
  std::size_t width = 0;
  std::size_t height = 0;
  std::size_t channels = 0;
  std::vector<float> cells;

  float at(std::size_t row, std::size_t col, std::size_t ch = 0) const {
    return cells[(row * width + col) * channels + ch];
  }

  friend bool operator==(const OccupancyGrid&, const OccupancyGrid&) = default;
};

/// Ego-centric, road-aligned top-down rendering of the scene at step t.
/// Throws std::out_of_range when t is not a valid step.
OccupancyGrid render_grid(const Episode& episode, std::size_t t, const GridConfig& grid);

// ---------------------------------------------------------------------------
// Sequences and datasets
// ---------------------------------------------------------------------------

/// tau input grids ending at origin_t and the tau following ego positions,
/// expressed relative to the ego position at origin_t (road-aligned axes).
struct SequenceSample {
  std::vector<OccupancyGrid> inputs;
  std::vector<Vec2> targets;
  std::size_t episode_id = 0;
  std::int64_t origin_t = 0;

  friend bool operator==(const SequenceSample&, const SequenceSample&) = default;
};

/// Number of windows produced for an episode of `length` steps.
std::size_t window_count(std::size_t length, std::size_t tau, std::size_t stride);

std::vector<SequenceSample> build_sequences(const Episode& episode, std::size_t tau,
                                            std::size_t stride, const GridConfig& grid);

struct SplitRatios {
  double train = 0.6;
  double val = 0.2;
  double test = 0.2;
  friend bool operator==(const SplitRatios&, const SplitRatios&) = default;
};

struct SplitCounts {
  std::size_t train = 0;
  std::size_t val = 0;
  std::size_t test = 0;
  friend bool operator==(const SplitCounts&, const SplitCounts&) = default;
};

/// (episode id, origin step) pair identifying a sample.
struct SampleId {
  std::size_t episode = 0;
  std::int64_t origin_t = 0;
  friend auto operator<=>(const SampleId&, const SampleId&) = default;
};

inline SampleId id_of(const SequenceSample& s) { return {s.episode_id, s.origin_t}; }

inline constexpr int kDatasetFormatVersion = 1;

struct DatasetManifest {
  int format_version = kDatasetFormatVersion;
  std::uint64_t seed = 0;
  std::size_t tau = 0;
  std::size_t grid_w = 0;
  std::size_t grid_h = 0;
  std::size_t channels = 0;
  double dt = 0.1;
  SplitCounts counts;
  double v_min = 80.0;
  double v_max = 130.0;
  double lane_width = 3.5;
  SplitRatios ratios;
  std::size_t episodes = 0;

  friend bool operator==(const DatasetManifest&, const DatasetManifest&) = default;
};

struct Dataset {
  std::vector<SequenceSample> train;
  std::vector<SequenceSample> val;
  std::vector<SequenceSample> test;
  DatasetManifest manifest;

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

/// Partitions samples into train/val/test. Sizes are round(n * ratio) for
/// train and val; test takes the rest. The test split is the tail of the
/// samples ordered by (episode, origin_t), so it is made of held-out
/// episodes; train and val are shuffled by `seed` before being cut.
Dataset split_dataset(std::vector<SequenceSample> samples, const SplitRatios& ratios,
                      std::uint64_t seed);

SplitCounts split_sizes(std::size_t n, const SplitRatios& ratios);

/// Writes manifest.json plus <split>.grids.f32 / <split>.targets.csv for
/// train, val and test. Every file is written to a temporary and renamed.
void save_dataset(const Dataset& dataset, const std::filesystem::path& directory);

/// Throws FormatError (naming the offending file) on malformed input and
/// FormatVersionError on an unknown format version.
Dataset load_dataset(const std::filesystem::path& directory);

/// Reads and validates only manifest.json.
DatasetManifest load_manifest(const std::filesystem::path& directory);

}  // namespace evotraj
