#include "evotraj/simdata.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "evotraj/errors.hpp"
#include "evotraj/rng.hpp"

namespace evotraj {

namespace {

constexpr double kKmhPerMs = 3.6;

double wrap_angle(double a) {
  while (a <= -std::numbers::pi) a += 2.0 * std::numbers::pi;
  while (a > std::numbers::pi) a -= 2.0 * std::numbers::pi;
  return a;
}

double logistic(double z) { return 1.0 / (1.0 + std::exp(-z)); }

struct LaneChange {
  double start = 0.0;  // step index, may be fractional
  double direction = 0.0;
};

}  // namespace

void EpisodeConfig::validate() const {
  if (lanes < 2) throw ConfigError("episode needs at least 2 lanes, got " + std::to_string(lanes));
  if (!(dt > 0.0)) throw ConfigError("dt must be positive");
  if (!(lane_width > 0.0)) throw ConfigError("lane_width must be positive");
  if (!(v_min > 0.0) || !(v_min < v_max)) throw ConfigError("require 0 < v_min < v_max");
  if (tau < 1) throw ConfigError("tau must be at least 1");
  if (steps < 2 * tau + 1)
    throw ConfigError("episode of " + std::to_string(steps) + " steps is shorter than 2*tau+1 = " +
                      std::to_string(2 * tau + 1));
  if (lane_changes > 0) {
    if (!(lane_change_duration > 0.0)) throw ConfigError("lane_change_duration must be positive");
    const double duration_steps = std::ceil(lane_change_duration / dt);
    const double slot = static_cast<double>(steps - 1) / static_cast<double>(lane_changes);
    if (slot < duration_steps)
      throw ConfigError("episode too short for " + std::to_string(lane_changes) + " lane changes");
  }
  if (accel_stddev < 0.0) throw ConfigError("accel_stddev must be non-negative");
}

double lane_change_profile(double u, double steepness) {
  if (u <= 0.0) return 0.0;
  if (u >= 1.0) return 1.0;
  const double lo = logistic(-0.5 * steepness);
  const double hi = logistic(0.5 * steepness);
  return (logistic(steepness * (u - 0.5)) - lo) / (hi - lo);
}

Episode simulate_episode(const EpisodeConfig& config, std::uint64_t seed) {
  config.validate();
  Rng rng(seed);

  const std::size_t n = config.steps;
  const double duration_steps = std::ceil(config.lane_change_duration / config.dt);

  int lane = static_cast<int>(rng.below(static_cast<std::size_t>(config.lanes)));
  const double x0 = (lane + 0.5) * config.lane_width;

  std::vector<LaneChange> changes;
  const double slot = static_cast<double>(n - 1) / std::max<std::size_t>(config.lane_changes, 1);
  for (std::size_t k = 0; k < config.lane_changes; ++k) {
    const double begin = k * slot;
    const double latest = begin + slot - duration_steps;
    LaneChange change;
    change.start = std::floor(rng.uniform(begin, latest));
    if (lane == 0) {
      change.direction = 1.0;
    } else if (lane == config.lanes - 1) {
      change.direction = -1.0;
    } else {
      change.direction = rng.bernoulli(0.5) ? 1.0 : -1.0;
    }
    lane += static_cast<int>(change.direction);
    changes.push_back(change);
  }

  std::vector<double> xs(n, x0);
  for (std::size_t t = 0; t < n; ++t) {
    for (const LaneChange& c : changes) {
      const double u = (static_cast<double>(t) - c.start) / duration_steps;
      xs[t] += c.direction * config.lane_width *
               lane_change_profile(u, config.lane_change_steepness);
    }
  }

  const double span = config.v_max - config.v_min;
  std::vector<double> speeds(n);
  double v = rng.uniform(config.v_min + 0.2 * span, config.v_max - 0.2 * span);
  double accel = 0.0;
  for (std::size_t t = 0; t < n; ++t) {
    speeds[t] = v;
    accel = 0.8 * accel + config.accel_stddev * rng.normal();
    v = std::clamp(v + accel * config.dt, config.v_min, config.v_max);
  }

  Episode episode;
  episode.dt = config.dt;
  episode.lanes = config.lanes;
  episode.lane_width = config.lane_width;
  episode.seed = seed;
  episode.states.resize(n);

  double y = 0.0;
  double heading = 0.0;
  for (std::size_t t = 0; t < n; ++t) {
    EgoState& s = episode.states[t];
    s.t = static_cast<std::int64_t>(t);
    s.x = xs[t];
    s.y = y;
    s.v_f = speeds[t];
    const double previous_heading = heading;
    if (t + 1 < n) {
      const double step = speeds[t] / kKmhPerMs * config.dt;
      const double dx = xs[t + 1] - xs[t];
      if (std::abs(dx) > step)
        throw ConfigError("lane change too fast for the simulated speed");
      const double dy = std::sqrt(step * step - dx * dx);
      heading = std::atan2(dx, dy);
      y += dy;
    }
    s.heading = heading;
    s.v_delta = t == 0 ? 0.0 : wrap_angle(heading - previous_heading) / config.dt;
  }
  return episode;
}

void GridConfig::validate() const {
  if (width < 8 || height < 8)
    throw ConfigError("grid must be at least 8x8, got " + std::to_string(width) + "x" +
                      std::to_string(height));
  if (channels < 1) throw ConfigError("grid needs at least one channel");
  if (!(lateral_span > 0.0) || !(longitudinal_span > 0.0))
    throw ConfigError("grid spans must be positive");
  if (!(dash_period > 0.0)) throw ConfigError("dash_period must be positive");
}

namespace {

enum class Cell { Empty, Surface, Marking, Boundary, Ego };

void paint(OccupancyGrid& grid, std::size_t row, std::size_t col, Cell kind) {
  // Greyscale levels; with three channels the classes get distinct colours.
  static constexpr float kGrey[] = {0.0f, 0.2f, 0.6f, 0.8f, 1.0f};
  static constexpr float kRgb[][3] = {{0.0f, 0.0f, 0.0f},
                                      {0.2f, 0.2f, 0.2f},
                                      {0.9f, 0.9f, 0.5f},
                                      {0.9f, 0.3f, 0.3f},
                                      {1.0f, 1.0f, 1.0f}};
  const auto k = static_cast<std::size_t>(kind);
  float* cell = &grid.cells[(row * grid.width + col) * grid.channels];
  for (std::size_t ch = 0; ch < grid.channels; ++ch)
    cell[ch] = grid.channels == 3 ? kRgb[k][ch] : kGrey[k];
}

}  // namespace

OccupancyGrid render_grid(const Episode& episode, std::size_t t, const GridConfig& config) {
  if (t >= episode.states.size())
    throw std::out_of_range("render_grid: step " + std::to_string(t) + " outside episode of " +
                            std::to_string(episode.states.size()) + " steps");
  config.validate();

  OccupancyGrid grid;
  grid.width = config.width;
  grid.height = config.height;
  grid.channels = config.channels;
  grid.cells.assign(config.width * config.height * config.channels, 0.0f);

  const EgoState& ego = episode.states[t];
  const double cell_w = config.lateral_span / static_cast<double>(config.width);
  const double cell_h = config.longitudinal_span / static_cast<double>(config.height);
  const double ego_row = config.ego_row_fraction * static_cast<double>(config.height);
  const double road_right = episode.lanes * episode.lane_width;

  for (std::size_t r = 0; r < config.height; ++r) {
    const double dy = (ego_row - (static_cast<double>(r) + 0.5)) * cell_h;
    const double wy = ego.y + dy;
    double phase = std::fmod(wy, config.dash_period);
    if (phase < 0.0) phase += config.dash_period;
    const bool dash_on = phase < config.dash_length;

    for (std::size_t c = 0; c < config.width; ++c) {
      const double dx = (static_cast<double>(c) + 0.5) * cell_w - 0.5 * config.lateral_span;
      const double wx = ego.x + dx;

      Cell kind = Cell::Empty;
      if (config.road_surface && wx >= 0.0 && wx <= road_right) kind = Cell::Surface;
      if (config.lane_markings && dash_on) {
        for (int k = 1; k < episode.lanes; ++k) {
          if (std::abs(wx - k * episode.lane_width) <= 0.5 * cell_w) kind = Cell::Marking;
        }
      }
      if (config.road_boundaries &&
          (std::abs(wx) <= 0.5 * cell_w || std::abs(wx - road_right) <= 0.5 * cell_w))
        kind = Cell::Boundary;
      if (std::abs(dx) <= 0.5 * config.ego_width && std::abs(dy) <= 0.5 * config.ego_length)
        kind = Cell::Ego;
      if (kind != Cell::Empty) paint(grid, r, c, kind);
    }
  }
  return grid;
}

std::size_t window_count(std::size_t length, std::size_t tau, std::size_t stride) {
  if (tau == 0 || stride == 0 || length < 2 * tau) return 0;
  return (length - 2 * tau) / stride + 1;
}

std::vector<SequenceSample> build_sequences(const Episode& episode, std::size_t tau,
                                            std::size_t stride, const GridConfig& grid) {
  if (tau < 1) throw ConfigError("tau must be at least 1");
  if (stride < 1) throw ConfigError("stride must be at least 1");
  const std::size_t count = window_count(episode.size(), tau, stride);
  if (count == 0) return {};

  // Each step is rendered once; windows overlap heavily.
  const std::size_t last_input = (count - 1) * stride + tau;
  std::vector<OccupancyGrid> frames;
  frames.reserve(last_input);
  for (std::size_t t = 0; t < last_input; ++t) frames.push_back(render_grid(episode, t, grid));

  std::vector<SequenceSample> samples;
  samples.reserve(count);
  for (std::size_t w = 0; w < count; ++w) {
    const std::size_t origin = w * stride + tau - 1;
    SequenceSample s;
    s.episode_id = episode.id;
    s.origin_t = static_cast<std::int64_t>(origin);
    s.inputs.assign(frames.begin() + static_cast<std::ptrdiff_t>(origin + 1 - tau),
                    frames.begin() + static_cast<std::ptrdiff_t>(origin + 1));
    const Vec2 base = episode.position(origin);
    for (std::size_t k = 1; k <= tau; ++k) s.targets.push_back(episode.position(origin + k) - base);
    samples.push_back(std::move(s));
  }
  return samples;
}

SplitCounts split_sizes(std::size_t n, const SplitRatios& ratios) {
  SplitCounts c;
  c.train = std::min<std::size_t>(n, static_cast<std::size_t>(std::llround(n * ratios.train)));
  c.val = std::min<std::size_t>(n - c.train, static_cast<std::size_t>(std::llround(n * ratios.val)));
  c.test = n - c.train - c.val;
  return c;
}

Dataset split_dataset(std::vector<SequenceSample> samples, const SplitRatios& ratios,
                      std::uint64_t seed) {
  if (samples.empty()) throw ConfigError("split_dataset: no samples to split");
  if (ratios.train < 0.0 || ratios.val < 0.0 || ratios.test < 0.0 ||
      std::abs(ratios.train + ratios.val + ratios.test - 1.0) > 1e-9)
    throw ConfigError("split ratios must be non-negative and sum to 1");

  const SequenceSample& first = samples.front();
  if (first.inputs.empty()) throw ShapeError("split_dataset: sample without input grids");
  for (const SequenceSample& s : samples) {
    if (s.inputs.size() != first.inputs.size() || s.targets.size() != s.inputs.size())
      throw ShapeError("split_dataset: samples disagree on tau");
    for (const OccupancyGrid& g : s.inputs) {
      if (g.width != first.inputs[0].width || g.height != first.inputs[0].height ||
          g.channels != first.inputs[0].channels)
        throw ShapeError("split_dataset: samples disagree on grid shape");
    }
  }

  std::stable_sort(samples.begin(), samples.end(),
                   [](const SequenceSample& a, const SequenceSample& b) { return id_of(a) < id_of(b); });

  const SplitCounts counts = split_sizes(samples.size(), ratios);
  Dataset d;
  d.manifest.seed = seed;
  d.manifest.tau = first.inputs.size();
  d.manifest.grid_w = first.inputs[0].width;
  d.manifest.grid_h = first.inputs[0].height;
  d.manifest.channels = first.inputs[0].channels;
  d.manifest.counts = counts;
  d.manifest.ratios = ratios;

  const auto test_begin = samples.end() - static_cast<std::ptrdiff_t>(counts.test);
  d.test.assign(std::make_move_iterator(test_begin), std::make_move_iterator(samples.end()));
  samples.erase(test_begin, samples.end());

  Rng rng(seed);
  for (std::size_t i = samples.size(); i > 1; --i) std::swap(samples[i - 1], samples[rng.below(i)]);

  const auto val_begin = samples.begin() + static_cast<std::ptrdiff_t>(counts.train);
  d.train.assign(std::make_move_iterator(samples.begin()), std::make_move_iterator(val_begin));
  d.val.assign(std::make_move_iterator(val_begin), std::make_move_iterator(samples.end()));
  return d;
}

}  // namespace evotraj
