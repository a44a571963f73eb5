#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include <nlohmann/json.hpp>

#include "evotraj/errors.hpp"
#include "evotraj/io_util.hpp"
#include "evotraj/simdata.hpp"
#include "support.hpp"

using namespace evotraj;

namespace {

EpisodeConfig base_config() {
  EpisodeConfig c;
  c.steps = 80;
  c.tau = 5;
  return c;
}

Episode straight_episode(std::size_t n, double step_y) {
  Episode e;
  e.dt = 0.1;
  e.lanes = 3;
  e.lane_width = 3.5;
  for (std::size_t t = 0; t < n; ++t) {
    EgoState s;
    s.x = 5.25;
    s.y = step_y * static_cast<double>(t);
    s.v_f = step_y / e.dt * 3.6;
    s.t = static_cast<std::int64_t>(t);
    e.states.push_back(s);
  }
  return e;
}

std::vector<SequenceSample> fake_samples(std::size_t n, std::size_t episodes = 1) {
  std::vector<SequenceSample> out;
  OccupancyGrid g{8, 8, 1, std::vector<float>(64, 0.0f)};
  for (std::size_t i = 0; i < n; ++i) {
    SequenceSample s;
    s.inputs = {g};
    s.targets = {{0.0, double(i)}};
    s.episode_id = i % episodes;
    s.origin_t = static_cast<std::int64_t>(i);
    out.push_back(s);
  }
  return out;
}

}  // namespace

TEST_CASE("episode without lane changes keeps a constant lateral position") {
  EpisodeConfig c = base_config();
  c.lane_changes = 0;
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const Episode e = simulate_episode(c, seed);
    for (const EgoState& s : e.states) CHECK(std::abs(s.x - e.states[0].x) < 1e-9);
  }
}

TEST_CASE("episodes are deterministic per seed") {
  const EpisodeConfig c = base_config();
  CHECK(simulate_episode(c, 42) == simulate_episode(c, 42));
  CHECK_FALSE(simulate_episode(c, 42) == simulate_episode(c, 43));
}

TEST_CASE("one lane change moves the ego by one lane width") {
  EpisodeConfig c = base_config();
  c.lane_changes = 1;
  c.lane_width = 3.5;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Episode e = simulate_episode(c, seed);
    CHECK(std::abs(std::abs(e.states.back().x - e.states.front().x) - 3.5) <= 0.05);
  }
}

TEST_CASE("lane-change profile runs from exactly 0 to exactly 1 and is monotone") {
  CHECK(lane_change_profile(0.0, 10.0) == 0.0);
  CHECK(lane_change_profile(1.0, 10.0) == 1.0);
  CHECK(lane_change_profile(0.5, 10.0) == doctest::Approx(0.5));
  double prev = 0.0;
  for (int i = 1; i <= 100; ++i) {
    const double v = lane_change_profile(i / 100.0, 10.0);
    CHECK(v >= prev);
    prev = v;
  }
}

TEST_CASE("episode invariants: unit time stride, heading range, speed clamps, kinematic consistency") {
  EpisodeConfig c = base_config();
  c.lane_changes = 2;
  c.accel_stddev = 40.0;  // push the random walk into the clamps
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Episode e = simulate_episode(c, seed);
    REQUIRE(e.size() == c.steps);
    for (std::size_t t = 0; t < e.size(); ++t) {
      const EgoState& s = e.states[t];
      CHECK(s.t == static_cast<std::int64_t>(t));
      CHECK(s.v_f >= c.v_min);
      CHECK(s.v_f <= c.v_max);
      CHECK(s.heading > -M_PI);
      CHECK(s.heading <= M_PI);
      if (t + 1 < e.size()) {
        const double speed = norm(e.position(t + 1) - e.position(t)) / e.dt;
        const double expected = s.v_f / 3.6;
        CHECK(std::abs(speed - expected) <= 1e-6 * expected);
      }
    }
  }
}

TEST_CASE("invalid episode configurations are rejected") {
  EpisodeConfig c = base_config();
  c.lanes = 0;
  CHECK_THROWS_AS(simulate_episode(c, 1), ConfigError);
  c = base_config();
  c.dt = 0.0;
  CHECK_THROWS_AS(simulate_episode(c, 1), ConfigError);
  c = base_config();
  c.steps = 2 * c.tau;
  CHECK_THROWS_AS(simulate_episode(c, 1), ConfigError);
}

TEST_CASE("grids stay in [0, 1] with the ego block at full intensity") {
  const Episode e = simulate_episode(base_config(), 5);
  for (std::size_t channels : {1u, 3u}) {
    GridConfig g;
    g.channels = channels;
    for (std::size_t t = 0; t < e.size(); t += 7) {
      const OccupancyGrid grid = render_grid(e, t, g);
      CHECK(grid.cells.size() == g.width * g.height * g.channels);
      CHECK(std::all_of(grid.cells.begin(), grid.cells.end(), [](float v) { return v >= 0.0f && v <= 1.0f; }));
      const std::size_t ego_row = static_cast<std::size_t>(g.ego_row_fraction * g.height);
      CHECK(grid.at(ego_row, g.width / 2, 0) == 1.0f);
    }
  }
}

TEST_CASE("road markings and boundaries are drawn, off-road cells are empty") {
  Episode e = straight_episode(2, 1.0);
  e.states[0].x = 1.0;  // near the left edge so the boundary and off-road area are in view
  GridConfig g;
  g.ego_width = 0.0;
  g.ego_length = 0.0;
  const OccupancyGrid grid = render_grid(e, 0, g);
  const double cell_w = g.lateral_span / g.width;
  bool boundary_seen = false;
  for (std::size_t c = 0; c < g.width; ++c) {
    const double wx = e.states[0].x + (c + 0.5) * cell_w - 0.5 * g.lateral_span;
    for (std::size_t r = 0; r < g.height; ++r) {
      if (wx < -0.5 * cell_w) CHECK(grid.at(r, c) == 0.0f);
      if (std::abs(wx) <= 0.5 * cell_w) {
        CHECK(grid.at(r, c) > 0.0f);
        boundary_seen = true;
      }
    }
  }
  CHECK(boundary_seen);
}

TEST_CASE("ego-centric rendering is translation invariant on a straight constant-speed episode") {
  GridConfig g;
  // One dash period of travel leaves the marking pattern unchanged.
  const Episode e = straight_episode(2, g.dash_period);
  CHECK(render_grid(e, 0, g) == render_grid(e, 1, g));
  GridConfig plain = g;
  plain.lane_markings = false;
  const Episode f = straight_episode(2, 2.37);
  CHECK(render_grid(f, 0, plain) == render_grid(f, 1, plain));
}

TEST_CASE("empty road configuration renders only the ego block") {
  GridConfig g;
  g.road_surface = false;
  g.lane_markings = false;
  g.road_boundaries = false;
  const Episode e = simulate_episode(base_config(), 3);
  const OccupancyGrid grid = render_grid(e, 10, g);
  std::size_t ones = 0;
  for (float v : grid.cells) {
    CHECK((v == 0.0f || v == 1.0f));
    ones += v == 1.0f;
  }
  CHECK(ones > 0);
  CHECK(ones < grid.cells.size() / 8);
}

TEST_CASE("render_grid rejects bad steps and tiny grids") {
  const Episode e = simulate_episode(base_config(), 3);
  CHECK_THROWS_AS(render_grid(e, e.size(), GridConfig{}), std::out_of_range);
  GridConfig tiny;
  tiny.width = 4;
  CHECK_THROWS_AS(render_grid(e, 0, tiny), ConfigError);
}

TEST_CASE("128x128x3 grids are supported") {
  GridConfig g;
  g.width = g.height = 128;
  g.channels = 3;
  const OccupancyGrid grid = render_grid(simulate_episode(base_config(), 1), 0, g);
  CHECK(grid.cells.size() == 128u * 128u * 3u);
}

TEST_CASE("sliding-window counts") {
  GridConfig g;
  g.width = g.height = 8;
  CHECK(build_sequences(straight_episode(20, 3.0), 5, 1, g).size() == 11);
  CHECK(build_sequences(straight_episode(10, 3.0), 5, 3, g).size() == 1);
  CHECK(build_sequences(straight_episode(20, 3.0), 5, 20, g).size() == 1);
  CHECK(build_sequences(straight_episode(9, 3.0), 5, 1, g).empty());
}

TEST_CASE("window count formula agrees with enumeration for every length up to 100") {
  for (std::size_t len = 0; len <= 100; ++len)
    for (std::size_t tau = 1; tau <= 8; ++tau)
      for (std::size_t stride = 1; stride <= 12; ++stride) {
        std::size_t enumerated = 0;
        for (std::size_t start = 0; start + 2 * tau <= len; start += stride) ++enumerated;
        CHECK(window_count(len, tau, stride) == enumerated);
      }
}

TEST_CASE("build_sequences emits exactly window_count samples") {
  GridConfig g;
  g.width = g.height = 8;
  for (std::size_t len = 1; len <= 30; ++len)
    for (std::size_t tau = 1; tau <= 4; ++tau)
      for (std::size_t stride = 1; stride <= 5; ++stride)
        CHECK(build_sequences(straight_episode(len, 2.0), tau, stride, g).size() == window_count(len, tau, stride));
}

TEST_CASE("targets replay onto the episode within 1e-6 m") {
  EpisodeConfig c = base_config();
  c.lane_changes = 2;
  const Episode e = simulate_episode(c, 9);
  GridConfig g;
  g.width = g.height = 8;
  const auto samples = build_sequences(e, 5, 1, g);
  for (const SequenceSample& s : samples) {
    REQUIRE(s.inputs.size() == 5);
    REQUIRE(s.targets.size() == 5);
    const std::size_t origin = static_cast<std::size_t>(s.origin_t);
    for (std::size_t k = 0; k < 5; ++k) {
      const Vec2 replay = e.position(origin) + s.targets[k];
      CHECK(norm(replay - e.position(origin + k + 1)) <= 1e-6);
    }
    CHECK(s.inputs.back() == render_grid(e, origin, g));
  }
}

TEST_CASE("split sizes follow the ratios") {
  CHECK(split_sizes(2500, {}) == SplitCounts{1500, 500, 500});
  const Dataset d = split_dataset(fake_samples(10), {}, 1);
  CHECK(d.train.size() == 6);
  CHECK(d.val.size() == 2);
  CHECK(d.test.size() == 2);
  for (std::size_t n = 1; n < 200; ++n) {
    const SplitCounts c = split_sizes(n, {});
    CHECK(c.train + c.val + c.test == n);
    CHECK(std::abs(double(c.train) - 0.6 * n) <= 1.0);
    CHECK(std::abs(double(c.val) - 0.2 * n) <= 1.0);
    CHECK(std::abs(double(c.test) - 0.2 * n) <= 1.0);
  }
}

TEST_CASE("splits are deterministic, disjoint and cover the input") {
  const auto samples = fake_samples(57, 4);
  const Dataset a = split_dataset(samples, {}, 5);
  CHECK(a == split_dataset(samples, {}, 5));
  CHECK_FALSE(a.train == split_dataset(samples, {}, 6).train);

  std::multiset<SampleId> seen;
  for (const auto* split : {&a.train, &a.val, &a.test})
    for (const auto& s : *split) seen.insert(id_of(s));
  std::multiset<SampleId> expected;
  for (const auto& s : samples) expected.insert(id_of(s));
  CHECK(seen == expected);
  CHECK(std::set<SampleId>(seen.begin(), seen.end()).size() == seen.size());
}

TEST_CASE("the test split is the tail in (episode, origin) order") {
  const auto samples = fake_samples(50, 5);
  const Dataset d = split_dataset(samples, {}, 3);
  SampleId smallest_test = id_of(d.test.front());
  for (const auto& s : d.test) smallest_test = std::min(smallest_test, id_of(s));
  for (const auto* split : {&d.train, &d.val})
    for (const auto& s : *split) CHECK(id_of(s) < smallest_test);
}

TEST_CASE("split_dataset rejects empty input and bad ratios") {
  CHECK_THROWS_AS(split_dataset({}, {}, 1), ConfigError);
  CHECK_THROWS_AS(split_dataset(fake_samples(5), {0.5, 0.2, 0.2}, 1), ConfigError);
}

TEST_CASE("dataset save/load round trip is bitwise") {
  testsupport::TempDir dir("simdata_rt");
  const Dataset d = testsupport::small_dataset();
  save_dataset(d, dir.path());
  for (const char* f : {"manifest.json", "train.grids.f32", "train.targets.csv", "val.grids.f32",
                        "val.targets.csv", "test.grids.f32", "test.targets.csv"})
    CHECK(std::filesystem::exists(dir / f));
  const Dataset back = load_dataset(dir.path());
  CHECK(back.train == d.train);
  CHECK(back.val == d.val);
  CHECK(back.test == d.test);
  CHECK(back.manifest == d.manifest);
  CHECK(load_manifest(dir.path()) == d.manifest);
  CHECK(read_file(dir / "train.targets.csv").rfind("sample_id,step,x,y\n", 0) == 0);
}

TEST_CASE("corrupt datasets raise format errors naming the file") {
  testsupport::TempDir dir("simdata_bad");
  const Dataset d = testsupport::small_dataset();

  SUBCASE("manifest count mismatch") {
    save_dataset(d, dir.path());
    auto j = nlohmann::json::parse(read_file(dir / "manifest.json"));
    j["counts"]["train"] = j["counts"]["train"].get<int>() + 1;
    write_file_atomic(dir / "manifest.json", j.dump());
    try {
      load_dataset(dir.path());
      FAIL("expected a format error");
    } catch (const FormatError& e) {
      CHECK(e.file().filename() == "manifest.json");
    }
  }
  SUBCASE("unknown format version") {
    save_dataset(d, dir.path());
    auto j = nlohmann::json::parse(read_file(dir / "manifest.json"));
    j["format_version"] = kDatasetFormatVersion + 1;
    write_file_atomic(dir / "manifest.json", j.dump());
    try {
      load_dataset(dir.path());
      FAIL("expected a version error");
    } catch (const FormatVersionError& e) {
      CHECK(e.found() == kDatasetFormatVersion + 1);
    }
  }
  SUBCASE("truncated grid file") {
    save_dataset(d, dir.path());
    const std::string bytes = read_file(dir / "val.grids.f32");
    write_file_atomic(dir / "val.grids.f32", bytes.substr(0, bytes.size() - 4));
    try {
      load_dataset(dir.path());
      FAIL("expected a format error");
    } catch (const FormatError& e) {
      CHECK(e.file().filename() == "val.grids.f32");
    }
  }
  SUBCASE("corrupt manifest JSON") {
    save_dataset(d, dir.path());
    write_file_atomic(dir / "manifest.json", "{not json");
    CHECK_THROWS_AS(load_dataset(dir.path()), FormatError);
  }
}
