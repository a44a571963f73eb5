#include <array>
#include <cmath>
#include <string>

#include <nlohmann/json.hpp>

#include "evotraj/errors.hpp"
#include "evotraj/io_util.hpp"
#include "evotraj/simdata.hpp"

namespace evotraj {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::array<const char*, 3> kSplits = {"train", "val", "test"};

const std::vector<SequenceSample>& split_of(const Dataset& d, std::size_t i) {
  return i == 0 ? d.train : i == 1 ? d.val : d.test;
}
std::vector<SequenceSample>& split_of(Dataset& d, std::size_t i) {
  return i == 0 ? d.train : i == 1 ? d.val : d.test;
}
std::size_t count_of(const SplitCounts& c, std::size_t i) {
  return i == 0 ? c.train : i == 1 ? c.val : c.test;
}

json manifest_json(const Dataset& d) {
  const DatasetManifest& m = d.manifest;
  json j;
  j["format_version"] = m.format_version;
  j["seed"] = m.seed;
  j["tau"] = m.tau;
  j["grid_w"] = m.grid_w;
  j["grid_h"] = m.grid_h;
  j["channels"] = m.channels;
  j["dt"] = m.dt;
  j["counts"] = {{"train", d.train.size()}, {"val", d.val.size()}, {"test", d.test.size()}};
  j["v_min"] = m.v_min;
  j["v_max"] = m.v_max;
  j["lane_width"] = m.lane_width;
  j["episodes"] = m.episodes;
  j["ratios"] = {{"train", m.ratios.train}, {"val", m.ratios.val}, {"test", m.ratios.test}};
  json ids;
  for (std::size_t s = 0; s < kSplits.size(); ++s) {
    json list = json::array();
    for (const SequenceSample& sample : split_of(d, s))
      list.push_back({sample.episode_id, sample.origin_t});
    ids[kSplits[s]] = std::move(list);
  }
  j["samples"] = std::move(ids);
  return j;
}

template <class T>
T require(const json& j, const char* key, const fs::path& file) {
  if (!j.contains(key)) throw FormatError(file, std::string("missing key '") + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw FormatError(file, std::string("bad value for '") + key + "': " + e.what());
  }
}

DatasetManifest parse_manifest(const json& j, const fs::path& file) {
  DatasetManifest m;
  m.format_version = require<int>(j, "format_version", file);
  if (m.format_version != kDatasetFormatVersion)
    throw FormatVersionError(file, m.format_version, kDatasetFormatVersion);
  m.seed = require<std::uint64_t>(j, "seed", file);
  m.tau = require<std::size_t>(j, "tau", file);
  m.grid_w = require<std::size_t>(j, "grid_w", file);
  m.grid_h = require<std::size_t>(j, "grid_h", file);
  m.channels = require<std::size_t>(j, "channels", file);
  m.dt = require<double>(j, "dt", file);
  const json counts = require<json>(j, "counts", file);
  m.counts.train = require<std::size_t>(counts, "train", file);
  m.counts.val = require<std::size_t>(counts, "val", file);
  m.counts.test = require<std::size_t>(counts, "test", file);
  m.v_min = require<double>(j, "v_min", file);
  m.v_max = require<double>(j, "v_max", file);
  if (j.contains("lane_width")) m.lane_width = require<double>(j, "lane_width", file);
  if (j.contains("episodes")) m.episodes = require<std::size_t>(j, "episodes", file);
  if (j.contains("ratios")) {
    const json r = j.at("ratios");
    m.ratios = {require<double>(r, "train", file), require<double>(r, "val", file),
                require<double>(r, "test", file)};
  }
  if (m.tau == 0 || m.grid_w == 0 || m.grid_h == 0 || m.channels == 0)
    throw FormatError(file, "tau and grid dimensions must be positive");
  return m;
}

json read_json(const fs::path& file) {
  if (!fs::exists(file)) throw IoError("missing " + file.string());
  try {
    return json::parse(read_file(file));
  } catch (const json::parse_error& e) {
    throw FormatError(file, std::string("corrupt JSON: ") + e.what());
  }
}

}  // namespace

void save_dataset(const Dataset& dataset, const fs::path& directory) {
  std::error_code ec;
  fs::create_directories(directory, ec);
  if (ec || !fs::is_directory(directory))
    throw IoError("cannot create dataset directory " + directory.string());

  const DatasetManifest& m = dataset.manifest;
  for (std::size_t s = 0; s < kSplits.size(); ++s) {
    const auto& samples = split_of(dataset, s);
    std::string grids;
    std::string targets = "sample_id,step,x,y\n";
    for (std::size_t i = 0; i < samples.size(); ++i) {
      const SequenceSample& sample = samples[i];
      if (sample.inputs.size() != m.tau || sample.targets.size() != m.tau)
        throw ShapeError("save_dataset: sample length disagrees with manifest tau");
      for (const OccupancyGrid& g : sample.inputs) {
        if (g.width != m.grid_w || g.height != m.grid_h || g.channels != m.channels)
          throw ShapeError("save_dataset: grid shape disagrees with manifest");
        append_f32_le(grids, g.cells);
      }
      for (std::size_t k = 0; k < sample.targets.size(); ++k) {
        targets += std::to_string(i) + ',' + std::to_string(k + 1) + ',' +
                   format_double(sample.targets[k].x) + ',' + format_double(sample.targets[k].y) + '\n';
      }
    }
    write_file_atomic(directory / (std::string(kSplits[s]) + ".grids.f32"), grids);
    write_file_atomic(directory / (std::string(kSplits[s]) + ".targets.csv"), targets);
  }
  // Manifest last: a directory with a manifest is complete.
  write_file_atomic(directory / "manifest.json", manifest_json(dataset).dump(2) + "\n");
}

DatasetManifest load_manifest(const fs::path& directory) {
  const fs::path file = directory / "manifest.json";
  return parse_manifest(read_json(file), file);
}

Dataset load_dataset(const fs::path& directory) {
  if (!fs::is_directory(directory)) throw IoError("dataset directory not found: " + directory.string());
  const fs::path manifest_file = directory / "manifest.json";
  const json j = read_json(manifest_file);

  Dataset d;
  d.manifest = parse_manifest(j, manifest_file);
  const DatasetManifest& m = d.manifest;
  const std::size_t frame = m.grid_w * m.grid_h * m.channels;

  const json ids = require<json>(j, "samples", manifest_file);
  for (std::size_t s = 0; s < kSplits.size(); ++s) {
    const std::string name = kSplits[s];
    const std::size_t count = count_of(m.counts, s);
    const json list = require<json>(ids, name.c_str(), manifest_file);
    if (!list.is_array() || list.size() != count)
      throw FormatError(manifest_file, "sample count mismatch for split '" + name + "': counts says " +
                                           std::to_string(count) + ", sample list has " +
                                           std::to_string(list.is_array() ? list.size() : 0));

    auto& samples = split_of(d, s);
    samples.resize(count);
    for (std::size_t i = 0; i < count; ++i) {
      const json& id = list[i];
      if (!id.is_array() || id.size() != 2)
        throw FormatError(manifest_file, "malformed sample id in split '" + name + "'");
      samples[i].episode_id = id[0].get<std::size_t>();
      samples[i].origin_t = id[1].get<std::int64_t>();
    }

    const fs::path grid_file = directory / (name + ".grids.f32");
    if (!fs::exists(grid_file)) throw FormatError(grid_file, "missing grid file");
    const std::string bytes = read_file(grid_file);
    const std::size_t expected = count * m.tau * frame * 4;
    if (bytes.size() != expected)
      throw FormatError(grid_file, (bytes.size() < expected ? "truncated" : "oversized") +
                                       std::string(": expected ") + std::to_string(expected) +
                                       " bytes, found " + std::to_string(bytes.size()));
    std::size_t offset = 0;
    for (SequenceSample& sample : samples) {
      sample.inputs.resize(m.tau);
      for (OccupancyGrid& g : sample.inputs) {
        g.width = m.grid_w;
        g.height = m.grid_h;
        g.channels = m.channels;
        g.cells.resize(frame);
        read_f32_le(std::string_view(bytes).substr(offset, frame * 4), g.cells);
        offset += frame * 4;
        for (float v : g.cells) {
          if (!(v >= 0.0f && v <= 1.0f)) throw FormatError(grid_file, "cell value outside [0,1]");
        }
      }
    }

    const fs::path target_file = directory / (name + ".targets.csv");
    if (!fs::exists(target_file)) throw FormatError(target_file, "missing targets file");
    const std::string text = read_file(target_file);
    auto lines = split(text, '\n');
    if (!lines.empty() && lines.back().empty()) lines.pop_back();
    if (lines.empty() || lines[0] != "sample_id,step,x,y")
      throw FormatError(target_file, "missing header 'sample_id,step,x,y'");
    if (lines.size() - 1 != count * m.tau)
      throw FormatError(target_file, "expected " + std::to_string(count * m.tau) + " rows, found " +
                                         std::to_string(lines.size() - 1));
    std::size_t row = 1;
    for (std::size_t i = 0; i < count; ++i) {
      samples[i].targets.resize(m.tau);
      for (std::size_t k = 0; k < m.tau; ++k, ++row) {
        const auto fields = split(lines[row], ',');
        double sid = 0, step = 0;
        Vec2 p;
        if (fields.size() != 4 || !parse_double(fields[0], sid) || !parse_double(fields[1], step) ||
            !parse_double(fields[2], p.x) || !parse_double(fields[3], p.y) ||
            sid != static_cast<double>(i) || step != static_cast<double>(k + 1))
          throw FormatError(target_file, "malformed row " + std::to_string(row + 1));
        samples[i].targets[k] = p;
      }
    }
  }
  return d;
}

}  // namespace evotraj
