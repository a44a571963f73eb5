#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "evotraj/analysis.hpp"
#include "evotraj/emo.hpp"
#include "evotraj/genome.hpp"
#include "evotraj/objectives.hpp"
#include "evotraj/simdata.hpp"

namespace evotraj {

// ---------------------------------------------------------------------------
// gen-data
// ---------------------------------------------------------------------------

struct GenDataOptions {
  std::size_t episodes = 10;
  std::size_t stride = 1;
  std::uint64_t seed = 7;
  EpisodeConfig episode;
  GridConfig grid;
  SplitRatios ratios;
  std::filesystem::path out = "data";

  /// 128x128x3 grids.
  void apply_paper_scale();
};

/// Simulates, renders, splits and saves a dataset. Episode i uses the seed
/// derive_seed(seed, {i}).
Dataset generate_dataset(const GenDataOptions& options);
DatasetManifest gen_data(const GenDataOptions& options, std::ostream& log);

// ---------------------------------------------------------------------------
// evolve
// ---------------------------------------------------------------------------

struct EvolveOptions {
  int experiment = 1;
  std::filesystem::path data = "data";
  std::filesystem::path out = "runs";
  std::vector<std::uint64_t> seeds{1, 2, 3};
  EvolutionConfig evolution{8, 5, 1.0, 0.5, 3, 1, 1};
  ScaleOptions scale;
  ObjectiveConfig objectives;
  nn::ConvSpec conv;
  float learning_rate = 0.0f;  ///< 0 keeps each optimizer's default
  bool paper_scale = false;
  /// Directory-name suffix; empty means the current UTC time.
  std::string timestamp;

  /// Population 25, 20 generations, 12 seeds, no size divisor, no epoch cap.
  void apply_paper_scale();
  void validate() const;
};

/// Every resolved setting of one run, as written to run.json.
nlohmann::json run_config_json(const EvolveOptions& options, std::uint64_t seed, const DatasetManifest& manifest);

/// Runs NSGA-II once per seed and returns the run directories.
std::vector<std::filesystem::path> evolve(const EvolveOptions& options, std::ostream& log);

// ---------------------------------------------------------------------------
// analyze / report
// ---------------------------------------------------------------------------

struct AnalyzeOptions {
  std::vector<std::filesystem::path> runs;  ///< run directories or directories containing them
  std::filesystem::path out = "analysis";
  SpreadThresholds thresholds;
};

/// One generations.jsonl record.
struct RunRecord {
  std::size_t generation = 0;
  std::size_t index = 0;
  std::string uid;
  std::vector<std::size_t> genome;
  std::vector<std::string> objective_names;
  std::vector<double> objectives;
  std::map<std::string, double> metrics;
  std::size_t rank = 0;
  double crowding = 0.0;
  bool failed = false;
};

struct RunData {
  std::filesystem::path dir;
  nlohmann::json config;
  std::vector<RunRecord> records;

  int experiment() const { return config.at("experiment").get<int>(); }
  std::size_t last_generation() const;
  std::vector<const RunRecord*> generation(std::size_t g) const;
};

/// Expands `paths` into run directories (those holding run.json), sorted.
std::vector<std::filesystem::path> find_runs(const std::vector<std::filesystem::path>& paths);
RunData load_run(const std::filesystem::path& dir);

/// Run-config keys that must agree for runs to be analysed together.
std::vector<std::string> incompatible_keys(const std::vector<RunData>& runs);

/// Predictions and ground truth of one model on the test split.
struct PredictionSet {
  std::vector<Trajectory> predicted;
  std::vector<Trajectory> truth;
};
PredictionSet load_predictions(const std::filesystem::path& file, double dt);

/// The final-generation individual with the lowest validation RMSE.
const RunRecord* best_final_record(const RunData& run);

void analyze(const AnalyzeOptions& options, std::ostream& log);

struct ReportOptions {
  std::filesystem::path analysis = "analysis";
  std::vector<std::filesystem::path> runs;
  std::filesystem::path out = "report";
};

void report(const ReportOptions& options, std::ostream& log);

}  // namespace evotraj
