#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <set>

#include "evotraj/errors.hpp"
#include "evotraj/io_util.hpp"
#include "evotraj/pipeline.hpp"

namespace evotraj {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const std::vector<std::string> kCompatibilityKeys = {
    "dataset_seed", "tau",  "grid_w", "grid_h",   "channels",  "dt",        "samples",          "divisor",
    "epoch_cap",    "tau0", "v_min",  "v_max",    "rmse_mode", "objective_split", "sign_floor_steps",
    "conv_filters", "learning_rate", "lane_width"};

const std::vector<std::pair<std::string, std::string>> kCorrelationPairs = {{"l1", "l2"}, {"l1", "l3"}, {"l2", "l3"}};

json parse_json_file(const fs::path& file) {
  try {
    return json::parse(read_file(file));
  } catch (const json::exception& e) {
    throw FormatError(file, e.what());
  }
}

std::string run_name(const fs::path& dir) { return dir.filename().string(); }

}  // namespace

std::size_t RunData::last_generation() const {
  std::size_t g = 0;
  for (const RunRecord& r : records) g = std::max(g, r.generation);
  return g;
}

std::vector<const RunRecord*> RunData::generation(std::size_t g) const {
  std::vector<const RunRecord*> out;
  for (const RunRecord& r : records)
    if (r.generation == g) out.push_back(&r);
  return out;
}

std::vector<fs::path> find_runs(const std::vector<fs::path>& paths) {
  std::set<fs::path> found;
  for (const fs::path& p : paths) {
    if (!fs::is_directory(p)) throw IoError("not a directory: " + p.string());
    if (fs::exists(p / "run.json")) {
      found.insert(p);
      continue;
    }
    for (const auto& entry : fs::directory_iterator(p))
      if (entry.is_directory() && fs::exists(entry.path() / "run.json")) found.insert(entry.path());
  }
  if (found.empty()) throw IoError("no run directories found");
  return {found.begin(), found.end()};
}

RunData load_run(const fs::path& dir) {
  RunData run;
  run.dir = dir;
  run.config = parse_json_file(dir / "run.json");
  const fs::path log = dir / "generations.jsonl";
  const std::string text = read_file(log);
  std::size_t line_no = 0;
  for (std::string_view line : split(text, '\n')) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const json j = json::parse(line);
      RunRecord r;
      r.generation = j.at("generation").get<std::size_t>();
      r.index = j.at("index").get<std::size_t>();
      r.uid = j.at("uid").get<std::string>();
      r.genome = j.at("genome").at("indices").get<std::vector<std::size_t>>();
      r.objective_names = j.at("objective_names").get<std::vector<std::string>>();
      r.objectives = j.at("objectives").get<std::vector<double>>();
      for (const auto& [k, v] : j.at("metrics").items()) r.metrics[k] = v.get<double>();
      r.rank = j.at("rank").get<std::size_t>();
      const json& c = j.at("crowding");
      r.crowding = c.is_string() ? std::numeric_limits<double>::infinity() : c.get<double>();
      r.failed = j.at("failed").get<bool>();
      run.records.push_back(std::move(r));
    } catch (const json::exception& e) {
      throw FormatError(log, "line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (run.records.empty()) throw FormatError(log, "no records");
  return run;
}

std::vector<std::string> incompatible_keys(const std::vector<RunData>& runs) {
  std::vector<std::string> bad;
  if (runs.empty()) return bad;
  for (const std::string& key : kCompatibilityKeys) {
    const json ref = runs.front().config.value(key, json());
    for (const RunData& r : runs)
      if (r.config.value(key, json()) != ref) {
        bad.push_back(key);
        break;
      }
  }
  return bad;
}

PredictionSet load_predictions(const fs::path& file, double dt) {
  const std::string text = read_file(file);
  const std::vector<std::string_view> lines = split(text, '\n');
  if (lines.empty() || lines[0] != "sample_id,step,pred_x,pred_y,true_x,true_y")
    throw FormatError(file, "unexpected header");
  std::vector<std::vector<Vec2>> pred, truth;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    const auto f = split(lines[i], ',');
    double v[6];
    if (f.size() != 6) throw FormatError(file, "line " + std::to_string(i + 1) + ": expected 6 fields");
    for (std::size_t k = 0; k < 6; ++k)
      if (!parse_double(f[k], v[k])) throw FormatError(file, "line " + std::to_string(i + 1) + ": bad number");
    const auto id = static_cast<std::size_t>(v[0]);
    if (id >= pred.size()) {
      pred.resize(id + 1);
      truth.resize(id + 1);
    }
    pred[id].push_back({v[2], v[3]});
    truth[id].push_back({v[4], v[5]});
  }
  PredictionSet out;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    out.predicted.push_back(Trajectory::from_points(pred[i], dt));
    out.truth.push_back(Trajectory::from_points(truth[i], dt));
  }
  return out;
}

const RunRecord* best_final_record(const RunData& run) {
  const RunRecord* best = nullptr;
  for (const RunRecord* r : run.generation(run.last_generation())) {
    if (r->failed || !r->metrics.contains("rmse")) continue;
    if (!best || r->metrics.at("rmse") < best->metrics.at("rmse")) best = r;
  }
  return best;
}

void analyze(const AnalyzeOptions& options, std::ostream& log) {
  std::vector<RunData> runs;
  for (const fs::path& dir : find_runs(options.runs)) runs.push_back(load_run(dir));
  const std::vector<std::string> bad = incompatible_keys(runs);
  if (!bad.empty()) {
    std::string keys;
    for (const std::string& k : bad) keys += (keys.empty() ? "" : ", ") + k;
    throw ConfigError("incompatible run configurations; mismatched keys: " + keys);
  }
  fs::create_directories(options.out);

  // Metric summary over runs: the final-generation individual with the best
  // validation RMSE represents its run.
  std::vector<RunMetric> metrics;
  std::set<int> experiments;
  for (const RunData& run : runs) {
    experiments.insert(run.experiment());
    if (const RunRecord* best = best_final_record(run)) {
      metrics.push_back({run.experiment(), "RMSE_val", best->metrics.at("rmse")});
      metrics.push_back({run.experiment(), "RMSE_test", best->metrics.at("rmse_test")});
    }
  }
  const SummaryTable table = aggregate_runs(metrics);
  std::string summary = "metric";
  for (int e : experiments)
    summary += ",Experiment " + std::to_string(e) + " mean,Experiment " + std::to_string(e) + " std";
  summary += "\n";
  for (const char* metric : {"RMSE_val", "RMSE_test"}) {
    summary += metric;
    for (int e : experiments) {
      const auto row = table.find(metric);
      if (row != table.end() && row->second.contains(e)) {
        const MeanStd& ms = row->second.at(e);
        summary += "," + format_double(ms.mean) + "," + format_double(ms.std);
      } else {
        summary += ",NA,NA";
      }
    }
    summary += "\n";
  }
  write_file_atomic(options.out / "summary.csv", summary);

  // Spread classification of every final-generation model.
  std::map<int, SpreadTally> tallies;
  std::string models = "run,uid,experiment,good,failed_criteria\n";
  for (const RunData& run : runs) {
    SpreadThresholds th = options.thresholds;
    th.lane_width = run.config.value("lane_width", th.lane_width);
    const double dt = run.config.at("dt").get<double>();
    for (const RunRecord* r : run.generation(run.last_generation())) {
      SpreadTally& tally = tallies[run.experiment()];
      ++tally.total;
      std::string failed = "training_failed";
      bool good = false;
      const fs::path file = run.dir / "final" / ("pred_" + r->uid + ".csv");
      if (!r->failed && fs::exists(file)) {
        const PredictionSet p = load_predictions(file, dt);
        const SpreadVerdict v = spread_classify(p.predicted, p.truth, th);
        good = v.good;
        failed.clear();
        for (const std::string& c : v.failed) failed += (failed.empty() ? "" : ";") + c;
      }
      if (good) ++tally.good;
      models += run_name(run.dir) + "," + r->uid + "," + std::to_string(run.experiment()) + "," +
                (good ? "1" : "0") + "," + failed + "\n";
    }
  }
  std::string spread = "experiment,good,total\n";
  for (const auto& [e, t] : tallies)
    spread += std::to_string(e) + "," + std::to_string(t.good) + "," + std::to_string(t.total) + "\n";
  write_file_atomic(options.out / "spread.csv", spread);
  write_file_atomic(options.out / "spread_models.csv", models);

  // Rank correlations over every logged, non-failed individual (each uid once per run).
  std::map<std::string, std::vector<double>> columns;
  for (const RunData& run : runs) {
    std::set<std::string> seen;
    for (const RunRecord& r : run.records) {
      if (r.failed || !seen.insert(r.uid).second) continue;
      if (!r.metrics.contains("l1") || !r.metrics.contains("l2") || !r.metrics.contains("l3")) continue;
      for (const char* k : {"l1", "l2", "l3"}) columns[k].push_back(r.metrics.at(k));
    }
  }
  std::string corr = "objectives,coefficient,p_value,n\n";
  for (const CorrelationRow& row : objective_correlations(columns, kCorrelationPairs)) {
    corr += row.a + " & " + row.b + ",";
    if (row.ok) {
      corr += format_double(row.result.rho) + "," + format_double(row.result.p) + "," +
              std::to_string(row.result.n) + "\n";
    } else {
      corr += "NA,NA," + std::to_string(columns[row.a].size()) + "\n";
      log << "warning: correlation " << row.a << " & " << row.b << ": " << row.error << "\n";
    }
  }
  write_file_atomic(options.out / "correlations.csv", corr);

  const json thresholds = {{"veer", options.thresholds.veer},
                           {"distance", options.thresholds.distance},
                           {"lane", options.thresholds.lane},
                           {"lane_share", options.thresholds.lane_share},
                           {"lane_width", options.thresholds.lane_width},
                           {"pooling", "all logged non-failed individuals, unique per run"},
                           {"run_metric", "final-generation individual with the lowest RMSE_val"}};
  json run_list = json::array();
  for (const RunData& r : runs) run_list.push_back(r.dir.string());
  write_file_atomic(options.out / "analysis.json",
                    json{{"runs", run_list}, {"settings", thresholds}}.dump(2) + "\n");
  log << "analysed " << runs.size() << " runs into " << options.out.string() << "\n";
}

// ---------------------------------------------------------------------------
// report
// ---------------------------------------------------------------------------

namespace {

std::vector<std::vector<std::string>> read_csv(const fs::path& file) {
  if (!fs::exists(file)) throw IoError("missing input: " + file.string());
  std::vector<std::vector<std::string>> rows;
  const std::string text = read_file(file);
  for (std::string_view line : split(text, '\n')) {
    if (line.empty()) continue;
    std::vector<std::string> row;
    for (std::string_view f : split(line, ',')) row.emplace_back(f);
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string markdown_table(const std::vector<std::vector<std::string>>& rows) {
  if (rows.empty()) return "";
  std::string out = "|";
  for (const std::string& h : rows[0]) out += " " + h + " |";
  out += "\n|";
  for (std::size_t i = 0; i < rows[0].size(); ++i) out += "---|";
  out += "\n";
  for (std::size_t r = 1; r < rows.size(); ++r) {
    out += "|";
    for (const std::string& c : rows[r]) out += " " + c + " |";
    out += "\n";
  }
  return out;
}

}  // namespace

void report(const ReportOptions& options, std::ostream& log) {
  const auto summary = read_csv(options.analysis / "summary.csv");
  const auto spread = read_csv(options.analysis / "spread.csv");
  const auto corr = read_csv(options.analysis / "correlations.csv");
  if (options.runs.empty()) throw IoError("report needs at least one run directory");
  std::vector<RunData> runs;
  for (const fs::path& dir : find_runs(options.runs)) runs.push_back(load_run(dir));

  fs::create_directories(options.out / "plots");
  fs::create_directories(options.out / "traj_plots");

  std::string md = "# Neuroevolution trajectory report\n\n## Experiments\n\n| Experiment | Objectives |\n|---|---|\n";
  for (int e = 1; e <= 5; ++e) {
    md += "| " + std::to_string(e) + " | ";
    const auto objs = experiment_objectives(e);
    for (std::size_t k = 0; k < objs.size(); ++k) md += (k ? ", " : "") + std::string(to_string(objs[k]));
    md += " |\n";
  }
  md += "\nl3 is maximised; every other objective is minimised.\n";
  md += "\n## RMSE summary\n\n" + markdown_table(summary);
  md += "\n## Good models in the final generation\n\n" + markdown_table(spread);
  md += "\n## Spearman rank-order correlation\n\n" + markdown_table(corr);
  md += "\n## Runs\n\n| Run | Experiment | Generations | Final front size | Best RMSE_val |\n|---|---|---|---|---|\n";

  for (const RunData& run : runs) {
    const std::string name = run_name(run.dir);
    const std::size_t last = run.last_generation();
    std::size_t front_size = 0;
    for (std::size_t g = 0; g <= last; ++g) {
      std::vector<const RunRecord*> front;
      for (const RunRecord* r : run.generation(g))
        if (r->rank == 0) front.push_back(r);
      std::stable_sort(front.begin(), front.end(), [](const RunRecord* a, const RunRecord* b) {
        return a->objectives.at(0) < b->objectives.at(0) ||
               (a->objectives.at(0) == b->objectives.at(0) && a->index < b->index);
      });
      if (g == last) front_size = front.size();
      if (front.empty()) continue;
      std::string csv = "uid";
      for (const std::string& n : front[0]->objective_names) csv += "," + n;
      csv += ",failed\n";
      for (const RunRecord* r : front) {
        csv += r->uid;
        for (double v : r->objectives) csv += "," + format_double(v);
        csv += std::string(",") + (r->failed ? "1" : "0") + "\n";
      }
      write_file_atomic(options.out / "plots" / ("pareto_" + name + "_g" + std::to_string(g) + ".csv"), csv);
      if (g != last) continue;
      for (const RunRecord* r : front) {
        const fs::path pred = run.dir / "final" / ("pred_" + r->uid + ".csv");
        if (fs::exists(pred))
          write_file_atomic(options.out / "traj_plots" / (name + "_" + r->uid + ".csv"), read_file(pred));
      }
    }
    const RunRecord* best = best_final_record(run);
    md += "| " + name + " | " + std::to_string(run.experiment()) + " | " + std::to_string(last) + " | " +
          std::to_string(front_size) + " | " + (best ? format_double(best->metrics.at("rmse")) : "NA") + " |\n";
  }
  write_file_atomic(options.out / "report.md", md);
  log << "report written to " << (options.out / "report.md").string() << "\n";
}

}  // namespace evotraj
