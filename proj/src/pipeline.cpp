#include "evotraj/pipeline.hpp"

#include <chrono>
#include <ctime>
#include <fstream>
#include <memory>
#include <mutex>
#include <ostream>
#include <set>
#include <sstream>

#include "evotraj/errors.hpp"
#include "evotraj/io_util.hpp"
#include "evotraj/model.hpp"

namespace evotraj {

namespace fs = std::filesystem;
using nlohmann::json;

// ---------------------------------------------------------------------------
// gen-data
// ---------------------------------------------------------------------------

void GenDataOptions::apply_paper_scale() {
  grid.width = 128;
  grid.height = 128;
  grid.channels = 3;
}

Dataset generate_dataset(const GenDataOptions& options) {
  if (options.episodes == 0) throw ConfigError("at least one episode is required");
  if (options.stride == 0) throw ConfigError("stride must be at least 1");
  options.episode.validate();
  options.grid.validate();
  std::vector<SequenceSample> samples;
  for (std::size_t i = 0; i < options.episodes; ++i) {
    Episode ep = simulate_episode(options.episode, derive_seed(options.seed, {i}));
    ep.id = i;
    for (SequenceSample& s : build_sequences(ep, options.episode.tau, options.stride, options.grid))
      samples.push_back(std::move(s));
  }
  Dataset d = split_dataset(std::move(samples), options.ratios, options.seed);
  d.manifest.dt = options.episode.dt;
  d.manifest.v_min = options.episode.v_min;
  d.manifest.v_max = options.episode.v_max;
  d.manifest.lane_width = options.episode.lane_width;
  d.manifest.episodes = options.episodes;
  return d;
}

DatasetManifest gen_data(const GenDataOptions& options, std::ostream& log) {
  const Dataset d = generate_dataset(options);
  save_dataset(d, options.out);
  const DatasetManifest& m = d.manifest;
  log << "dataset " << options.out.string() << ": " << m.episodes << " episodes, tau " << m.tau << ", grid "
      << m.grid_w << "x" << m.grid_h << "x" << m.channels << ", samples train/val/test " << m.counts.train << "/"
      << m.counts.val << "/" << m.counts.test << "\n";
  return m;
}

// ---------------------------------------------------------------------------
// evolve
// ---------------------------------------------------------------------------

void EvolveOptions::apply_paper_scale() {
  paper_scale = true;
  evolution.population = 25;
  evolution.generations = 20;
  seeds.clear();
  for (std::uint64_t s = 1; s <= 12; ++s) seeds.push_back(s);
  scale = ScaleOptions::paper_scale();
}

void EvolveOptions::validate() const {
  experiment_objectives(experiment);
  if (seeds.empty()) throw ConfigError("at least one seed is required");
  evolution.validate();
  if (scale.divisor < 1) throw ConfigError("divisor must be at least 1");
  if (conv.filters1 == 0 || conv.filters2 == 0) throw ConfigError("conv filters must be positive");
  if (learning_rate < 0.0f) throw ConfigError("learning rate must be non-negative");
}

namespace {

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y%m%dT%H%M%SZ", &tm);
  return buf;
}

fs::path unique_run_dir(const fs::path& out, int experiment, std::uint64_t seed, const std::string& stamp) {
  const std::string base = "run_e" + std::to_string(experiment) + "_s" + std::to_string(seed) + "_" + stamp;
  fs::path dir = out / base;
  for (int k = 1; fs::exists(dir); ++k) dir = out / (base + "_" + std::to_string(k));
  return dir;
}

std::string rmse_mode_name(RmseMode m) { return m == RmseMode::MeanDistance ? "mean_distance" : "root_mean_square"; }

json metrics_json(const Metrics& m, double rmse_test) {
  return {{"rmse", m.rmse}, {"sign_loss", m.sign_loss}, {"l1", m.l1}, {"l2", m.l2}, {"l3", m.l3},
          {"rmse_test", rmse_test}};
}

std::string prediction_csv(const std::vector<Trajectory>& predicted, const std::vector<SequenceSample>& split) {
  std::string out = "sample_id,step,pred_x,pred_y,true_x,true_y\n";
  for (std::size_t i = 0; i < split.size(); ++i)
    for (std::size_t t = 0; t < split[i].targets.size(); ++t) {
      const Vec2 p = predicted[i].points[t], a = split[i].targets[t];
      out += std::to_string(i) + "," + std::to_string(t + 1) + "," + format_double(p.x) + "," +
             format_double(p.y) + "," + format_double(a.x) + "," + format_double(a.y) + "\n";
    }
  return out;
}

/// Genome evaluation by training a predictor and scoring it on the
/// validation split. Test-split predictions are kept for the individuals still
/// in the population so the final generation can be written out.
class NeuroProblem {
 public:
  using genome_type = Genome;

  NeuroProblem(const EvolveOptions& options, const Dataset& data, fs::path run_dir)
      : options_(options), data_(data), run_dir_(std::move(run_dir)), spec_(GenomeSpec::standard()) {
    objectives_ = options.objectives;
    objectives_.dt = data.manifest.dt;
    for (ObjectiveKind k : experiment_objectives(options.experiment)) directions_.push_back(direction_of(k));
  }

  Genome random_genome(Rng& rng) { return evotraj::random_genome(spec_, rng); }
  std::pair<Genome, Genome> crossover(const Genome& a, const Genome& b, Rng& rng) {
    return single_point_crossover(a, b, spec_, rng);
  }
  Genome mutate(const Genome& g, double rate, Rng& rng) { return evotraj::mutate(g, rate, spec_, rng); }
  std::vector<Direction> directions() const { return directions_; }
  const GenomeSpec& spec() const { return spec_; }

  ModelConfig model_config(const Genome& g) const {
    ModelConfig c = decode(g, spec_, options_.scale);
    c.tau = data_.manifest.tau;
    c.grid_w = data_.manifest.grid_w;
    c.grid_h = data_.manifest.grid_h;
    c.channels = data_.manifest.channels;
    c.dt = data_.manifest.dt;
    c.conv = options_.conv;
    c.learning_rate = options_.learning_rate;
    return c;
  }

  Evaluation evaluate(const Genome& g, const EvalContext& ctx) {
    Evaluation ev;
    const ModelConfig config = model_config(g);
    TrainedModel trained = train(Model::build(config, ctx.seed), data_, ctx.seed);
    write_history(ctx.uid, trained.history);
    ev.payload["parameters"] = trained.model.parameter_count();
    if (trained.failed) {
      ev.failed = true;
      ev.failure = trained.failure;
      return ev;
    }
    const Metrics val = compute_metrics(trained.model.predict(data_.val), data_.val, objectives_);
    std::vector<Trajectory> test_pred = trained.model.predict(data_.test);
    const Metrics test = compute_metrics(test_pred, data_.test, objectives_);
    ev.values = select_objectives(val, options_.experiment).values;
    ev.payload["metrics"] = metrics_json(val, test.rmse);
    std::lock_guard lock(mutex_);
    artifacts_[ctx.uid] = {std::make_shared<Model>(std::move(trained.model)), std::move(test_pred)};
    return ev;
  }

  /// Drops artifacts of individuals that left the population.
  void retain(const std::vector<Individual<Genome>>& pop) {
    std::set<std::string> keep;
    for (const auto& ind : pop) keep.insert(ind.uid);
    std::lock_guard lock(mutex_);
    std::erase_if(artifacts_, [&](const auto& kv) { return !keep.contains(kv.first); });
  }

  void write_final(const std::vector<Individual<Genome>>& pop) {
    fs::create_directories(run_dir_ / "final");
    fs::create_directories(run_dir_ / "models");
    for (const auto& ind : pop) {
      const auto it = artifacts_.find(ind.uid);
      if (ind.failed || it == artifacts_.end()) continue;
      write_file_atomic(run_dir_ / "final" / ("pred_" + ind.uid + ".csv"),
                        prediction_csv(it->second.test_predictions, data_.test));
      if (ind.rank == 0) it->second.model->save(run_dir_ / "models" / ind.uid);
    }
  }

 private:
  struct Artifacts {
    std::shared_ptr<Model> model;
    std::vector<Trajectory> test_predictions;
  };

  void write_history(const std::string& uid, const std::vector<EpochRecord>& history) const {
    std::string csv = "epoch,train_loss,val_rmse\n";
    for (const EpochRecord& r : history)
      csv += std::to_string(r.epoch) + "," + format_double(r.train_loss) + "," + format_double(r.val_rmse) + "\n";
    write_file_atomic(run_dir_ / "histories" / (uid + ".csv"), csv);
  }

  const EvolveOptions& options_;
  const Dataset& data_;
  fs::path run_dir_;
  GenomeSpec spec_;
  ObjectiveConfig objectives_;
  std::vector<Direction> directions_;
  std::mutex mutex_;
  std::map<std::string, Artifacts> artifacts_;
};

json crowding_json(double c) { return std::isinf(c) ? json("inf") : json(c); }

json record_json(std::size_t generation, std::size_t index, const Individual<Genome>& ind, const GenomeSpec& spec,
                 const std::vector<std::string>& names) {
  json j;
  j["generation"] = generation;
  j["index"] = index;
  j["uid"] = ind.uid;
  j["genome"] = genome_to_json(ind.genome, spec);
  j["objective_names"] = names;
  j["objectives"] = ind.values;
  j["metrics"] = ind.payload.contains("metrics") ? ind.payload["metrics"] : json::object();
  j["rank"] = ind.rank;
  j["crowding"] = crowding_json(ind.crowding);
  j["failed"] = ind.failed;
  if (ind.failed) j["failure"] = ind.failure;
  return j;
}

std::string objectives_row(std::size_t generation, std::size_t index, const Individual<Genome>& ind,
                           const std::vector<std::string>& names) {
  std::string row = std::to_string(generation) + "," + std::to_string(index);
  for (std::size_t j = 0; j < names.size(); ++j) row += "," + names[j] + "," + format_double(ind.values[j]);
  return row + "," + (ind.failed ? "1" : "0") + "\n";
}

}  // namespace

json run_config_json(const EvolveOptions& o, std::uint64_t seed, const DatasetManifest& m) {
  json names = json::array();
  for (ObjectiveKind k : experiment_objectives(o.experiment)) names.push_back(std::string(to_string(k)));
  const nn::OptimizerSettings adam = nn::OptimizerSettings::defaults(nn::OptimizerKind::Adam);
  return {
      {"experiment", o.experiment},
      {"objectives", names},
      {"seed", seed},
      {"seeds", o.seeds},
      {"dataset", o.data.string()},
      {"dataset_seed", m.seed},
      {"tau", m.tau},
      {"grid_w", m.grid_w},
      {"grid_h", m.grid_h},
      {"channels", m.channels},
      {"dt", m.dt},
      {"lane_width", m.lane_width},
      {"samples", {{"train", m.counts.train}, {"val", m.counts.val}, {"test", m.counts.test}}},
      {"population", o.evolution.population},
      {"generations", o.evolution.generations},
      {"crossover_rate", o.evolution.crossover_rate},
      {"mutation_rate", o.evolution.mutation_rate},
      {"tournament_size", o.evolution.tournament_size},
      {"crossover", "single_point"},
      {"mutation", "one_locus_excluding_current"},
      {"failure_penalty", "w + 9 max(|w|, 1) over generation-0 worst"},
      {"workers", o.evolution.workers},
      {"divisor", o.scale.divisor},
      {"epoch_cap", o.scale.epoch_cap},
      {"paper_scale", o.paper_scale},
      {"tau0", o.objectives.tau0 == 0 ? m.tau : o.objectives.tau0},
      {"v_min", o.objectives.v_min},
      {"v_max", o.objectives.v_max},
      {"rmse_mode", rmse_mode_name(o.objectives.rmse_mode)},
      {"sign_floor_steps", o.objectives.sign_floor_steps},
      {"objective_split", "val"},
      {"conv_filters", {o.conv.filters1, o.conv.filters2}},
      {"learning_rate", o.learning_rate},
      {"learning_rate_defaults", {{"adaptive", 1e-3}, {"SGD", 1e-2}}},
      {"beta1", adam.beta1},
      {"beta2", adam.beta2},
      {"epsilon", adam.epsilon},
      {"rmsprop_rho", adam.rmsprop_rho},
      {"adadelta_rho", adam.adadelta_rho},
      {"adadelta_epsilon", adam.adadelta_epsilon},
      {"lstm_readout", "last_hidden_state"},
      {"lstm_dropout_placement", "every_cell_output"},
      {"target_scaling", "per_axis_rms_floor_0.1"},
  };
}

std::vector<fs::path> evolve(const EvolveOptions& options, std::ostream& log) {
  options.validate();
  if (!fs::exists(options.data / "manifest.json"))
    throw IoError("dataset not found: " + (options.data / "manifest.json").string());
  const Dataset data = load_dataset(options.data);
  if (data.train.empty() || data.val.empty() || data.test.empty())
    throw ConfigError("dataset needs non-empty train, val and test splits");
  options.objectives.validate(data.manifest.tau);
  if (options.paper_scale)
    log << "warning: --paper-scale trains full-size networks for every individual; expect days of CPU time\n";

  const std::string stamp = options.timestamp.empty() ? utc_timestamp() : options.timestamp;
  std::vector<std::string> names;
  for (ObjectiveKind k : experiment_objectives(options.experiment)) names.emplace_back(to_string(k));

  std::vector<fs::path> dirs;
  for (std::uint64_t seed : options.seeds) {
    const fs::path dir = unique_run_dir(options.out, options.experiment, seed, stamp);
    fs::create_directories(dir / "histories");
    write_file_atomic(dir / "run.json", run_config_json(options, seed, data.manifest).dump(2) + "\n");

    EvolutionConfig ec = options.evolution;
    ec.seed = seed;
    NeuroProblem problem(options, data, dir);
    std::ofstream jsonl(dir / "generations.jsonl");
    std::ofstream csv(dir / "objectives.csv");
    if (!jsonl || !csv) throw IoError("cannot write logs in " + dir.string());
    csv << "generation,individual,obj1_name,obj1,obj2_name,obj2,obj3_name,obj3,failed\n";

    auto observer = [&](std::size_t g, const std::vector<Individual<Genome>>& pop) {
      std::size_t failed = 0;
      double best = std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < pop.size(); ++i) {
        jsonl << record_json(g, i, pop[i], problem.spec(), names).dump() << "\n";
        csv << objectives_row(g, i, pop[i], names);
        if (pop[i].failed) {
          ++failed;
        } else if (pop[i].payload.contains("metrics")) {
          best = std::min(best, pop[i].payload["metrics"]["rmse"].get<double>());
        }
      }
      jsonl.flush();
      csv.flush();
      problem.retain(pop);
      log << "experiment " << options.experiment << " seed " << seed << " generation " << g
          << ": best RMSE_val " << format_double(best) << ", failed " << failed << "/" << pop.size() << "\n";
    };

    const RunHistory<Genome> history = run_nsga2(ec, problem, observer);
    const auto& final_pop = history.generations.back();
    problem.write_final(final_pop);

    json front = json::array();
    for (std::size_t i : history.final_front())
      front.push_back(record_json(history.generations.size() - 1, i, final_pop[i], problem.spec(), names));
    write_file_atomic(dir / "final_front.json", front.dump(2) + "\n");
    log << "run directory " << dir.string() << "\n";
    dirs.push_back(dir);
  }
  return dirs;
}

}  // namespace evotraj
