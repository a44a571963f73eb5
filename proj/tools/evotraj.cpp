// evotraj command-line entry point: gen-data, evolve, analyze, report.

#include <algorithm>
#include <cstdlib>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "evotraj/errors.hpp"
#include "evotraj/pipeline.hpp"

namespace {

enum ExitCode { kOk = 0, kUsage = 1, kData = 2, kInternal = 3 };

CLI::Option* add_config(CLI::App& app, std::string& path) {
  return app.add_option("--config", path, "flat key=value file; keys are long option names")
      ->check(CLI::ExistingFile);
}

// Turns config-file entries into arguments for every option the command line
// left unset, so explicit flags keep precedence.
std::vector<std::string> config_arguments(const CLI::App& sub, const std::string& path) {
  std::vector<std::string> out;
  for (const CLI::ConfigItem& item : CLI::ConfigINI().from_file(path)) {
    if (!item.parents.empty() || item.name == "config")
      throw evotraj::ConfigError("config file " + path + ": unsupported key '" + item.fullname() + "'");
    const CLI::Option* opt = sub.get_option_no_throw("--" + item.name);
    if (opt == nullptr) throw evotraj::ConfigError("config file " + path + ": unknown key '" + item.name + "'");
    if (opt->count() > 0) continue;
    if (item.inputs.empty() || opt->get_type_size() == 0) {
      out.push_back("--" + item.name + "=" + (item.inputs.empty() ? "true" : item.inputs.front()));
      continue;
    }
    out.push_back("--" + item.name);
    out.insert(out.end(), item.inputs.begin(), item.inputs.end());
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  using namespace evotraj;
  CLI::App app{"Neuroevolution of trajectory predictors with NSGA-II"};
  app.require_subcommand(1);

  // gen-data
  GenDataOptions gen;
  bool gen_paper = false;
  auto* gen_cmd = app.add_subcommand("gen-data", "simulate highway episodes and write a dataset");
  gen_cmd->add_option("--episodes", gen.episodes, "number of episodes")->capture_default_str();
  gen_cmd->add_option("--steps", gen.episode.steps, "steps per episode")->capture_default_str();
  gen_cmd->add_option("--tau", gen.episode.tau, "sequence length")->capture_default_str();
  gen_cmd->add_option("--stride", gen.stride, "sliding-window stride")->capture_default_str();
  gen_cmd->add_option("--seed", gen.seed, "dataset seed")->capture_default_str();
  gen_cmd->add_option("--out", gen.out, "output directory")->capture_default_str();
  gen_cmd->add_option("--dt", gen.episode.dt, "seconds per step")->capture_default_str();
  gen_cmd->add_option("--lanes", gen.episode.lanes, "lane count")->capture_default_str();
  gen_cmd->add_option("--lane-width", gen.episode.lane_width, "lane width in metres")->capture_default_str();
  gen_cmd->add_option("--lane-changes", gen.episode.lane_changes, "lane changes per episode")->capture_default_str();
  gen_cmd->add_option("--lane-change-duration", gen.episode.lane_change_duration, "seconds per lane change")
      ->capture_default_str();
  gen_cmd->add_option("--v-min", gen.episode.v_min, "minimum speed, km/h")->capture_default_str();
  gen_cmd->add_option("--v-max", gen.episode.v_max, "maximum speed, km/h")->capture_default_str();
  auto* grid_w = gen_cmd->add_option("--grid-width", gen.grid.width, "grid width")->capture_default_str();
  auto* grid_h = gen_cmd->add_option("--grid-height", gen.grid.height, "grid height")->capture_default_str();
  auto* grid_c = gen_cmd->add_option("--channels", gen.grid.channels, "grid channels (1 or 3)")->capture_default_str();
  gen_cmd->add_flag("--paper-scale", gen_paper, "128x128x3 grids");

  // evolve
  EvolveOptions evo;
  bool evo_paper = false;
  std::string rmse_mode = "mean_distance";
  auto* evo_cmd = app.add_subcommand("evolve", "run NSGA-II over network hyperparameters");
  evo_cmd->add_option("--experiment", evo.experiment, "objective set 1..5")->required()->check(CLI::Range(1, 5));
  evo_cmd->add_option("--data", evo.data, "dataset directory")->capture_default_str();
  evo_cmd->add_option("--out", evo.out, "directory receiving run directories")->capture_default_str();
  auto* seeds = evo_cmd->add_option("--seeds", evo.seeds, "comma-separated run seeds")->delimiter(',');
  auto* pop = evo_cmd->add_option("--pop,--population", evo.evolution.population, "population size")
                  ->capture_default_str();
  auto* gens = evo_cmd->add_option("--gens,--generations", evo.evolution.generations, "generations")
                   ->capture_default_str();
  evo_cmd->add_option("--crossover-rate", evo.evolution.crossover_rate)->capture_default_str();
  evo_cmd->add_option("--mutation-rate", evo.evolution.mutation_rate)->capture_default_str();
  evo_cmd->add_option("--tournament-size", evo.evolution.tournament_size)->capture_default_str();
  evo_cmd->add_option("--workers", evo.evolution.workers, "concurrent evaluations")
      ->envname("EVOTRAJ_WORKERS")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  auto* divisor = evo_cmd->add_option("--divisor", evo.scale.divisor, "size divisor for layer widths")
                      ->check(CLI::PositiveNumber)
                      ->capture_default_str();
  auto* epoch_cap =
      evo_cmd->add_option("--epoch-cap", evo.scale.epoch_cap, "maximum trained epochs, 0 for none")->capture_default_str();
  evo_cmd->add_option("--tau0", evo.objectives.tau0, "objective horizon, 0 for tau")->capture_default_str();
  evo_cmd->add_option("--v-min", evo.objectives.v_min, "l3 lower clamp, km/h")->capture_default_str();
  evo_cmd->add_option("--v-max", evo.objectives.v_max, "l3 upper clamp, km/h")->capture_default_str();
  evo_cmd->add_option("--rmse-mode", rmse_mode, "mean_distance or root_mean_square")
      ->check(CLI::IsMember({"mean_distance", "root_mean_square"}))
      ->capture_default_str();
  evo_cmd->add_option("--sign-floor", evo.objectives.sign_floor_steps, "sign-loss denominator floor in steps")
      ->capture_default_str();
  evo_cmd->add_option("--learning-rate", evo.learning_rate, "0 keeps per-optimizer defaults")->capture_default_str();
  evo_cmd->add_option("--conv-filters1", evo.conv.filters1)->capture_default_str();
  evo_cmd->add_option("--conv-filters2", evo.conv.filters2)->capture_default_str();
  evo_cmd->add_option("--timestamp", evo.timestamp, "run-directory suffix (default: current UTC time)");
  evo_cmd->add_flag("--paper-scale", evo_paper, "population 25, 20 generations, 12 seeds, full-size layers");

  // analyze
  AnalyzeOptions ana;
  auto* ana_cmd = app.add_subcommand("analyze", "summarise runs: RMSE table, spread tally, correlations");
  ana_cmd->add_option("--runs", ana.runs, "run directories or their parents")->required();
  ana_cmd->add_option("--out", ana.out, "output directory")->capture_default_str();
  ana_cmd->add_option("--theta-veer", ana.thresholds.veer)->capture_default_str();
  ana_cmd->add_option("--rho-dist", ana.thresholds.distance)->capture_default_str();
  ana_cmd->add_option("--rho-lane", ana.thresholds.lane)->capture_default_str();
  ana_cmd->add_option("--phi", ana.thresholds.lane_share)->capture_default_str();

  // report
  ReportOptions rep;
  auto* rep_cmd = app.add_subcommand("report", "write report.md and plot data");
  rep_cmd->add_option("--analysis", rep.analysis, "analysis directory")->capture_default_str();
  rep_cmd->add_option("--runs", rep.runs, "run directories or their parents")->required();
  rep_cmd->add_option("--out", rep.out, "output directory")->capture_default_str();

  std::string config_path;
  for (CLI::App* sub : {gen_cmd, evo_cmd, ana_cmd, rep_cmd}) add_config(*sub, config_path);

  try {
    app.parse(argc, argv);
    for (CLI::App* sub : {gen_cmd, evo_cmd, ana_cmd, rep_cmd}) {
      if (!*sub || config_path.empty()) continue;
      std::vector<std::string> args = config_arguments(*sub, config_path);
      if (args.empty()) break;
      args.insert(args.begin(), sub->get_name());
      bool skipped = false;
      for (int i = 1; i < argc; ++i) {
        if (!skipped && argv[i] == sub->get_name()) {
          skipped = true;
          continue;
        }
        args.emplace_back(argv[i]);
      }
      std::reverse(args.begin(), args.end());  // CLI11 consumes the vector from the back
      app.parse(args);
      break;
    }
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  } catch (const evotraj::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  }

  try {
    if (*gen_cmd) {
      if (gen_paper) {
        if (grid_w->count() == 0) gen.grid.width = 128;
        if (grid_h->count() == 0) gen.grid.height = 128;
        if (grid_c->count() == 0) gen.grid.channels = 3;
      }
      gen_data(gen, std::cout);
    } else if (*evo_cmd) {
      if (evo_paper) {
        EvolveOptions paper = evo;
        paper.apply_paper_scale();
        evo.paper_scale = true;
        if (pop->count() == 0) evo.evolution.population = paper.evolution.population;
        if (gens->count() == 0) evo.evolution.generations = paper.evolution.generations;
        if (seeds->count() == 0) evo.seeds = paper.seeds;
        if (divisor->count() == 0) evo.scale.divisor = paper.scale.divisor;
        if (epoch_cap->count() == 0) evo.scale.epoch_cap = paper.scale.epoch_cap;
      }
      evo.objectives.rmse_mode = rmse_mode == "mean_distance" ? RmseMode::MeanDistance : RmseMode::RootMeanSquare;
      evolve(evo, std::cout);
    } else if (*ana_cmd) {
      analyze(ana, std::cout);
    } else if (*rep_cmd) {
      report(rep, std::cout);
    }
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const FormatError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kData;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kData;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kData;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kInternal;
  }
  return kOk;
}
