#pragma once

#include <map>
#include <string>
#include <vector>

#include "evotraj/trajectory.hpp"

namespace evotraj {

struct SpreadThresholds {
  double veer = 0.5;         ///< metres, tolerance on the mean final lateral offset
  double distance = 0.7;     ///< fraction of the mean true path length
  double lane = 0.5;         ///< fraction of a lane width a predicted change must cover
  double lane_share = 0.25;  ///< fraction of true lane changes that must be followed
  double lane_width = 3.5;
};

struct SpreadVerdict {
  bool good = false;
  std::vector<std::string> failed;  ///< subset of {"veer", "distance", "lane_change"}
  double mean_final_x = 0.0;
  double truth_mean_final_x = 0.0;
  double mean_length = 0.0;
  double truth_mean_length = 0.0;
  std::size_t lane_change_samples = 0;
  std::size_t lane_changes_followed = 0;
};

/// Polyline length from the origin through every point.
double path_length(const Trajectory& t);

/// A model is good when its predictions over a split do not veer on average,
/// cover enough distance and follow a share of the true lane changes. With no
/// true lane change in the split the third check passes. Throws ConfigError
/// on empty or mismatched input.
SpreadVerdict spread_classify(const std::vector<Trajectory>& predictions, const std::vector<Trajectory>& truth,
                              const SpreadThresholds& thresholds = {});

struct SpreadTally {
  std::size_t good = 0;
  std::size_t total = 0;
};

/// Average ranks (1-based); tied values share the mean of their positions.
std::vector<double> mid_ranks(const std::vector<double>& v);

double pearson(const std::vector<double>& x, const std::vector<double>& y);

struct SpearmanResult {
  double rho = 0.0;
  double p = 1.0;
  std::size_t n = 0;
};

/// Pearson correlation of mid-ranks with a two-sided Student-t p-value on n-2
/// degrees of freedom; |rho| = 1 gives p = 0. Throws ConfigError when n < 3 or
/// the lengths differ, and NumericalError when either input is constant.
SpearmanResult spearman(const std::vector<double>& x, const std::vector<double>& y);

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;  ///< sample standard deviation, 0 for a single value
  std::size_t n = 0;
};

/// Throws ConfigError on an empty list.
MeanStd mean_std(const std::vector<double>& values);

/// Table layout keyed by metric, then experiment code.
using SummaryTable = std::map<std::string, std::map<int, MeanStd>>;

struct RunMetric {
  int experiment = 0;
  std::string metric;
  double value = 0.0;
};

SummaryTable aggregate_runs(const std::vector<RunMetric>& metrics);

struct CorrelationRow {
  std::string a, b;
  SpearmanResult result;
  bool ok = false;
  std::string error;
};

/// Spearman coefficient for each named pair over pooled columns.
std::vector<CorrelationRow> objective_correlations(const std::map<std::string, std::vector<double>>& columns,
                                                   const std::vector<std::pair<std::string, std::string>>& pairs);

}  // namespace evotraj
