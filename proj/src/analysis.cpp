#include "evotraj/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <boost/math/distributions/students_t.hpp>

#include "evotraj/errors.hpp"

namespace evotraj {

double path_length(const Trajectory& t) {
  double len = 0.0;
  Vec2 prev{};
  for (const Vec2& p : t.points) {
    len += norm(p - prev);
    prev = p;
  }
  return len;
}

SpreadVerdict spread_classify(const std::vector<Trajectory>& predictions, const std::vector<Trajectory>& truth,
                              const SpreadThresholds& th) {
  if (predictions.empty()) throw ConfigError("spread classification needs at least one prediction");
  if (predictions.size() != truth.size()) throw ConfigError("prediction and ground-truth counts differ");
  SpreadVerdict v;
  const double n = static_cast<double>(predictions.size());
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    if (predictions[i].size() == 0 || predictions[i].size() != truth[i].size())
      throw ConfigError("prediction " + std::to_string(i) + " does not match its ground truth length");
    const double px = predictions[i].points.back().x;
    const double tx = truth[i].points.back().x;
    v.mean_final_x += px / n;
    v.truth_mean_final_x += tx / n;
    v.mean_length += path_length(predictions[i]) / n;
    v.truth_mean_length += path_length(truth[i]) / n;
    if (std::abs(tx) >= th.lane_width / 2.0) {
      ++v.lane_change_samples;
      if (std::abs(px) >= th.lane * th.lane_width) ++v.lane_changes_followed;
    }
  }
  if (std::abs(v.mean_final_x - v.truth_mean_final_x) > th.veer) v.failed.push_back("veer");
  if (v.mean_length < th.distance * v.truth_mean_length) v.failed.push_back("distance");
  if (v.lane_change_samples > 0 && static_cast<double>(v.lane_changes_followed) <
                                       th.lane_share * static_cast<double>(v.lane_change_samples))
    v.failed.push_back("lane_change");
  v.good = v.failed.empty();
  return v;
}

std::vector<double> mid_ranks(const std::vector<double>& v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    const double r = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
    i = j + 1;
  }
  return ranks;
}

double pearson(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) throw NumericalError("correlation undefined for constant input");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

SpearmanResult spearman(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size())
    throw ConfigError("spearman inputs differ in length: " + std::to_string(x.size()) + " vs " +
                      std::to_string(y.size()));
  if (x.size() < 3) throw ConfigError("spearman needs at least 3 pairs");
  SpearmanResult r;
  r.n = x.size();
  r.rho = pearson(mid_ranks(x), mid_ranks(y));
  if (std::abs(r.rho) >= 1.0) {
    r.p = 0.0;
    return r;
  }
  const double df = static_cast<double>(r.n - 2);
  const double t = r.rho * std::sqrt(df / (1.0 - r.rho * r.rho));
  const boost::math::students_t dist(df);
  r.p = std::clamp(2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t))), 0.0, 1.0);
  return r;
}

MeanStd mean_std(const std::vector<double>& values) {
  if (values.empty()) throw ConfigError("mean of an empty list");
  MeanStd m;
  m.n = values.size();
  m.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(m.n);
  if (m.n > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - m.mean) * (v - m.mean);
    m.std = std::sqrt(ss / static_cast<double>(m.n - 1));
  }
  return m;
}

SummaryTable aggregate_runs(const std::vector<RunMetric>& metrics) {
  std::map<std::string, std::map<int, std::vector<double>>> grouped;
  for (const RunMetric& m : metrics) grouped[m.metric][m.experiment].push_back(m.value);
  SummaryTable table;
  for (auto& [metric, by_experiment] : grouped)
    for (auto& [experiment, values] : by_experiment) {
      // Sorting makes the floating-point sums independent of run order.
      std::sort(values.begin(), values.end());
      table[metric][experiment] = mean_std(values);
    }
  return table;
}

std::vector<CorrelationRow> objective_correlations(const std::map<std::string, std::vector<double>>& columns,
                                                   const std::vector<std::pair<std::string, std::string>>& pairs) {
  std::vector<CorrelationRow> rows;
  for (const auto& [a, b] : pairs) {
    CorrelationRow row;
    row.a = a;
    row.b = b;
    try {
      const auto ia = columns.find(a), ib = columns.find(b);
      if (ia == columns.end() || ib == columns.end()) throw ConfigError("missing column for pair " + a + " & " + b);
      row.result = spearman(ia->second, ib->second);
      row.ok = true;
    } catch (const Error& e) {
      row.error = e.what();
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace evotraj
