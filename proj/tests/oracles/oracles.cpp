#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace oracles {

std::string OracleReport::describe() const {
  std::ostringstream os;
  os.precision(12);
  os << case_id << ": expected " << expected << ", actual " << actual << ", "
     << (kind == Tolerance::Relative ? "relative" : "absolute") << " tolerance " << tolerance << " -> "
     << (pass ? "pass" : "FAIL");
  return os.str();
}

OracleReport compare(std::string case_id, double expected, double actual, double tolerance, Tolerance kind) {
  OracleReport r{std::move(case_id), expected, actual, tolerance, kind, false};
  double diff = std::abs(expected - actual);
  if (kind == Tolerance::Relative) {
    const double scale = std::max(std::abs(expected), std::abs(actual));
    if (scale > 0.0) diff /= scale;
  }
  r.pass = diff <= tolerance;
  return r;
}

namespace {

bool dominates(const std::vector<double>& a, const std::vector<double>& b) {
  bool strictly = false;
  for (std::size_t k = 0; k < a.size(); ++k) {
    if (a[k] > b[k]) return false;
    if (a[k] < b[k]) strictly = true;
  }
  return strictly;
}

std::vector<double> average_ranks(const std::vector<double>& v) {
  // O(n^2): rank = 1 + #smaller + (#equal - 1) / 2.
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    double smaller = 0.0, equal = 0.0;
    for (double w : v) {
      if (w < v[i]) smaller += 1.0;
      if (w == v[i]) equal += 1.0;
    }
    r[i] = 1.0 + smaller + (equal - 1.0) / 2.0;
  }
  return r;
}

double correlation(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace

std::vector<std::vector<std::size_t>> brute_force_fronts(const std::vector<std::vector<double>>& points) {
  std::vector<std::vector<std::size_t>> fronts;
  std::vector<bool> removed(points.size(), false);
  std::size_t left = points.size();
  while (left > 0) {
    std::vector<std::size_t> front;
    for (std::size_t i = 0; i < points.size(); ++i) {
      if (removed[i]) continue;
      bool dominated = false;
      for (std::size_t j = 0; j < points.size() && !dominated; ++j)
        if (!removed[j] && j != i && dominates(points[j], points[i])) dominated = true;
      if (!dominated) front.push_back(i);
    }
    for (std::size_t i : front) removed[i] = true;
    left -= front.size();
    fronts.push_back(std::move(front));
  }
  return fronts;
}

std::vector<double> finite_difference_grad(const std::function<double(const std::vector<double>&)>& f,
                                           std::vector<double> x, double h) {
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double saved = x[i];
    x[i] = saved + h;
    const double up = f(x);
    x[i] = saved - h;
    const double down = f(x);
    x[i] = saved;
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

std::vector<std::vector<double>> finite_difference_grad(const std::function<double()>& loss,
                                                        std::span<evotraj::nn::Parameter* const> params,
                                                        double h) {
  std::vector<std::vector<double>> out;
  for (evotraj::nn::Parameter* p : params) {
    std::vector<double> g(p->value.size());
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      const float saved = p->value[i];
      p->value[i] = static_cast<float>(saved + h);
      const double up = loss();
      const double h_up = static_cast<double>(p->value[i]) - saved;
      p->value[i] = static_cast<float>(saved - h);
      const double down = loss();
      const double h_down = saved - static_cast<double>(p->value[i]);
      p->value[i] = saved;
      // The float32 rounding of w +- h is the step actually taken.
      g[i] = (up - down) / (h_up + h_down);
    }
    out.push_back(std::move(g));
  }
  return out;
}

double brute_force_spearman_rho(const std::vector<double>& x, const std::vector<double>& y) {
  return correlation(average_ranks(x), average_ranks(y));
}

double permutation_spearman_p(const std::vector<double>& x, const std::vector<double>& y) {
  const std::vector<double> rx = average_ranks(x);
  const std::vector<double> ry = average_ranks(y);
  const double observed = std::abs(correlation(rx, ry));
  std::vector<std::size_t> perm(y.size());
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::vector<double> shuffled(y.size());
  std::size_t extreme = 0, total = 0;
  do {
    for (std::size_t i = 0; i < perm.size(); ++i) shuffled[i] = ry[perm[i]];
    if (std::abs(correlation(rx, shuffled)) >= observed - 1e-12) ++extreme;
    ++total;
  } while (std::next_permutation(perm.begin(), perm.end()));
  return static_cast<double>(extreme) / static_cast<double>(total);
}

std::pair<double, double> zdt1(const std::vector<double>& x) {
  const double f1 = x[0];
  double rest = 0.0;
  for (std::size_t i = 1; i < x.size(); ++i) rest += x[i];
  const double g = x.size() > 1 ? 1.0 + 9.0 * rest / static_cast<double>(x.size() - 1) : 1.0;
  return {f1, g * (1.0 - std::sqrt(f1 / g))};
}

double hypervolume_2d(std::vector<std::pair<double, double>> points, std::pair<double, double> ref) {
  std::erase_if(points, [&](const auto& p) { return !(p.first < ref.first && p.second < ref.second); });
  std::sort(points.begin(), points.end());
  double area = 0.0;
  double ceiling = ref.second;
  for (const auto& [f1, f2] : points) {
    if (f2 >= ceiling) continue;
    area += (ref.first - f1) * (ceiling - f2);
    ceiling = f2;
  }
  return area;
}

double zdt1_front_hypervolume(std::pair<double, double> ref) {
  // Integral over f1 in [0, 1] of (r2 - 1 + sqrt(f1)), plus the strip beyond f1 = 1.
  const auto [r1, r2] = ref;
  return (r2 - 1.0) + 2.0 / 3.0 + (r1 - 1.0) * r2;
}

Zdt1Problem::genome_type Zdt1Problem::random_genome(evotraj::Rng& rng) const {
  genome_type g(n_);
  for (double& v : g) v = rng.uniform();
  return g;
}

std::pair<Zdt1Problem::genome_type, Zdt1Problem::genome_type> Zdt1Problem::crossover(const genome_type& a,
                                                                                     const genome_type& b,
                                                                                     evotraj::Rng& rng) const {
  constexpr double eta = 15.0;
  genome_type c1 = a, c2 = b;
  for (std::size_t i = 0; i < n_; ++i) {
    if (!rng.bernoulli(0.5)) continue;
    const double u = rng.uniform();
    const double beta = u <= 0.5 ? std::pow(2.0 * u, 1.0 / (eta + 1.0))
                                 : std::pow(1.0 / (2.0 * (1.0 - u)), 1.0 / (eta + 1.0));
    const double x1 = a[i], x2 = b[i];
    c1[i] = std::clamp(0.5 * ((1.0 + beta) * x1 + (1.0 - beta) * x2), 0.0, 1.0);
    c2[i] = std::clamp(0.5 * ((1.0 - beta) * x1 + (1.0 + beta) * x2), 0.0, 1.0);
  }
  return {c1, c2};
}

Zdt1Problem::genome_type Zdt1Problem::mutate(const genome_type& g, double, evotraj::Rng& rng) const {
  constexpr double eta = 20.0;
  genome_type out = g;
  const double p = 1.0 / static_cast<double>(n_);
  for (double& v : out) {
    if (!rng.bernoulli(p)) continue;
    const double u = rng.uniform();
    const double delta = u < 0.5 ? std::pow(2.0 * u, 1.0 / (eta + 1.0)) - 1.0
                                 : 1.0 - std::pow(2.0 * (1.0 - u), 1.0 / (eta + 1.0));
    v = std::clamp(v + delta, 0.0, 1.0);
  }
  return out;
}

evotraj::Evaluation Zdt1Problem::evaluate(const genome_type& g, const evotraj::EvalContext&) const {
  const auto [f1, f2] = zdt1(g);
  evotraj::Evaluation e;
  e.values = {f1, f2};
  return e;
}

}  // namespace oracles
