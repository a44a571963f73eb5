#include "evotraj/emo.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <numeric>
#include <thread>

#include "evotraj/errors.hpp"

namespace evotraj {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

void EvolutionConfig::validate() const {
  if (population < 4) throw ConfigError("population must be at least 4");
  if (tournament_size < 2) throw ConfigError("tournament size must be at least 2");
  if (!(crossover_rate >= 0.0 && crossover_rate <= 1.0)) throw ConfigError("crossover rate must be in [0, 1]");
  if (!(mutation_rate >= 0.0 && mutation_rate <= 1.0)) throw ConfigError("mutation rate must be in [0, 1]");
  if (workers < 1) throw ConfigError("workers must be at least 1");
}

bool dominates(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size())
    throw ShapeError("dominance between vectors of arity " + std::to_string(a.size()) + " and " +
                     std::to_string(b.size()));
  bool strictly = false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] > b[i]) return false;
    if (a[i] < b[i]) strictly = true;
  }
  return strictly;
}

std::vector<std::vector<std::size_t>> fast_nondominated_sort(const std::vector<std::vector<double>>& points) {
  const std::size_t n = points.size();
  std::vector<std::vector<std::size_t>> dominated(n);
  std::vector<std::size_t> count(n, 0);
  std::vector<std::vector<std::size_t>> fronts;
  std::vector<std::size_t> current;
  for (std::size_t p = 0; p < n; ++p) {
    for (std::size_t q = 0; q < n; ++q) {
      if (p == q) continue;
      if (dominates(points[p], points[q])) {
        dominated[p].push_back(q);
      } else if (dominates(points[q], points[p])) {
        ++count[p];
      }
    }
    if (count[p] == 0) current.push_back(p);
  }
  while (!current.empty()) {
    std::vector<std::size_t> next;
    for (std::size_t p : current)
      for (std::size_t q : dominated[p])
        if (--count[q] == 0) next.push_back(q);
    std::sort(next.begin(), next.end());
    fronts.push_back(std::move(current));
    current = std::move(next);
  }
  return fronts;
}

std::vector<double> crowding_distance(const std::vector<std::vector<double>>& points,
                                      const std::vector<std::size_t>& front) {
  const std::size_t n = front.size();
  std::vector<double> distance(n, 0.0);
  if (n <= 2) {
    std::fill(distance.begin(), distance.end(), kInf);
    return distance;
  }
  const std::size_t m = points[front[0]].size();
  std::vector<std::size_t> order(n);
  for (std::size_t obj = 0; obj < m; ++obj) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return points[front[a]][obj] < points[front[b]][obj]; });
    const double lo = points[front[order.front()]][obj];
    const double hi = points[front[order.back()]][obj];
    distance[order.front()] = kInf;
    distance[order.back()] = kInf;
    const double range = hi - lo;
    if (range <= 0.0) continue;
    for (std::size_t k = 1; k + 1 < n; ++k) {
      if (distance[order[k]] == kInf) continue;
      distance[order[k]] += (points[front[order[k + 1]]][obj] - points[front[order[k - 1]]][obj]) / range;
    }
  }
  return distance;
}

Ranking rank_population(const std::vector<std::vector<double>>& points) {
  Ranking r;
  r.rank.assign(points.size(), 0);
  r.crowding.assign(points.size(), 0.0);
  const auto fronts = fast_nondominated_sort(points);
  for (std::size_t f = 0; f < fronts.size(); ++f) {
    const std::vector<double> d = crowding_distance(points, fronts[f]);
    for (std::size_t k = 0; k < fronts[f].size(); ++k) {
      r.rank[fronts[f][k]] = f;
      r.crowding[fronts[f][k]] = d[k];
    }
  }
  return r;
}

std::size_t crowded_tournament(const Ranking& ranking, std::size_t size, Rng& rng) {
  const std::size_t n = ranking.rank.size();
  if (n == 0) throw ConfigError("tournament on an empty population");
  std::size_t best = rng.below(n);
  for (std::size_t k = 1; k < size; ++k) {
    const std::size_t c = rng.below(n);
    const bool better = ranking.rank[c] < ranking.rank[best] ||
                        (ranking.rank[c] == ranking.rank[best] &&
                         (ranking.crowding[c] > ranking.crowding[best] ||
                          (ranking.crowding[c] == ranking.crowding[best] && c < best)));
    if (better) best = c;
  }
  return best;
}

std::vector<std::size_t> select_survivors(const std::vector<std::vector<double>>& points, std::size_t n) {
  std::vector<std::size_t> out;
  for (const auto& front : fast_nondominated_sort(points)) {
    if (out.size() + front.size() <= n) {
      out.insert(out.end(), front.begin(), front.end());
      if (out.size() == n) break;
      continue;
    }
    const std::vector<double> d = crowding_distance(points, front);
    std::vector<std::size_t> order(front.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return d[a] > d[b]; });
    for (std::size_t k = 0; out.size() < n; ++k) out.push_back(front[order[k]]);
    break;
  }
  return out;
}

std::vector<double> failure_penalty(const std::vector<std::vector<double>>& minimized, const std::vector<bool>& failed,
                                    std::size_t arity) {
  std::vector<double> worst(arity, -kInf);
  bool any = false;
  for (std::size_t i = 0; i < minimized.size(); ++i) {
    if (failed[i]) continue;
    any = true;
    for (std::size_t j = 0; j < arity; ++j) worst[j] = std::max(worst[j], minimized[i][j]);
  }
  std::vector<double> penalty(arity, 1e12);
  if (!any) return penalty;
  for (std::size_t j = 0; j < arity; ++j) penalty[j] = worst[j] + 9.0 * std::max(std::abs(worst[j]), 1.0);
  return penalty;
}

void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& f) {
  if (workers <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) f(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        f(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    }
  };
  std::vector<std::thread> threads;
  for (std::size_t w = 0; w < std::min(workers, n); ++w) threads.emplace_back(worker);
  for (std::thread& t : threads) t.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace evotraj
