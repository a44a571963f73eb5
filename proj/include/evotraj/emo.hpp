#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "evotraj/objectives.hpp"
#include "evotraj/rng.hpp"

namespace evotraj {

struct EvolutionConfig {
  std::size_t population = 25;
  std::size_t generations = 20;
  double crossover_rate = 1.0;
  double mutation_rate = 0.5;
  std::size_t tournament_size = 3;
  std::uint64_t seed = 1;
  std::size_t workers = 1;

  /// Throws ConfigError unless population >= 4, tournament_size >= 2 and the
  /// rates are probabilities.
  void validate() const;
};

// ---------------------------------------------------------------------------
// Sorting and selection on minimisation vectors
// ---------------------------------------------------------------------------

/// a <= b everywhere and a < b somewhere. Throws ShapeError on arity mismatch.
bool dominates(std::span<const double> a, std::span<const double> b);

/// Deb's fast non-dominated sort. Fronts list point indices in ascending order.
std::vector<std::vector<std::size_t>> fast_nondominated_sort(const std::vector<std::vector<double>>& points);

/// Crowding distance of each member of `front` (same order). Boundary members
/// of every objective get +inf; objectives with zero range contribute 0.
std::vector<double> crowding_distance(const std::vector<std::vector<double>>& points,
                                      const std::vector<std::size_t>& front);

struct Ranking {
  std::vector<std::size_t> rank;
  std::vector<double> crowding;
};

Ranking rank_population(const std::vector<std::vector<double>>& points);

/// Draws `size` indices with replacement; lowest rank wins, then largest
/// crowding, then lowest index.
std::size_t crowded_tournament(const Ranking& ranking, std::size_t size, Rng& rng);

/// Indices of the n survivors: whole fronts while they fit, then the next
/// front by descending crowding (ties by index).
std::vector<std::size_t> select_survivors(const std::vector<std::vector<double>>& points, std::size_t n);

/// Runs f(0..n-1) on up to `workers` threads. The first exception is rethrown
/// after all threads finish.
void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& f);

// ---------------------------------------------------------------------------
// Generic NSGA-II
// ---------------------------------------------------------------------------

struct EvalContext {
  std::size_t generation = 0;
  std::size_t index = 0;
  std::string uid;
  std::uint64_t seed = 0;
};

struct Evaluation {
  std::vector<double> values;  ///< in the problem's own directions
  bool failed = false;
  std::string failure;
  nlohmann::json payload;
};

template <class G>
struct Individual {
  G genome{};
  std::string uid;
  std::vector<double> values;     ///< as reported (penalty values when failed)
  std::vector<double> minimized;  ///< maximised objectives negated
  std::size_t rank = 0;
  double crowding = 0.0;
  bool failed = false;
  std::string failure;
  nlohmann::json payload;
};

template <class G>
struct RunHistory {
  /// Population after each generation; index 0 is the initial population.
  std::vector<std::vector<Individual<G>>> generations;
  /// Minimisation-space values assigned to failed individuals.
  std::vector<double> penalty;

  std::vector<std::size_t> final_front() const {
    std::vector<std::size_t> out;
    if (generations.empty()) return out;
    for (std::size_t i = 0; i < generations.back().size(); ++i)
      if (generations.back()[i].rank == 0) out.push_back(i);
    return out;
  }
};

/// Worst finite minimised value per objective, w, mapped to w + 9 max(|w|, 1);
/// 1e12 when no individual succeeded.
std::vector<double> failure_penalty(const std::vector<std::vector<double>>& minimized, const std::vector<bool>& failed,
                                    std::size_t arity);

inline std::string individual_uid(std::size_t generation, std::size_t index) {
  return "g" + std::to_string(generation) + "_i" + std::to_string(index);
}

// A problem P supplies:
//   using genome_type = ...;
//   genome_type random_genome(Rng&);
//   std::pair<genome_type, genome_type> crossover(const genome_type&, const genome_type&, Rng&);
//   genome_type mutate(const genome_type&, double rate, Rng&);
//   Evaluation evaluate(const genome_type&, const EvalContext&);   // thread-safe
//   std::vector<Direction> directions() const;

template <class P>
class Nsga2 {
 public:
  using G = typename P::genome_type;
  using Population = std::vector<Individual<G>>;
  using Observer = std::function<void(std::size_t generation, const Population&)>;

  Nsga2(const EvolutionConfig& config, P& problem) : config_(config), problem_(problem), rng_(config.seed) {
    config_.validate();
    directions_ = problem_.directions();
  }

  /// Evaluates genomes (in parallel when workers > 1); results keep input order.
  Population evaluate(const std::vector<G>& genomes, std::size_t generation) {
    Population out(genomes.size());
    parallel_for(genomes.size(), config_.workers, [&](std::size_t i) {
      Individual<G>& ind = out[i];
      ind.genome = genomes[i];
      ind.uid = individual_uid(generation, i);
      EvalContext ctx{generation, i, ind.uid, derive_seed(config_.seed, {1, generation, i})};
      Evaluation ev;
      try {
        ev = problem_.evaluate(ind.genome, ctx);
      } catch (const std::exception& e) {
        ev.failed = true;
        ev.failure = e.what();
      }
      ind.failed = ev.failed;
      ind.failure = std::move(ev.failure);
      ind.payload = std::move(ev.payload);
      if (!ind.failed && ev.values.size() != directions_.size()) {
        ind.failed = true;
        ind.failure = "evaluator returned " + std::to_string(ev.values.size()) + " objectives";
      }
      if (!ind.failed) {
        for (double v : ev.values)
          if (!std::isfinite(v)) {
            ind.failed = true;
            ind.failure = "non-finite objective value";
          }
      }
      if (!ind.failed) {
        ind.values = ev.values;
        ind.minimized = to_minimized(ev.values);
      }
    });
    return out;
  }

  Population initial_population() {
    std::vector<G> genomes;
    for (std::size_t i = 0; i < config_.population; ++i) genomes.push_back(problem_.random_genome(rng_));
    Population pop = evaluate(genomes, 0);
    std::vector<std::vector<double>> values;
    std::vector<bool> failed;
    for (const auto& ind : pop) {
      values.push_back(ind.minimized);
      failed.push_back(ind.failed);
    }
    penalty_ = failure_penalty(values, failed, directions_.size());
    apply_penalty(pop);
    assign_ranking(pop);
    return pop;
  }

  /// Tournament, crossover and mutation produce N offspring; parents and
  /// offspring compete for the N places of the next population.
  Population next_generation(const Population& parents, std::size_t generation) {
    const Ranking ranking = ranking_of(parents);
    std::vector<G> children;
    while (children.size() < config_.population) {
      const G& a = parents[crowded_tournament(ranking, config_.tournament_size, rng_)].genome;
      const G& b = parents[crowded_tournament(ranking, config_.tournament_size, rng_)].genome;
      std::pair<G, G> kids{a, b};
      if (rng_.bernoulli(config_.crossover_rate)) kids = problem_.crossover(a, b, rng_);
      children.push_back(problem_.mutate(kids.first, config_.mutation_rate, rng_));
      if (children.size() < config_.population)
        children.push_back(problem_.mutate(kids.second, config_.mutation_rate, rng_));
    }
    Population offspring = evaluate(children, generation);
    apply_penalty(offspring);
    return survivors(parents, std::move(offspring));
  }

  /// Elitist replacement of parents + offspring down to the population size.
  Population survivors(const Population& parents, Population offspring) const {
    Population combined = parents;
    for (auto& ind : offspring) combined.push_back(std::move(ind));
    std::vector<std::vector<double>> points;
    for (const auto& ind : combined) points.push_back(ind.minimized);
    Population next;
    for (std::size_t i : select_survivors(points, config_.population)) next.push_back(combined[i]);
    assign_ranking(next);
    return next;
  }

  RunHistory<G> run(const Observer& observer = {}) {
    RunHistory<G> history;
    Population pop = initial_population();
    history.penalty = penalty_;
    if (observer) observer(0, pop);
    history.generations.push_back(pop);
    for (std::size_t g = 1; g <= config_.generations; ++g) {
      pop = next_generation(pop, g);
      if (observer) observer(g, pop);
      history.generations.push_back(pop);
    }
    return history;
  }

  const std::vector<double>& penalty() const { return penalty_; }
  void set_penalty(std::vector<double> p) { penalty_ = std::move(p); }
  Rng& rng() { return rng_; }

 private:
  std::vector<double> to_minimized(const std::vector<double>& v) const {
    std::vector<double> m(v.size());
    for (std::size_t j = 0; j < v.size(); ++j) m[j] = directions_[j] == Direction::Maximize ? -v[j] : v[j];
    return m;
  }

  void apply_penalty(Population& pop) const {
    for (auto& ind : pop) {
      if (!ind.failed) continue;
      ind.minimized = penalty_;
      ind.values = to_minimized(penalty_);  // negation is its own inverse
    }
  }

  static Ranking ranking_of(const Population& pop) {
    std::vector<std::vector<double>> points;
    for (const auto& ind : pop) points.push_back(ind.minimized);
    return rank_population(points);
  }

  static void assign_ranking(Population& pop) {
    const Ranking r = ranking_of(pop);
    for (std::size_t i = 0; i < pop.size(); ++i) {
      pop[i].rank = r.rank[i];
      pop[i].crowding = r.crowding[i];
    }
  }

  EvolutionConfig config_;
  P& problem_;
  Rng rng_;
  std::vector<Direction> directions_;
  std::vector<double> penalty_;
};

template <class P>
RunHistory<typename P::genome_type> run_nsga2(const EvolutionConfig& config, P& problem,
                                              const typename Nsga2<P>::Observer& observer = {}) {
  Nsga2<P> algo(config, problem);
  return algo.run(observer);
}

}  // namespace evotraj
