#pragma once

#include <array>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "evotraj/model_config.hpp"
#include "evotraj/rng.hpp"

namespace evotraj {

inline constexpr std::size_t kLoci = 13;

/// Locus positions (0-based) in allele-table order.
enum class Locus : std::size_t {
  BatchSize,
  Epochs,
  Momentum,
  Loss,
  Optimizer,
  LstmCells,
  LstmDropout,
  HiddenUnits,
  CnnFlat1,
  CnnFlat2,
  LstmFlat1,
  LstmFlat2,
  FlatDropout,
};

constexpr std::size_t index_of(Locus l) { return static_cast<std::size_t>(l); }

struct LocusSpec {
  std::string name;
  std::vector<double> values;       ///< numeric allele values (category index for categorical loci)
  std::vector<std::string> labels;  ///< non-empty for categorical loci
  bool size_bearing = false;        ///< reduced by the desk-scale divisor

  std::size_t size() const { return values.size(); }
  friend bool operator==(const LocusSpec&, const LocusSpec&) = default;
};

class GenomeSpec {
 public:
  /// The 13 evolvable hyperparameters and their allele sets.
  static GenomeSpec standard();

  /// Throws ConfigError if any table is empty.
  explicit GenomeSpec(std::array<LocusSpec, kLoci> loci);

  const LocusSpec& locus(std::size_t i) const { return loci_.at(i); }
  const LocusSpec& locus(Locus l) const { return loci_[index_of(l)]; }
  const std::array<LocusSpec, kLoci>& loci() const { return loci_; }

  /// A copy where every table keeps only its first allele.
  GenomeSpec single_allele() const;

  friend bool operator==(const GenomeSpec&, const GenomeSpec&) = default;

 private:
  std::array<LocusSpec, kLoci> loci_;
};

struct Genome {
  std::array<std::size_t, kLoci> alleles{};

  std::size_t operator[](std::size_t i) const { return alleles[i]; }
  std::size_t operator[](Locus l) const { return alleles[index_of(l)]; }

  /// FNV-1a over the allele indices; stable across runs and platforms.
  std::uint64_t hash() const;

  friend auto operator<=>(const Genome&, const Genome&) = default;
};

/// Throws ConfigError if an index is out of range for its table.
void validate(const Genome& g, const GenomeSpec& spec);

Genome random_genome(const GenomeSpec& spec, Rng& rng);

/// Children swap tails after locus `cut` (1..12): child1 = a[0..cut) + b[cut..13).
std::pair<Genome, Genome> crossover_at(const Genome& a, const Genome& b, std::size_t cut);

/// Single-point crossover with the cut drawn uniformly from 1..12.
std::pair<Genome, Genome> single_point_crossover(const Genome& a, const Genome& b,
                                                 const GenomeSpec& spec, Rng& rng);

/// With probability `rate`, resamples one uniformly chosen locus to a
/// different allele of its table; otherwise returns g unchanged. Loci with a
/// single allele are never chosen.
Genome mutate(const Genome& g, double rate, const GenomeSpec& spec, Rng& rng);

struct ScaleOptions {
  std::size_t divisor = 4;    ///< applied to hidden units and the flattened widths
  std::size_t epoch_cap = 10;  ///< 0 disables the cap

  static ScaleOptions paper_scale() { return {1, 0}; }
};

/// Maps allele indices to hyperparameters. Only the hyperparameter fields of
/// the returned ModelConfig are set; tau, grid shape and learning rate keep
/// their defaults for the caller to fill in.
ModelConfig decode(const Genome& g, const GenomeSpec& spec, const ScaleOptions& scale = {});

/// {locus_name: allele_value, ..., "indices": [...]}.
nlohmann::json genome_to_json(const Genome& g, const GenomeSpec& spec);
/// Reads the "indices" array and validates it against the allele tables.
Genome genome_from_json(const nlohmann::json& j, const GenomeSpec& spec);

}  // namespace evotraj
