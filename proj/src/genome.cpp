#include "evotraj/genome.hpp"

#include <algorithm>
#include <cmath>

#include "evotraj/errors.hpp"

namespace evotraj {

namespace {

LocusSpec numeric(std::string name, std::vector<double> values, bool size_bearing = false) {
  return {std::move(name), std::move(values), {}, size_bearing};
}

LocusSpec categorical(std::string name, std::vector<std::string> labels) {
  std::vector<double> values(labels.size());
  for (std::size_t i = 0; i < values.size(); ++i) values[i] = static_cast<double>(i);
  return {std::move(name), std::move(values), std::move(labels), false};
}

bool in_table(const LocusSpec& locus, double v) {
  return std::any_of(locus.values.begin(), locus.values.end(), [&](double a) {
    return static_cast<float>(a) == static_cast<float>(v);
  });
}

std::size_t reduced(double nominal, std::size_t divisor) {
  return std::max<std::size_t>(1, static_cast<std::size_t>(nominal) / std::max<std::size_t>(divisor, 1));
}

}  // namespace

GenomeSpec GenomeSpec::standard() {
  return GenomeSpec({
      numeric("batch_size", {50, 75, 100, 125}),
      numeric("epochs", {10, 20, 30, 40, 50}),
      numeric("momentum", {0.8, 0.85, 0.9, 0.95}),
      categorical("loss", {"MSE", "LogCosh"}),
      categorical("optimizer", {"RMSprop", "NAdam", "SGD", "AdaGrad", "Adadelta", "Adam", "AdaMax"}),
      numeric("lstm_cells", {1, 2, 3, 4}),
      numeric("lstm_dropout", {0.2, 0.25, 0.3, 0.35, 0.4, 0.5}),
      numeric("hidden_units", {100, 125, 150, 175, 200, 225, 250}, true),
      numeric("cnn_flat1", {256, 512, 768, 1024}, true),
      numeric("cnn_flat2", {256, 512, 768, 1024}, true),
      numeric("lstm_flat1", {64, 128, 256, 512}, true),
      numeric("lstm_flat2", {64, 128, 256, 512}, true),
      numeric("flat_dropout", {0.05, 0.1, 0.15, 0.2, 0.25}),
  });
}

GenomeSpec::GenomeSpec(std::array<LocusSpec, kLoci> loci) : loci_(std::move(loci)) {
  for (const LocusSpec& l : loci_) {
    if (l.values.empty()) throw ConfigError("genome spec: locus '" + l.name + "' has no alleles");
    if (!l.labels.empty() && l.labels.size() != l.values.size())
      throw ConfigError("genome spec: locus '" + l.name + "' label/value count mismatch");
  }
}

GenomeSpec GenomeSpec::single_allele() const {
  std::array<LocusSpec, kLoci> loci = loci_;
  for (LocusSpec& l : loci) {
    l.values.resize(1);
    if (!l.labels.empty()) l.labels.resize(1);
  }
  return GenomeSpec(std::move(loci));
}

std::uint64_t Genome::hash() const {
  std::uint64_t h = 14695981039346656037ULL;
  for (std::size_t a : alleles) {
    for (int b = 0; b < 8; ++b) {
      h ^= (static_cast<std::uint64_t>(a) >> (8 * b)) & 0xffu;
      h *= 1099511628211ULL;
    }
  }
  return h;
}

void validate(const Genome& g, const GenomeSpec& spec) {
  for (std::size_t i = 0; i < kLoci; ++i) {
    if (g.alleles[i] >= spec.locus(i).size())
      throw ConfigError("genome: allele index " + std::to_string(g.alleles[i]) + " out of range for locus '" +
                        spec.locus(i).name + "' (" + std::to_string(spec.locus(i).size()) + " alleles)");
  }
}

Genome random_genome(const GenomeSpec& spec, Rng& rng) {
  Genome g;
  for (std::size_t i = 0; i < kLoci; ++i) g.alleles[i] = rng.below(spec.locus(i).size());
  return g;
}

std::pair<Genome, Genome> crossover_at(const Genome& a, const Genome& b, std::size_t cut) {
  if (cut < 1 || cut >= kLoci) throw ConfigError("crossover cut must be in 1..12");
  Genome c1 = a, c2 = b;
  for (std::size_t i = cut; i < kLoci; ++i) {
    c1.alleles[i] = b.alleles[i];
    c2.alleles[i] = a.alleles[i];
  }
  return {c1, c2};
}

std::pair<Genome, Genome> single_point_crossover(const Genome& a, const Genome& b,
                                                 const GenomeSpec& spec, Rng& rng) {
  validate(a, spec);
  validate(b, spec);
  return crossover_at(a, b, 1 + rng.below(kLoci - 1));
}

Genome mutate(const Genome& g, double rate, const GenomeSpec& spec, Rng& rng) {
  if (!(rate >= 0.0 && rate <= 1.0)) throw ConfigError("mutation rate must be in [0, 1]");
  if (!rng.bernoulli(rate)) return g;
  std::vector<std::size_t> mutable_loci;
  for (std::size_t i = 0; i < kLoci; ++i)
    if (spec.locus(i).size() > 1) mutable_loci.push_back(i);
  if (mutable_loci.empty()) return g;
  const std::size_t locus = mutable_loci[rng.below(mutable_loci.size())];
  Genome out = g;
  // Draw from the table with the current allele removed.
  const std::size_t draw = rng.below(spec.locus(locus).size() - 1);
  out.alleles[locus] = draw >= g.alleles[locus] ? draw + 1 : draw;
  return out;
}

ModelConfig decode(const Genome& g, const GenomeSpec& spec, const ScaleOptions& scale) {
  validate(g, spec);
  auto value = [&](Locus l) { return spec.locus(l).values[g[l]]; };

  ModelConfig c;
  c.batch_size = static_cast<std::size_t>(value(Locus::BatchSize));
  c.epochs = static_cast<std::size_t>(value(Locus::Epochs));
  c.momentum = static_cast<float>(value(Locus::Momentum));
  c.loss = static_cast<nn::LossKind>(static_cast<std::size_t>(value(Locus::Loss)));
  c.optimizer = static_cast<nn::OptimizerKind>(static_cast<std::size_t>(value(Locus::Optimizer)));
  c.lstm_cells = static_cast<std::size_t>(value(Locus::LstmCells));
  c.lstm_dropout = static_cast<float>(value(Locus::LstmDropout));
  c.nominal = {static_cast<std::size_t>(value(Locus::HiddenUnits)),
               static_cast<std::size_t>(value(Locus::CnnFlat1)),
               static_cast<std::size_t>(value(Locus::CnnFlat2)),
               static_cast<std::size_t>(value(Locus::LstmFlat1)),
               static_cast<std::size_t>(value(Locus::LstmFlat2))};
  c.flat_dropout = static_cast<float>(value(Locus::FlatDropout));

  c.divisor = std::max<std::size_t>(scale.divisor, 1);
  c.effective = {reduced(value(Locus::HiddenUnits), c.divisor), reduced(value(Locus::CnnFlat1), c.divisor),
                 reduced(value(Locus::CnnFlat2), c.divisor), reduced(value(Locus::LstmFlat1), c.divisor),
                 reduced(value(Locus::LstmFlat2), c.divisor)};
  c.effective_epochs = scale.epoch_cap > 0 ? std::min(c.epochs, scale.epoch_cap) : c.epochs;
  return c;
}

void ModelConfig::validate() const {
  const GenomeSpec spec = GenomeSpec::standard();
  auto check = [&](Locus l, double v) {
    if (!in_table(spec.locus(l), v))
      throw ConfigError("model config: " + spec.locus(l).name + " = " + std::to_string(v) +
                        " is not an allele of its table");
  };
  check(Locus::BatchSize, static_cast<double>(batch_size));
  check(Locus::Epochs, static_cast<double>(epochs));
  check(Locus::Momentum, momentum);
  check(Locus::LstmCells, static_cast<double>(lstm_cells));
  // A rate of exactly 0 switches regularisation off; the genome never decodes to it.
  if (lstm_dropout != 0.0f) check(Locus::LstmDropout, lstm_dropout);
  check(Locus::HiddenUnits, static_cast<double>(nominal.hidden_units));
  check(Locus::CnnFlat1, static_cast<double>(nominal.cnn_flat1));
  check(Locus::CnnFlat2, static_cast<double>(nominal.cnn_flat2));
  check(Locus::LstmFlat1, static_cast<double>(nominal.lstm_flat1));
  check(Locus::LstmFlat2, static_cast<double>(nominal.lstm_flat2));
  if (flat_dropout != 0.0f) check(Locus::FlatDropout, flat_dropout);
  if (static_cast<std::size_t>(loss) > 1) throw ConfigError("model config: unknown loss");
  if (static_cast<std::size_t>(optimizer) >= nn::kAllOptimizers.size())
    throw ConfigError("model config: unknown optimizer");
  if (effective.hidden_units == 0 || effective.cnn_flat1 == 0 || effective.cnn_flat2 == 0 ||
      effective.lstm_flat1 == 0 || effective.lstm_flat2 == 0)
    throw ConfigError("model config: effective layer sizes must be positive");
  if (tau < 1) throw ConfigError("model config: tau must be at least 1");
  if (grid_w < 8 || grid_h < 8 || channels < 1)
    throw ConfigError("model config: grid must be at least 8x8 with one channel");
  if (conv.filters1 == 0 || conv.filters2 == 0) throw ConfigError("model config: conv filters must be positive");
  if (!(dt > 0.0)) throw ConfigError("model config: dt must be positive");
  if (learning_rate < 0.0f) throw ConfigError("model config: learning rate must be non-negative");
}

nlohmann::json genome_to_json(const Genome& g, const GenomeSpec& spec) {
  validate(g, spec);
  nlohmann::json j = nlohmann::json::object();
  for (std::size_t i = 0; i < kLoci; ++i) {
    const LocusSpec& l = spec.locus(i);
    if (l.labels.empty()) {
      j[l.name] = l.values[g.alleles[i]];
    } else {
      j[l.name] = l.labels[g.alleles[i]];
    }
  }
  j["indices"] = g.alleles;
  return j;
}

Genome genome_from_json(const nlohmann::json& j, const GenomeSpec& spec) {
  if (!j.contains("indices") || !j.at("indices").is_array() || j.at("indices").size() != kLoci)
    throw ConfigError("genome JSON needs an 'indices' array of 13 entries");
  Genome g;
  for (std::size_t i = 0; i < kLoci; ++i) g.alleles[i] = j.at("indices")[i].get<std::size_t>();
  validate(g, spec);
  return g;
}

}  // namespace evotraj
