#include "evotraj/objectives.hpp"

#include <algorithm>
#include <cmath>

#include "evotraj/errors.hpp"
#include "evotraj/model.hpp"

namespace evotraj {

namespace {

std::size_t horizon(const Trajectory& traj, const ObjectiveConfig& cfg) {
  return cfg.tau0 == 0 ? traj.size() : std::min(cfg.tau0, traj.size());
}

void check_lengths(const Trajectory& a, const Trajectory& b) {
  if (a.size() != b.size())
    throw ShapeError("trajectory lengths differ: " + std::to_string(a.size()) + " vs " + std::to_string(b.size()));
}

int sign(double v) { return (v > 0.0) - (v < 0.0); }

}  // namespace

std::string_view to_string(ObjectiveKind kind) {
  switch (kind) {
    case ObjectiveKind::RMSE: return "RMSE";
    case ObjectiveKind::SignLoss: return "SignLoss";
    case ObjectiveKind::L1: return "l1";
    case ObjectiveKind::L2: return "l2";
    case ObjectiveKind::L3: return "l3";
  }
  return "?";
}

Direction direction_of(ObjectiveKind kind) {
  return kind == ObjectiveKind::L3 ? Direction::Maximize : Direction::Minimize;
}

void ObjectiveConfig::validate(std::size_t tau) const {
  if (tau0 > tau) throw ConfigError("tau0 must be at most tau");
  if (!(v_min < v_max)) throw ConfigError("v_min must be below v_max");
  if (!(dt > 0.0)) throw ConfigError("dt must be positive");
  if (!(sign_floor_steps > 0.0)) throw ConfigError("sign-loss floor must be positive");
}

double l1_distance_feedback(const Trajectory& traj, Vec2 dest, const ObjectiveConfig& cfg) {
  double sum = 0.0;
  for (std::size_t i = 0; i < horizon(traj, cfg); ++i) sum += squared_norm(traj.points[i] - dest);
  return sum;
}

double l2_lateral(const Trajectory& traj, const ObjectiveConfig& cfg) {
  double sum = 0.0;
  for (std::size_t i = 0; i < horizon(traj, cfg); ++i) sum += std::abs(traj.v_delta[i]);
  return sum;
}

double l3_longitudinal(const Trajectory& traj, const ObjectiveConfig& cfg) {
  double sum = 0.0;
  for (std::size_t i = 0; i < horizon(traj, cfg); ++i) sum += std::clamp(traj.v_f[i], cfg.v_min, cfg.v_max);
  return sum;
}

double rmse(const Trajectory& pred, const Trajectory& actual, RmseMode mode) {
  check_lengths(pred, actual);
  if (pred.size() == 0) return 0.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const Vec2 d = pred.points[i] - actual.points[i];
    sum += mode == RmseMode::MeanDistance ? norm(d) : squared_norm(d);
  }
  const double mean = sum / static_cast<double>(pred.size());
  return mode == RmseMode::MeanDistance ? mean : std::sqrt(mean);
}

double sign_loss(const Trajectory& pred, const Trajectory& actual, double floor_steps) {
  check_lengths(pred, actual);
  const std::size_t n = pred.size();
  if (n == 0) return 0.0;
  double numerator = 0.0;
  std::size_t agree = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double xp = pred.points[i].x, xa = actual.points[i].x;
    numerator += std::abs(std::abs(xp) - std::abs(xa));
    const int sp = sign(xp), sa = sign(xa);
    if (sp == 0 || sa == 0 || sp == sa) ++agree;
  }
  const double nn = static_cast<double>(n);
  numerator /= nn;
  const double denominator = std::max(static_cast<double>(agree) / nn, floor_steps / nn);
  return numerator / denominator;
}

std::array<ObjectiveKind, 3> experiment_objectives(int experiment) {
  using K = ObjectiveKind;
  switch (experiment) {
    case 1: return {K::RMSE, K::L2, K::L3};
    case 2: return {K::SignLoss, K::L2, K::L3};
    case 3: return {K::RMSE, K::L1, K::L3};
    case 4: return {K::SignLoss, K::L1, K::L3};
    case 5: return {K::L1, K::L2, K::L3};
    default: throw ConfigError("unknown experiment code " + std::to_string(experiment) + " (expected 1..5)");
  }
}

std::vector<Direction> ObjectiveVector::directions() const {
  std::vector<Direction> d;
  for (ObjectiveKind k : kinds) d.push_back(direction_of(k));
  return d;
}

std::vector<std::string> ObjectiveVector::names() const {
  std::vector<std::string> n;
  for (ObjectiveKind k : kinds) n.emplace_back(to_string(k));
  return n;
}

double Metrics::value(ObjectiveKind kind) const {
  switch (kind) {
    case ObjectiveKind::RMSE: return rmse;
    case ObjectiveKind::SignLoss: return sign_loss;
    case ObjectiveKind::L1: return l1;
    case ObjectiveKind::L2: return l2;
    case ObjectiveKind::L3: return l3;
  }
  return 0.0;
}

Trajectory truth_of(const SequenceSample& sample, double dt) { return Trajectory::from_points(sample.targets, dt); }

Metrics compute_metrics(const std::vector<Trajectory>& predictions, const std::vector<SequenceSample>& split,
                        const ObjectiveConfig& cfg) {
  if (predictions.size() != split.size()) throw ShapeError("prediction and sample counts differ");
  if (split.empty()) throw ConfigError("cannot evaluate objectives on an empty split");
  Metrics m;
  for (std::size_t i = 0; i < split.size(); ++i) {
    const Trajectory truth = truth_of(split[i], cfg.dt);
    const Trajectory& pred = predictions[i];
    m.rmse += rmse(pred, truth, cfg.rmse_mode);
    m.sign_loss += sign_loss(pred, truth, cfg.sign_floor_steps);
    m.l1 += l1_distance_feedback(pred, split[i].targets.back(), cfg);
    m.l2 += l2_lateral(pred, cfg);
    m.l3 += l3_longitudinal(pred, cfg);
  }
  const double n = static_cast<double>(split.size());
  m.rmse /= n;
  m.sign_loss /= n;
  m.l1 /= n;
  m.l2 /= n;
  m.l3 /= n;
  return m;
}

ObjectiveVector select_objectives(const Metrics& m, int experiment) {
  ObjectiveVector v;
  for (ObjectiveKind k : experiment_objectives(experiment)) {
    v.kinds.push_back(k);
    v.values.push_back(m.value(k));
  }
  return v;
}

ObjectiveVector evaluate(const Predictor& predictor, const std::vector<SequenceSample>& split, int experiment,
                         const ObjectiveConfig& cfg) {
  experiment_objectives(experiment);
  return select_objectives(compute_metrics(predictor(split), split, cfg), experiment);
}

ObjectiveVector evaluate(TrainedModel& model, const std::vector<SequenceSample>& split, int experiment,
                         const ObjectiveConfig& cfg) {
  return evaluate([&](const std::vector<SequenceSample>& s) { return model.model.predict(s); }, split, experiment,
                  cfg);
}

}  // namespace evotraj
