#pragma once

#include <array>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "evotraj/geometry.hpp"
#include "evotraj/simdata.hpp"
#include "evotraj/trajectory.hpp"

namespace evotraj {

class Model;
struct TrainedModel;

enum class ObjectiveKind { RMSE, SignLoss, L1, L2, L3 };
enum class Direction { Minimize, Maximize };

std::string_view to_string(ObjectiveKind kind);
Direction direction_of(ObjectiveKind kind);

enum class RmseMode { MeanDistance, RootMeanSquare };

struct ObjectiveConfig {
  std::size_t tau0 = 0;  ///< horizon of the l1/l2/l3 sums; 0 means the full trajectory
  double v_min = 80.0;   ///< km/h
  double v_max = 130.0;  ///< km/h
  double dt = 0.1;
  RmseMode rmse_mode = RmseMode::MeanDistance;
  /// Sign-loss denominator floor as a count of agreeing steps (1 gives 1/n).
  double sign_floor_steps = 1.0;

  /// Throws ConfigError unless 1 <= tau0 <= tau (when set) and v_min < v_max.
  void validate(std::size_t tau) const;
};

/// Sum over the first tau0 steps of the squared distance to dest.
double l1_distance_feedback(const Trajectory& traj, Vec2 dest, const ObjectiveConfig& cfg);
/// Sum over the first tau0 steps of |v_delta|.
double l2_lateral(const Trajectory& traj, const ObjectiveConfig& cfg);
/// Sum over the first tau0 steps of v_f clamped to [v_min, v_max].
double l3_longitudinal(const Trajectory& traj, const ObjectiveConfig& cfg);

/// Mean per-step Euclidean distance, or the root of the mean squared distance
/// in RootMeanSquare mode. Throws ShapeError on a length mismatch.
double rmse(const Trajectory& pred, const Trajectory& actual, RmseMode mode = RmseMode::MeanDistance);

/// mean(| |x^| - |x| |) / max(agree / n, floor / n), where a step agrees when the
/// signs of x^ and x match or either is zero.
double sign_loss(const Trajectory& pred, const Trajectory& actual, double floor_steps = 1.0);

/// The objective triple of an experiment code 1..5. Throws ConfigError otherwise.
std::array<ObjectiveKind, 3> experiment_objectives(int experiment);

struct ObjectiveVector {
  std::vector<ObjectiveKind> kinds;
  std::vector<double> values;

  std::vector<Direction> directions() const;
  std::vector<std::string> names() const;
};

/// Every objective plus split averages, for logging.
struct Metrics {
  double rmse = 0.0;
  double sign_loss = 0.0;
  double l1 = 0.0;
  double l2 = 0.0;
  double l3 = 0.0;

  double value(ObjectiveKind kind) const;
};

/// Per-sample objectives averaged over the split, summed in sample order.
Metrics compute_metrics(const std::vector<Trajectory>& predictions, const std::vector<SequenceSample>& split,
                        const ObjectiveConfig& cfg);

ObjectiveVector select_objectives(const Metrics& m, int experiment);

using Predictor = std::function<std::vector<Trajectory>(const std::vector<SequenceSample>&)>;

ObjectiveVector evaluate(const Predictor& predictor, const std::vector<SequenceSample>& split, int experiment,
                         const ObjectiveConfig& cfg);
ObjectiveVector evaluate(TrainedModel& model, const std::vector<SequenceSample>& split, int experiment,
                         const ObjectiveConfig& cfg);

/// Ground-truth trajectory of a sample.
Trajectory truth_of(const SequenceSample& sample, double dt);

}  // namespace evotraj
