#pragma once

#include <vector>

#include "evotraj/geometry.hpp"

namespace evotraj {

/// Future ego positions relative to the prediction-time pose, with velocities
/// derived by finite differences. Step i is differenced against step i-1, and
/// step 0 against the origin (0, 0) with heading 0.
struct Trajectory {
  std::vector<Vec2> points;
  std::vector<double> v_f;      ///< longitudinal speed, km/h
  std::vector<double> v_delta;  ///< heading rate, rad/s

  std::size_t size() const { return points.size(); }

  /// Throws ConfigError when dt is not positive.
  static Trajectory from_points(std::vector<Vec2> points, double dt);
};

/// Wraps an angle difference into (-pi, pi].
double wrap_angle(double a);

}  // namespace evotraj
