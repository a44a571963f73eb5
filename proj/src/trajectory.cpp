#include "evotraj/trajectory.hpp"

#include <cmath>
#include <numbers>

#include "evotraj/errors.hpp"

namespace evotraj {

double wrap_angle(double a) {
  constexpr double kTwoPi = 2.0 * std::numbers::pi;
  a = std::fmod(a, kTwoPi);
  if (a <= -std::numbers::pi) a += kTwoPi;
  if (a > std::numbers::pi) a -= kTwoPi;
  return a;
}

Trajectory Trajectory::from_points(std::vector<Vec2> points, double dt) {
  if (!(dt > 0.0)) throw ConfigError("trajectory: dt must be positive");
  Trajectory tr;
  tr.points = std::move(points);
  tr.v_f.reserve(tr.points.size());
  tr.v_delta.reserve(tr.points.size());
  Vec2 prev{};
  double heading = 0.0;
  for (const Vec2& p : tr.points) {
    const Vec2 d = p - prev;
    double next_heading = heading;
    if (d.x != 0.0 || d.y != 0.0) next_heading = std::atan2(d.x, d.y);
    tr.v_f.push_back(d.y / dt * 3.6);
    tr.v_delta.push_back(wrap_angle(next_heading - heading) / dt);
    heading = next_heading;
    prev = p;
  }
  return tr;
}

}  // namespace evotraj
