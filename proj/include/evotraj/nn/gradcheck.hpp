#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "evotraj/nn/tensor.hpp"

namespace evotraj::nn {

/// A differentiable fragment exposed to the gradient checker.
struct GradCheckTarget {
  std::vector<Parameter*> parameters;
  /// Recomputes the scalar loss from the current parameter values.
  std::function<double()> loss;
  /// Zeroes and recomputes every parameter's analytic gradient.
  std::function<void()> backward;
  /// Optional: hash of the piecewise-linear branch taken by the last forward
  /// pass (ReLU masks, pooling winners). When a perturbation changes it the
  /// finite difference straddles a kink and the entry is skipped.
  std::function<std::uint64_t()> activation_pattern;
};

struct GradCheckOptions {
  double step = 1e-3;
  double relative_tolerance = 1e-3;
  /// Absolute floor below which differences are treated as float32 noise.
  double absolute_tolerance = 1e-4;
  std::size_t max_parameters = 5000;
};

struct GradCheckEntry {
  std::string parameter;
  std::size_t index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  double error = 0.0;  ///< |analytic - numeric| / max(|analytic|, |numeric|)
  bool passed = true;
  bool skipped = false;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  std::size_t checked = 0;
  std::size_t failed = 0;
  std::size_t skipped = 0;
  GradCheckEntry worst;  ///< largest error among non-skipped entries

  bool passed() const { return failed == 0 && checked > 0; }
  std::string summary() const;
};

/// Central-difference check of every parameter element. Failures are
/// reported, never thrown; a fragment over `max_parameters` throws ConfigError.
GradCheckReport gradient_check(const GradCheckTarget& target, const GradCheckOptions& options = {});

}  // namespace evotraj::nn
