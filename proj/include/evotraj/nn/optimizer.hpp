#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "evotraj/nn/tensor.hpp"

namespace evotraj::nn {

/// Declared in the order of the optimizer allele table.
enum class OptimizerKind { RMSprop, NAdam, SGD, AdaGrad, Adadelta, Adam, AdaMax };

inline constexpr std::array<OptimizerKind, 7> kAllOptimizers = {
    OptimizerKind::RMSprop, OptimizerKind::NAdam,  OptimizerKind::SGD,   OptimizerKind::AdaGrad,
    OptimizerKind::Adadelta, OptimizerKind::Adam, OptimizerKind::AdaMax};

std::string_view to_string(OptimizerKind kind);
std::optional<OptimizerKind> optimizer_from_string(std::string_view name);

/// 1e-2 for SGD, 1e-3 for every adaptive method.
float default_learning_rate(OptimizerKind kind);

struct OptimizerSettings {
  OptimizerKind kind = OptimizerKind::Adam;
  float learning_rate = 1e-3f;
  float momentum = 0.0f;  ///< SGD only
  float beta1 = 0.9f;
  float beta2 = 0.999f;
  float epsilon = 1e-8f;
  float rmsprop_rho = 0.9f;
  float adadelta_rho = 0.95f;
  float adadelta_epsilon = 1e-6f;

  static OptimizerSettings defaults(OptimizerKind kind, float momentum = 0.0f);
};

/// Per-parameter slot tensors plus the step counter for one update rule.
///
///   SGD       v = mu v - lr g;                    w += v
///   RMSprop   s = rho s + (1-rho) g^2;            w -= lr g / (sqrt(s) + eps)
///   AdaGrad   s += g^2;                           w -= lr g / (sqrt(s) + eps)
///   Adadelta  s = rho s + (1-rho) g^2;  d = sqrt(u + eps) / sqrt(s + eps) g
///             u = rho u + (1-rho) d^2;            w -= lr d
///   Adam      m, v moments with bias correction;  w -= lr m^ / (sqrt(v^) + eps)
///   NAdam     Adam with the Nesterov look-ahead first moment
///             m^ = b1 m / (1 - b1^(t+1)) + (1-b1) g / (1 - b1^t)
///   AdaMax    u = max(b2 u, |g|);                 w -= lr / (1 - b1^t) m / (u + eps)
class OptimizerState {
 public:
  explicit OptimizerState(const OptimizerSettings& settings) : settings_(settings) {}

  /// Allocates zeroed slots matching every parameter.
  void init(std::span<Parameter* const> params);

  /// Applies one update using each parameter's accumulated gradient.
  /// Throws StateError if the slots were not initialised for these parameters.
  void apply(std::span<Parameter* const> params);

  std::size_t step() const { return step_; }
  const OptimizerSettings& settings() const { return settings_; }
  bool initialized() const { return initialized_; }

 private:
  OptimizerSettings settings_;
  std::size_t step_ = 0;
  bool initialized_ = false;
  std::vector<std::array<std::vector<float>, 2>> slots_;
};

}  // namespace evotraj::nn
