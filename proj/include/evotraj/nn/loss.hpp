#pragma once

#include <string_view>

#include "evotraj/nn/tensor.hpp"

namespace evotraj::nn {

enum class LossKind { MSE, LogCosh };

std::string_view to_string(LossKind kind);

struct LossResult {
  double value = 0.0;
  Tensor gradient;  ///< d(value)/d(prediction), same shape as the prediction
};

/// MSE = mean((p - t)^2), LogCosh = mean(log(cosh(p - t))), both averaged over
/// every element. Throws ShapeError when the shapes differ.
LossResult loss_eval(LossKind kind, const Tensor& prediction, const Tensor& target);

}  // namespace evotraj::nn
