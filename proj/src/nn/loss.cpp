#include "evotraj/nn/loss.hpp"

#include <cmath>
#include <numbers>

#include "evotraj/errors.hpp"

namespace evotraj::nn {

std::string_view to_string(LossKind kind) { return kind == LossKind::MSE ? "MSE" : "LogCosh"; }

namespace {

// log(cosh(x)) without overflow for large |x|.
double log_cosh(double x) {
  const double a = std::abs(x);
  if (a < 1e-3) return 0.5 * a * a - a * a * a * a / 12.0;
  return a + std::log1p(std::exp(-2.0 * a)) - std::numbers::ln2;
}

}  // namespace

LossResult loss_eval(LossKind kind, const Tensor& prediction, const Tensor& target) {
  if (prediction.shape != target.shape)
    throw ShapeError("loss: prediction " + shape_string(prediction.shape) + " vs target " +
                     shape_string(target.shape));
  const std::size_t n = prediction.size();
  LossResult r{0.0, Tensor(prediction.shape)};
  if (n == 0) return r;
  const double inv_n = 1.0 / static_cast<double>(n);
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double e = static_cast<double>(prediction[i]) - static_cast<double>(target[i]);
    if (kind == LossKind::MSE) {
      sum += e * e;
      r.gradient[i] = static_cast<float>(2.0 * e * inv_n);
    } else {
      sum += log_cosh(e);
      r.gradient[i] = static_cast<float>(std::tanh(e) * inv_n);
    }
  }
  r.value = sum * inv_n;
  return r;
}

}  // namespace evotraj::nn
