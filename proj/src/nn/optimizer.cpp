#include "evotraj/nn/optimizer.hpp"

#include <algorithm>
#include <cmath>

#include "evotraj/errors.hpp"

namespace evotraj::nn {

std::string_view to_string(OptimizerKind kind) {
  switch (kind) {
    case OptimizerKind::RMSprop: return "RMSprop";
    case OptimizerKind::NAdam: return "NAdam";
    case OptimizerKind::SGD: return "SGD";
    case OptimizerKind::AdaGrad: return "AdaGrad";
    case OptimizerKind::Adadelta: return "Adadelta";
    case OptimizerKind::Adam: return "Adam";
    case OptimizerKind::AdaMax: return "AdaMax";
  }
  return "?";
}

std::optional<OptimizerKind> optimizer_from_string(std::string_view name) {
  for (OptimizerKind k : kAllOptimizers)
    if (to_string(k) == name) return k;
  return std::nullopt;
}

float default_learning_rate(OptimizerKind kind) {
  return kind == OptimizerKind::SGD ? 1e-2f : 1e-3f;
}

OptimizerSettings OptimizerSettings::defaults(OptimizerKind kind, float momentum) {
  OptimizerSettings s;
  s.kind = kind;
  s.learning_rate = default_learning_rate(kind);
  s.momentum = momentum;
  return s;
}

void OptimizerState::init(std::span<Parameter* const> params) {
  slots_.clear();
  slots_.reserve(params.size());
  for (const Parameter* p : params) {
    std::array<std::vector<float>, 2> s;
    s[0].assign(p->value.size(), 0.0f);
    s[1].assign(p->value.size(), 0.0f);
    slots_.push_back(std::move(s));
  }
  step_ = 0;
  initialized_ = true;
}

void OptimizerState::apply(std::span<Parameter* const> params) {
  if (!initialized_) throw StateError("optimizer applied before init()");
  if (params.size() != slots_.size())
    throw StateError("optimizer slots cover " + std::to_string(slots_.size()) + " parameters, got " +
                     std::to_string(params.size()));
  for (std::size_t p = 0; p < params.size(); ++p) {
    if (slots_[p][0].size() != params[p]->value.size() || params[p]->grad.size() != params[p]->value.size())
      throw StateError("optimizer slot shape mismatch for parameter " + params[p]->name);
  }

  ++step_;
  const OptimizerSettings& s = settings_;
  const double lr = s.learning_rate;
  const double t = static_cast<double>(step_);
  const double b1 = s.beta1, b2 = s.beta2, eps = s.epsilon;
  const double bias1 = 1.0 - std::pow(b1, t);
  const double bias1_next = 1.0 - std::pow(b1, t + 1.0);
  const double bias2 = 1.0 - std::pow(b2, t);

  for (std::size_t p = 0; p < params.size(); ++p) {
    float* w = params[p]->value.data();
    const float* g = params[p]->grad.data();
    float* s0 = slots_[p][0].data();
    float* s1 = slots_[p][1].data();
    const std::size_t n = params[p]->value.size();

    switch (s.kind) {
      case OptimizerKind::SGD:
        for (std::size_t i = 0; i < n; ++i) {
          s0[i] = static_cast<float>(s.momentum * static_cast<double>(s0[i]) - lr * g[i]);
          w[i] += s0[i];
        }
        break;
      case OptimizerKind::RMSprop:
        for (std::size_t i = 0; i < n; ++i) {
          const double ms = s.rmsprop_rho * static_cast<double>(s0[i]) +
                            (1.0 - s.rmsprop_rho) * g[i] * static_cast<double>(g[i]);
          s0[i] = static_cast<float>(ms);
          w[i] = static_cast<float>(w[i] - lr * g[i] / (std::sqrt(ms) + eps));
        }
        break;
      case OptimizerKind::AdaGrad:
        for (std::size_t i = 0; i < n; ++i) {
          const double acc = static_cast<double>(s0[i]) + g[i] * static_cast<double>(g[i]);
          s0[i] = static_cast<float>(acc);
          w[i] = static_cast<float>(w[i] - lr * g[i] / (std::sqrt(acc) + eps));
        }
        break;
      case OptimizerKind::Adadelta: {
        const double rho = s.adadelta_rho, de = s.adadelta_epsilon;
        for (std::size_t i = 0; i < n; ++i) {
          const double sq = rho * s0[i] + (1.0 - rho) * g[i] * static_cast<double>(g[i]);
          const double delta = std::sqrt(static_cast<double>(s1[i]) + de) / std::sqrt(sq + de) * g[i];
          s0[i] = static_cast<float>(sq);
          s1[i] = static_cast<float>(rho * s1[i] + (1.0 - rho) * delta * delta);
          w[i] = static_cast<float>(w[i] - lr * delta);
        }
        break;
      }
      case OptimizerKind::Adam:
        for (std::size_t i = 0; i < n; ++i) {
          const double m = b1 * s0[i] + (1.0 - b1) * g[i];
          const double v = b2 * s1[i] + (1.0 - b2) * g[i] * static_cast<double>(g[i]);
          s0[i] = static_cast<float>(m);
          s1[i] = static_cast<float>(v);
          w[i] = static_cast<float>(w[i] - lr * (m / bias1) / (std::sqrt(v / bias2) + eps));
        }
        break;
      case OptimizerKind::NAdam:
        for (std::size_t i = 0; i < n; ++i) {
          const double m = b1 * s0[i] + (1.0 - b1) * g[i];
          const double v = b2 * s1[i] + (1.0 - b2) * g[i] * static_cast<double>(g[i]);
          s0[i] = static_cast<float>(m);
          s1[i] = static_cast<float>(v);
          const double m_hat = b1 * m / bias1_next + (1.0 - b1) * g[i] / bias1;
          w[i] = static_cast<float>(w[i] - lr * m_hat / (std::sqrt(v / bias2) + eps));
        }
        break;
      case OptimizerKind::AdaMax:
        for (std::size_t i = 0; i < n; ++i) {
          const double m = b1 * s0[i] + (1.0 - b1) * g[i];
          const double u = std::max(b2 * s1[i], static_cast<double>(std::abs(g[i])));
          s0[i] = static_cast<float>(m);
          s1[i] = static_cast<float>(u);
          w[i] = static_cast<float>(w[i] - lr / bias1 * m / (u + eps));
        }
        break;
    }
  }
}

}  // namespace evotraj::nn
