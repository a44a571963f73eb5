#pragma once

#include <cstddef>

#include "evotraj/nn/layers.hpp"
#include "evotraj/nn/loss.hpp"
#include "evotraj/nn/optimizer.hpp"

namespace evotraj {

/// Widths of the size-bearing layers (hidden units and the four flattened stages).
struct LayerSizes {
  std::size_t hidden_units = 100;
  std::size_t cnn_flat1 = 256;
  std::size_t cnn_flat2 = 256;
  std::size_t lstm_flat1 = 64;
  std::size_t lstm_flat2 = 64;

  friend bool operator==(const LayerSizes&, const LayerSizes&) = default;
};

/// Concrete hyperparameters for one predictor. `nominal` values come straight
/// from the allele tables; the `effective_*` values are what gets built and
/// trained after desk-scale reduction.
struct ModelConfig {
  std::size_t batch_size = 50;
  std::size_t epochs = 10;
  float momentum = 0.8f;
  nn::LossKind loss = nn::LossKind::MSE;
  nn::OptimizerKind optimizer = nn::OptimizerKind::RMSprop;
  std::size_t lstm_cells = 1;
  float lstm_dropout = 0.2f;
  LayerSizes nominal;
  float flat_dropout = 0.05f;

  std::size_t effective_epochs = 10;
  LayerSizes effective{25, 64, 64, 16, 16};
  std::size_t divisor = 4;

  std::size_t tau = 5;
  std::size_t grid_w = 32;
  std::size_t grid_h = 32;
  std::size_t channels = 1;
  nn::ConvSpec conv;
  float learning_rate = 0.0f;  ///< 0 selects the optimizer's default
  double dt = 0.1;

  float resolved_learning_rate() const {
    return learning_rate > 0.0f ? learning_rate : nn::default_learning_rate(optimizer);
  }

  /// Throws ConfigError when a nominal value is outside its allele table or
  /// an effective size is zero.
  void validate() const;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

}  // namespace evotraj
