#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "evotraj/model_config.hpp"
#include "evotraj/nn/layers.hpp"
#include "evotraj/nn/lstm.hpp"
#include "evotraj/simdata.hpp"
#include "evotraj/trajectory.hpp"

namespace evotraj {

/// Conv block per frame, a chain of LSTM cells over the tau feature vectors,
/// two dense stages on the final hidden state, then a linear head with 2 tau
/// outputs read as (x, y) per future step.
///
/// Targets are divided per axis by `target_scale` before the loss, so the
/// head works in roughly unit-variance coordinates; predictions are scaled
/// back to metres.
class Model {
 public:
  Model() = default;

  /// Throws ConfigError for an invalid configuration.
  static Model build(const ModelConfig& config, std::uint64_t seed);

  const ModelConfig& config() const { return config_; }
  std::uint64_t seed() const { return seed_; }

  std::vector<nn::Parameter*> parameters();
  std::size_t parameter_count() const;
  std::size_t recurrent_stages() const { return cells_.size(); }

  nn::Dense& head() { return head_; }
  Vec2 target_scale() const { return target_scale_; }
  void set_target_scale(Vec2 s) { target_scale_ = s; }

  /// Stacks samples into [B*tau, H, W, C] frames. Throws ShapeError when a
  /// sample does not match the configured tau or grid shape.
  nn::Tensor frames(const std::vector<const SequenceSample*>& batch) const;
  /// Scaled targets [B, 2 tau].
  nn::Tensor targets(const std::vector<const SequenceSample*>& batch) const;

  /// Output [B, 2 tau] in scaled units. `rng` drives dropout in training mode.
  nn::Tensor forward(const nn::Tensor& frames, std::size_t batch, nn::Mode mode, Rng& rng);
  /// Backpropagates d(loss)/d(output) through the last forward pass.
  void backward(const nn::Tensor& upstream);
  /// Hash of the ReLU masks and pooling winners of the last forward pass.
  std::uint64_t activation_pattern() const;

  /// Eval-mode prediction in metres.
  Trajectory predict(const SequenceSample& sample);
  std::vector<Trajectory> predict(const std::vector<SequenceSample>& samples);

  /// `<stem>.f32` / `<stem>.json` parameters plus `<stem>.model.json`.
  void save(const std::filesystem::path& stem);
  static Model load(const std::filesystem::path& stem);

 private:
  ModelConfig config_;
  std::uint64_t seed_ = 0;
  Vec2 target_scale_{1.0, 1.0};
  nn::ConvBlock conv_;
  std::vector<nn::LstmCell> cells_;
  std::vector<std::vector<nn::Dropout>> cell_dropout_;  // [cell][step]
  nn::Dense flat1_, flat2_;
  nn::Dropout flat_dropout_;
  nn::Dense head_;
  std::size_t last_batch_ = 0;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double val_rmse = 0.0;
};

struct TrainedModel {
  Model model;
  std::vector<EpochRecord> history;
  std::uint64_t seed = 0;
  bool failed = false;
  std::string failure;  ///< reason when failed
};

/// Per-axis RMS of the targets, floored at 0.1 m.
Vec2 target_rms(const std::vector<SequenceSample>& samples);

/// Mini-batch training for config.effective_epochs epochs on dataset.train,
/// recording the mean training loss and the validation RMSE after each epoch.
/// A non-finite loss stops training and marks the result failed.
TrainedModel train(Model model, const Dataset& dataset, std::uint64_t seed);

/// Mean per-step Euclidean distance between predictions and targets.
double mean_step_distance(const std::vector<Trajectory>& predictions,
                          const std::vector<SequenceSample>& samples);

nlohmann::json model_config_to_json(const ModelConfig& c);
ModelConfig model_config_from_json(const nlohmann::json& j);

}  // namespace evotraj
