#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "evotraj/nn/tensor.hpp"
#include "evotraj/rng.hpp"

namespace evotraj::nn {

enum class Activation { ReLU, Identity };
enum class Mode { Train, Eval };

/// Uniform Glorot initialisation in +-sqrt(6 / (fan_in + fan_out)).
void glorot_uniform(Tensor& t, std::size_t fan_in, std::size_t fan_out, Rng& rng);

/// Folds the sign pattern of `t` (value > 0) into a running hash. Used by the
/// gradient checker to detect finite-difference steps that cross a ReLU kink.
std::uint64_t hash_positive_mask(std::uint64_t h, const Tensor& t);

/// Fully connected layer y = act(x W^T + b) on [batch, in] inputs.
class Dense {
 public:
  Dense() = default;
  Dense(std::string name, std::size_t in, std::size_t out, Activation activation, Rng& rng);

  Tensor forward(const Tensor& x);
  /// Accumulates weight/bias gradients and returns d(loss)/d(input).
  Tensor backward(const Tensor& upstream);

  std::vector<Parameter*> parameters() { return {&weight, &bias}; }
  std::size_t in_features() const { return weight.value.dim(1); }
  std::size_t out_features() const { return weight.value.dim(0); }
  Activation activation() const { return activation_; }
  std::uint64_t activation_pattern(std::uint64_t h) const;

  Parameter weight;  ///< [out, in]
  Parameter bias;    ///< [out]

 private:
  Activation activation_ = Activation::Identity;
  Tensor input_;
  Tensor output_;
};

/// 3x3 convolution, stride 1, zero "same" padding, ReLU. Input [N, H, W, C].
class Conv2D {
 public:
  Conv2D() = default;
  Conv2D(std::string name, std::size_t in_channels, std::size_t filters, Rng& rng);

  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& upstream);

  std::vector<Parameter*> parameters() { return {&weight, &bias}; }
  std::size_t filters() const { return weight.value.dim(0); }
  std::uint64_t activation_pattern(std::uint64_t h) const { return hash_positive_mask(h, output_); }

  Parameter weight;  ///< [F, 3, 3, C]
  Parameter bias;    ///< [F]

 private:
  std::vector<std::size_t> input_shape_;
  std::vector<float> columns_;  // im2col of the last input, [9C, N*H*W]
  Tensor output_;
};

/// 2x2 max pooling with stride 2 (floor). Input [N, H, W, C].
class MaxPool2D {
 public:
  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& upstream) const;
  std::uint64_t activation_pattern(std::uint64_t h) const;

 private:
  std::vector<std::size_t> input_shape_;
  std::vector<std::size_t> argmax_;
};

struct ConvSpec {
  std::size_t filters1 = 4;
  std::size_t filters2 = 8;
  friend bool operator==(const ConvSpec&, const ConvSpec&) = default;
};

/// Per-frame feature extractor: two (conv 3x3 + ReLU + max-pool 2x2) stages,
/// flatten, then two ReLU dense stages. [N, H, W, C] -> [N, flat2].
class ConvBlock {
 public:
  ConvBlock() = default;
  ConvBlock(const std::string& name, std::size_t height, std::size_t width, std::size_t channels,
            const ConvSpec& spec, std::size_t flat1, std::size_t flat2, Rng& rng);

  Tensor forward(const Tensor& frames);
  Tensor backward(const Tensor& upstream);

  std::vector<Parameter*> parameters();
  std::size_t flattened_size() const { return flattened_; }
  std::size_t output_size() const { return dense2_.out_features(); }
  std::uint64_t activation_pattern(std::uint64_t h) const;

 private:
  std::size_t height_ = 0, width_ = 0, channels_ = 0, flattened_ = 0;
  Conv2D conv1_, conv2_;
  MaxPool2D pool1_, pool2_;
  Dense dense1_, dense2_;
  std::vector<std::size_t> pooled_shape_;
};

/// Inverted dropout. Training mode keeps each value with probability
/// 1 - rate and scales survivors by 1 / (1 - rate); eval mode is identity.
class Dropout {
 public:
  explicit Dropout(float rate = 0.0f);

  Tensor forward(const Tensor& x, Mode mode, Rng& rng);
  Tensor backward(const Tensor& upstream) const;
  float rate() const { return rate_; }

 private:
  float rate_ = 0.0f;
  std::vector<float> mask_;  // empty when the last forward was the identity
};

Tensor dropout(const Tensor& x, float rate, Mode mode, Rng& rng);

}  // namespace evotraj::nn
