#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "evotraj/nn/tensor.hpp"
#include "evotraj/rng.hpp"

namespace evotraj::nn {

struct LstmState {
  Tensor h;  ///< [batch, hidden]
  Tensor c;  ///< [batch, hidden]
};

/// Standard LSTM cell. Gates are packed in one weight matrix applied to the
/// concatenation [x_t, h_{t-1}], in the order input, forget, output, candidate.
///
///   i = sigm(z_i)  f = sigm(z_f)  o = sigm(z_o)  g = tanh(z_g)
///   c_t = f * c_{t-1} + i * g
///   h_t = o * tanh(c_t)
class LstmCell {
 public:
  LstmCell() = default;
  /// Glorot-uniform weights, zero biases except the forget gate (1.0).
  LstmCell(std::string name, std::size_t input_size, std::size_t hidden_size, Rng& rng);

  /// One recurrence step without caching. Throws NumericalError if a gate
  /// produces NaN.
  LstmState step(const Tensor& x, const LstmState& prev) const;

  /// Runs the cell over xs (each [batch, input]) from a zero state and caches
  /// everything needed for backpropagation through time. Returns h_t per step.
  std::vector<Tensor> forward(const std::vector<Tensor>& xs);

  /// Backpropagation through time. `dh[t]` is the loss gradient reaching h_t
  /// from outside the recurrence. Accumulates parameter gradients and returns
  /// the gradient with respect to each input x_t.
  std::vector<Tensor> backward(const std::vector<Tensor>& dh);

  std::vector<Parameter*> parameters() { return {&weight, &bias}; }
  std::size_t input_size() const { return input_size_; }
  std::size_t hidden_size() const { return hidden_size_; }

  Parameter weight;  ///< [4H, D + H]
  Parameter bias;    ///< [4H]

 private:
  struct StepCache {
    Tensor concat;  // [B, D + H]
    Tensor gates;   // activated i, f, o, g: [B, 4H]
    Tensor c_prev;
    Tensor tanh_c;
  };

  LstmState compute(const Tensor& x, const LstmState& prev, const std::vector<float>& weight_t,
                    std::size_t step_index, StepCache* cache) const;
  std::vector<float> transposed_weight() const;

  std::size_t input_size_ = 0;
  std::size_t hidden_size_ = 0;
  std::vector<StepCache> cache_;
};

}  // namespace evotraj::nn
