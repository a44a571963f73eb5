#include "evotraj/nn/lstm.hpp"

#include <cmath>

#include "evotraj/errors.hpp"
#include "evotraj/nn/layers.hpp"

namespace evotraj::nn {

namespace {

float sigmoid(float z) { return 1.0f / (1.0f + std::exp(-z)); }

}  // namespace

LstmCell::LstmCell(std::string name, std::size_t input_size, std::size_t hidden_size, Rng& rng)
    : weight(name + ".weight", {4 * hidden_size, input_size + hidden_size}),
      bias(name + ".bias", {4 * hidden_size}),
      input_size_(input_size),
      hidden_size_(hidden_size) {
  if (input_size == 0 || hidden_size == 0) throw ConfigError("LSTM sizes must be positive");
  glorot_uniform(weight.value, input_size + hidden_size, 4 * hidden_size, rng);
  for (std::size_t j = hidden_size; j < 2 * hidden_size; ++j) bias.value[j] = 1.0f;
}

std::vector<float> LstmCell::transposed_weight() const {
  const std::size_t rows = 4 * hidden_size_, cols = input_size_ + hidden_size_;
  std::vector<float> wt(rows * cols);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) wt[c * rows + r] = weight.value[r * cols + c];
  return wt;
}

LstmState LstmCell::compute(const Tensor& x, const LstmState& prev, const std::vector<float>& weight_t,
                            std::size_t step_index, StepCache* cache) const {
  const std::size_t d = input_size_, hs = hidden_size_;
  if (x.rank() != 2 || x.dim(1) != d)
    throw ShapeError("lstm " + weight.name + ": input " + shape_string(x.shape) + " expected width " +
                     std::to_string(d));
  const std::size_t batch = x.dim(0);
  if (prev.h.shape != std::vector<std::size_t>{batch, hs} || prev.c.shape != prev.h.shape)
    throw ShapeError("lstm " + weight.name + ": state shape " + shape_string(prev.h.shape) +
                     " expected [" + std::to_string(batch) + "x" + std::to_string(hs) + "]");

  Tensor concat({batch, d + hs});
  for (std::size_t b = 0; b < batch; ++b) {
    std::copy_n(x.data() + b * d, d, concat.data() + b * (d + hs));
    std::copy_n(prev.h.data() + b * hs, hs, concat.data() + b * (d + hs) + d);
  }
  Tensor gates({batch, 4 * hs});
  gemm_nn(concat.data(), weight_t.data(), gates.data(), batch, d + hs, 4 * hs, false);

  LstmState next{Tensor({batch, hs}), Tensor({batch, hs})};
  Tensor tanh_c({batch, hs});
  for (std::size_t b = 0; b < batch; ++b) {
    float* z = gates.data() + b * 4 * hs;
    for (std::size_t j = 0; j < 4 * hs; ++j) {
      z[j] += bias.value[j];
      if (std::isnan(z[j]))
        throw NumericalError("lstm " + weight.name + ": NaN gate pre-activation at step " +
                             std::to_string(step_index));
      z[j] = j < 3 * hs ? sigmoid(z[j]) : std::tanh(z[j]);
    }
    for (std::size_t j = 0; j < hs; ++j) {
      const float i = z[j], f = z[hs + j], o = z[2 * hs + j], g = z[3 * hs + j];
      const float c = f * prev.c[b * hs + j] + i * g;
      const float tc = std::tanh(c);
      next.c[b * hs + j] = c;
      tanh_c[b * hs + j] = tc;
      next.h[b * hs + j] = o * tc;
    }
  }
  if (cache) {
    cache->concat = std::move(concat);
    cache->gates = std::move(gates);
    cache->c_prev = prev.c;
    cache->tanh_c = std::move(tanh_c);
  }
  return next;
}

LstmState LstmCell::step(const Tensor& x, const LstmState& prev) const {
  return compute(x, prev, transposed_weight(), 0, nullptr);
}

std::vector<Tensor> LstmCell::forward(const std::vector<Tensor>& xs) {
  if (xs.empty()) throw ShapeError("lstm " + weight.name + ": empty input sequence");
  const std::size_t batch = xs.front().rank() == 2 ? xs.front().dim(0) : 0;
  const std::vector<float> wt = transposed_weight();
  LstmState state{Tensor({batch, hidden_size_}), Tensor({batch, hidden_size_})};
  cache_.assign(xs.size(), {});
  std::vector<Tensor> hs;
  hs.reserve(xs.size());
  for (std::size_t t = 0; t < xs.size(); ++t) {
    state = compute(xs[t], state, wt, t, &cache_[t]);
    hs.push_back(state.h);
  }
  return hs;
}

std::vector<Tensor> LstmCell::backward(const std::vector<Tensor>& dh) {
  if (dh.size() != cache_.size())
    throw ShapeError("lstm " + weight.name + ": backward over " + std::to_string(dh.size()) +
                     " steps but forward cached " + std::to_string(cache_.size()));
  const std::size_t d = input_size_, hs = hidden_size_;
  const std::size_t batch = cache_.front().concat.dim(0);

  Tensor dh_next({batch, hs});
  Tensor dc_next({batch, hs});
  Tensor dz({batch, 4 * hs});
  Tensor dconcat({batch, d + hs});
  std::vector<Tensor> dxs(cache_.size());

  for (std::size_t step = cache_.size(); step-- > 0;) {
    const StepCache& k = cache_[step];
    if (dh[step].shape != std::vector<std::size_t>{batch, hs})
      throw ShapeError("lstm " + weight.name + ": upstream gradient shape " +
                       shape_string(dh[step].shape));
    for (std::size_t b = 0; b < batch; ++b) {
      const float* gate = k.gates.data() + b * 4 * hs;
      float* dzb = dz.data() + b * 4 * hs;
      for (std::size_t j = 0; j < hs; ++j) {
        const std::size_t idx = b * hs + j;
        const float i = gate[j], f = gate[hs + j], o = gate[2 * hs + j], g = gate[3 * hs + j];
        const float tc = k.tanh_c[idx];
        const float dhj = dh[step][idx] + dh_next[idx];
        const float d_o = dhj * tc;
        const float dc = dc_next[idx] + dhj * o * (1.0f - tc * tc);
        dzb[j] = dc * g * i * (1.0f - i);
        dzb[hs + j] = dc * k.c_prev[idx] * f * (1.0f - f);
        dzb[2 * hs + j] = d_o * o * (1.0f - o);
        dzb[3 * hs + j] = dc * i * (1.0f - g * g);
        dc_next[idx] = dc * f;
      }
    }
    gemm_tn(dz.data(), k.concat.data(), weight.grad.data(), 4 * hs, batch, d + hs, true);
    for (std::size_t b = 0; b < batch; ++b)
      for (std::size_t j = 0; j < 4 * hs; ++j) bias.grad[j] += dz[b * 4 * hs + j];
    gemm_nn(dz.data(), weight.value.data(), dconcat.data(), batch, 4 * hs, d + hs, false);

    Tensor dx({batch, d});
    for (std::size_t b = 0; b < batch; ++b) {
      std::copy_n(dconcat.data() + b * (d + hs), d, dx.data() + b * d);
      std::copy_n(dconcat.data() + b * (d + hs) + d, hs, dh_next.data() + b * hs);
    }
    dxs[step] = std::move(dx);
  }
  return dxs;
}

}  // namespace evotraj::nn
