#include "evotraj/nn/layers.hpp"

#include <algorithm>
#include <cmath>

#include "evotraj/errors.hpp"

namespace evotraj::nn {

void glorot_uniform(Tensor& t, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  for (float& v : t.values) v = static_cast<float>(rng.uniform(-limit, limit));
}

std::uint64_t hash_positive_mask(std::uint64_t h, const Tensor& t) {
  constexpr std::uint64_t kPrime = 1099511628211ULL;
  std::uint64_t word = 0;
  for (std::size_t i = 0; i < t.values.size(); ++i) {
    word = (word << 1) | (t.values[i] > 0.0f ? 1u : 0u);
    if (i % 64 == 63) {
      h = (h ^ word) * kPrime;
      word = 0;
    }
  }
  return (h ^ word ^ t.values.size()) * kPrime;
}

// --- Dense -----------------------------------------------------------------

Dense::Dense(std::string name, std::size_t in, std::size_t out, Activation activation, Rng& rng)
    : weight(name + ".weight", {out, in}), bias(name + ".bias", {out}), activation_(activation) {
  glorot_uniform(weight.value, in, out, rng);
}

Tensor Dense::forward(const Tensor& x) {
  if (x.rank() != 2 || x.dim(1) != in_features())
    throw ShapeError("dense " + weight.name + ": input " + shape_string(x.shape) +
                     " does not match weight " + shape_string(weight.value.shape));
  const std::size_t batch = x.dim(0);
  const std::size_t out = out_features();
  Tensor y({batch, out});
  gemm_nt(x.data(), weight.value.data(), y.data(), batch, in_features(), out, false);
  for (std::size_t b = 0; b < batch; ++b) {
    float* row = y.data() + b * out;
    for (std::size_t j = 0; j < out; ++j) {
      row[j] += bias.value[j];
      if (activation_ == Activation::ReLU && row[j] < 0.0f) row[j] = 0.0f;
    }
  }
  input_ = x;
  output_ = y;
  return y;
}

Tensor Dense::backward(const Tensor& upstream) {
  if (upstream.shape != output_.shape)
    throw ShapeError("dense " + weight.name + ": upstream " + shape_string(upstream.shape) +
                     " does not match output " + shape_string(output_.shape));
  const std::size_t batch = upstream.dim(0);
  const std::size_t out = out_features();
  const std::size_t in = in_features();

  Tensor dz = upstream;
  if (activation_ == Activation::ReLU) {
    for (std::size_t i = 0; i < dz.size(); ++i)
      if (output_[i] <= 0.0f) dz[i] = 0.0f;
  }
  gemm_tn(dz.data(), input_.data(), weight.grad.data(), out, batch, in, true);
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t j = 0; j < out; ++j) bias.grad[j] += dz[b * out + j];

  Tensor dx({batch, in});
  gemm_nn(dz.data(), weight.value.data(), dx.data(), batch, out, in, false);
  return dx;
}

std::uint64_t Dense::activation_pattern(std::uint64_t h) const {
  return activation_ == Activation::ReLU ? hash_positive_mask(h, output_) : h;
}

// --- Conv2D ----------------------------------------------------------------

Conv2D::Conv2D(std::string name, std::size_t in_channels, std::size_t filters, Rng& rng)
    : weight(name + ".weight", {filters, 3, 3, in_channels}), bias(name + ".bias", {filters}) {
  glorot_uniform(weight.value, 9 * in_channels, 9 * filters, rng);
}

Tensor Conv2D::forward(const Tensor& x) {
  const std::size_t c_in = weight.value.dim(3);
  if (x.rank() != 4 || x.dim(3) != c_in)
    throw ShapeError("conv " + weight.name + ": input " + shape_string(x.shape) +
                     " does not match weight " + shape_string(weight.value.shape));
  const std::size_t n = x.dim(0), h = x.dim(1), w = x.dim(2);
  const std::size_t f = filters();
  const std::size_t patch = 9 * c_in;
  const std::size_t rows = n * h * w;

  // columns_[p][pixel], p = (ky * 3 + kx) * C + ch, zero outside the image.
  columns_.assign(patch * rows, 0.0f);
  for (std::size_t ky = 0; ky < 3; ++ky) {
    for (std::size_t kx = 0; kx < 3; ++kx) {
      for (std::size_t ch = 0; ch < c_in; ++ch) {
        float* col = columns_.data() + ((ky * 3 + kx) * c_in + ch) * rows;
        for (std::size_t img = 0; img < n; ++img) {
          const float* src = x.data() + img * h * w * c_in;
          for (std::size_t r = 0; r < h; ++r) {
            const std::ptrdiff_t rr = static_cast<std::ptrdiff_t>(r + ky) - 1;
            if (rr < 0 || rr >= static_cast<std::ptrdiff_t>(h)) continue;
            float* dst = col + (img * h + r) * w;
            const float* srow = src + static_cast<std::size_t>(rr) * w * c_in;
            const std::size_t c_lo = kx == 0 ? 1 : 0;
            const std::size_t c_hi = kx == 2 ? w - 1 : w;
            for (std::size_t c = c_lo; c < c_hi; ++c) dst[c] = srow[(c + kx - 1) * c_in + ch];
          }
        }
      }
    }
  }

  std::vector<float> out_t(f * rows);
  gemm_nn(weight.value.data(), columns_.data(), out_t.data(), f, patch, rows, false);
  Tensor y({n, h, w, f});
  for (std::size_t j = 0; j < f; ++j) {
    const float* src = out_t.data() + j * rows;
    const float b = bias.value[j];
    for (std::size_t i = 0; i < rows; ++i) y[i * f + j] = std::max(0.0f, src[i] + b);
  }
  input_shape_ = x.shape;
  output_ = y;
  return y;
}

Tensor Conv2D::backward(const Tensor& upstream) {
  if (upstream.shape != output_.shape)
    throw ShapeError("conv " + weight.name + ": upstream " + shape_string(upstream.shape) +
                     " does not match output " + shape_string(output_.shape));
  const std::size_t n = input_shape_[0], h = input_shape_[1], w = input_shape_[2];
  const std::size_t c_in = input_shape_[3];
  const std::size_t f = filters();
  const std::size_t patch = 9 * c_in;
  const std::size_t rows = n * h * w;

  std::vector<float> dz_t(f * rows);
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < f; ++j)
      dz_t[j * rows + i] = output_[i * f + j] > 0.0f ? upstream[i * f + j] : 0.0f;

  for (std::size_t j = 0; j < f; ++j) {
    const float* dz = dz_t.data() + j * rows;
    for (std::size_t p = 0; p < patch; ++p) weight.grad[j * patch + p] += dot(dz, columns_.data() + p * rows, rows);
    float sum = 0.0f;
    for (std::size_t i = 0; i < rows; ++i) sum += dz[i];
    bias.grad[j] += sum;
  }

  std::vector<float> dcols(patch * rows);
  gemm_tn(weight.value.data(), dz_t.data(), dcols.data(), patch, f, rows, false);

  Tensor dx(input_shape_);
  for (std::size_t ky = 0; ky < 3; ++ky) {
    for (std::size_t kx = 0; kx < 3; ++kx) {
      for (std::size_t ch = 0; ch < c_in; ++ch) {
        const float* col = dcols.data() + ((ky * 3 + kx) * c_in + ch) * rows;
        for (std::size_t img = 0; img < n; ++img) {
          float* dst = dx.data() + img * h * w * c_in;
          for (std::size_t r = 0; r < h; ++r) {
            const std::ptrdiff_t rr = static_cast<std::ptrdiff_t>(r + ky) - 1;
            if (rr < 0 || rr >= static_cast<std::ptrdiff_t>(h)) continue;
            const float* g = col + (img * h + r) * w;
            float* drow = dst + static_cast<std::size_t>(rr) * w * c_in;
            const std::size_t c_lo = kx == 0 ? 1 : 0;
            const std::size_t c_hi = kx == 2 ? w - 1 : w;
            for (std::size_t c = c_lo; c < c_hi; ++c) drow[(c + kx - 1) * c_in + ch] += g[c];
          }
        }
      }
    }
  }
  return dx;
}

// --- MaxPool2D -------------------------------------------------------------

Tensor MaxPool2D::forward(const Tensor& x) {
  if (x.rank() != 4) throw ShapeError("maxpool: expected [N,H,W,C], got " + shape_string(x.shape));
  const std::size_t n = x.dim(0), h = x.dim(1), w = x.dim(2), c = x.dim(3);
  const std::size_t oh = h / 2, ow = w / 2;
  if (oh == 0 || ow == 0) throw ShapeError("maxpool: input " + shape_string(x.shape) + " too small");
  Tensor y({n, oh, ow, c});
  argmax_.assign(y.size(), 0);
  for (std::size_t img = 0; img < n; ++img)
    for (std::size_t r = 0; r < oh; ++r)
      for (std::size_t col = 0; col < ow; ++col)
        for (std::size_t ch = 0; ch < c; ++ch) {
          std::size_t best = ((img * h + 2 * r) * w + 2 * col) * c + ch;
          for (std::size_t dy = 0; dy < 2; ++dy)
            for (std::size_t dx = 0; dx < 2; ++dx) {
              const std::size_t idx = ((img * h + 2 * r + dy) * w + 2 * col + dx) * c + ch;
              if (x[idx] > x[best]) best = idx;
            }
          const std::size_t o = ((img * oh + r) * ow + col) * c + ch;
          y[o] = x[best];
          argmax_[o] = best;
        }
  input_shape_ = x.shape;
  return y;
}

Tensor MaxPool2D::backward(const Tensor& upstream) const {
  if (upstream.size() != argmax_.size())
    throw ShapeError("maxpool: upstream " + shape_string(upstream.shape) + " does not match output");
  Tensor dx(input_shape_);
  for (std::size_t o = 0; o < argmax_.size(); ++o) dx[argmax_[o]] += upstream[o];
  return dx;
}

std::uint64_t MaxPool2D::activation_pattern(std::uint64_t h) const {
  for (std::size_t a : argmax_) h = (h ^ a) * 1099511628211ULL;
  return h;
}

// --- ConvBlock -------------------------------------------------------------

ConvBlock::ConvBlock(const std::string& name, std::size_t height, std::size_t width,
                     std::size_t channels, const ConvSpec& spec, std::size_t flat1,
                     std::size_t flat2, Rng& rng)
    : height_(height), width_(width), channels_(channels) {
  if (height < 8 || width < 8)
    throw ShapeError("conv block needs at least 8x8 input, got " + std::to_string(height) + "x" +
                     std::to_string(width));
  if (spec.filters1 == 0 || spec.filters2 == 0 || flat1 == 0 || flat2 == 0)
    throw ConfigError("conv block sizes must be positive");
  conv1_ = Conv2D(name + ".conv1", channels, spec.filters1, rng);
  conv2_ = Conv2D(name + ".conv2", spec.filters1, spec.filters2, rng);
  pooled_shape_ = {height / 2 / 2, width / 2 / 2, spec.filters2};
  flattened_ = element_count(pooled_shape_);
  dense1_ = Dense(name + ".flat1", flattened_, flat1, Activation::ReLU, rng);
  dense2_ = Dense(name + ".flat2", flat1, flat2, Activation::ReLU, rng);
}

Tensor ConvBlock::forward(const Tensor& frames) {
  if (frames.rank() != 4 || frames.dim(1) != height_ || frames.dim(2) != width_ ||
      frames.dim(3) != channels_)
    throw ShapeError("conv block: expected [N," + std::to_string(height_) + "," +
                     std::to_string(width_) + "," + std::to_string(channels_) + "], got " +
                     shape_string(frames.shape));
  const std::size_t n = frames.dim(0);
  Tensor t = pool1_.forward(conv1_.forward(frames));
  t = pool2_.forward(conv2_.forward(t));
  t = std::move(t).reshaped({n, flattened_});
  return dense2_.forward(dense1_.forward(t));
}

Tensor ConvBlock::backward(const Tensor& upstream) {
  Tensor g = dense1_.backward(dense2_.backward(upstream));
  const std::size_t n = g.dim(0);
  g = std::move(g).reshaped({n, pooled_shape_[0], pooled_shape_[1], pooled_shape_[2]});
  g = conv2_.backward(pool2_.backward(g));
  return conv1_.backward(pool1_.backward(g));
}

std::vector<Parameter*> ConvBlock::parameters() {
  return {&conv1_.weight,  &conv1_.bias,  &conv2_.weight,  &conv2_.bias,
          &dense1_.weight, &dense1_.bias, &dense2_.weight, &dense2_.bias};
}

std::uint64_t ConvBlock::activation_pattern(std::uint64_t h) const {
  h = conv1_.activation_pattern(h);
  h = pool1_.activation_pattern(h);
  h = conv2_.activation_pattern(h);
  h = pool2_.activation_pattern(h);
  h = dense1_.activation_pattern(h);
  return dense2_.activation_pattern(h);
}

// --- Dropout ---------------------------------------------------------------

Dropout::Dropout(float rate) : rate_(rate) {
  if (!(rate >= 0.0f && rate < 1.0f))
    throw ConfigError("dropout rate must be in [0, 1), got " + std::to_string(rate));
}

Tensor Dropout::forward(const Tensor& x, Mode mode, Rng& rng) {
  mask_.clear();
  if (mode == Mode::Eval || rate_ == 0.0f) return x;
  const float scale = 1.0f / (1.0f - rate_);
  mask_.resize(x.size());
  Tensor y = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mask_[i] = rng.uniform() < rate_ ? 0.0f : scale;
    y[i] *= mask_[i];
  }
  return y;
}

Tensor Dropout::backward(const Tensor& upstream) const {
  if (mask_.empty()) return upstream;
  if (upstream.size() != mask_.size()) throw ShapeError("dropout: upstream size mismatch");
  Tensor g = upstream;
  for (std::size_t i = 0; i < g.size(); ++i) g[i] *= mask_[i];
  return g;
}

Tensor dropout(const Tensor& x, float rate, Mode mode, Rng& rng) {
  Dropout d(rate);
  return d.forward(x, mode, rng);
}

}  // namespace evotraj::nn
