#include "evotraj/nn/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

#include "evotraj/errors.hpp"

namespace evotraj::nn {

std::size_t element_count(std::span<const std::size_t> shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_string(std::span<const std::size_t> shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += "x";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

Tensor::Tensor(std::vector<std::size_t> dims, float fill)
    : shape(std::move(dims)), values(element_count(shape), fill) {}

void Tensor::fill(float v) { std::fill(values.begin(), values.end(), v); }

Tensor Tensor::reshaped(std::vector<std::size_t> dims) const& {
  Tensor t = *this;
  return std::move(t).reshaped(std::move(dims));
}

Tensor Tensor::reshaped(std::vector<std::size_t> dims) && {
  if (element_count(dims) != values.size())
    throw ShapeError("cannot reshape " + shape_string(shape) + " to " + shape_string(dims));
  shape = std::move(dims);
  return std::move(*this);
}

void check_finite(const Tensor& t, std::string_view where) {
  for (std::size_t i = 0; i < t.values.size(); ++i) {
    if (!std::isfinite(t.values[i]))
      throw NumericalError(std::string(where) + ": non-finite value at element " + std::to_string(i));
  }
}

namespace {
// Column block small enough that a block of C rows stays in cache.
constexpr std::size_t kBlock = 256;
}  // namespace

void gemm_nn(const float* a, const float* b, float* c, std::size_t m, std::size_t k, std::size_t n,
             bool accumulate) {
  if (!accumulate) std::fill(c, c + m * n, 0.0f);
  for (std::size_t j0 = 0; j0 < n; j0 += kBlock) {
    const std::size_t j1 = std::min(n, j0 + kBlock);
    std::size_t i = 0;
    for (; i + 4 <= m; i += 4) {
      float* __restrict c0 = c + i * n;
      float* __restrict c1 = c0 + n;
      float* __restrict c2 = c1 + n;
      float* __restrict c3 = c2 + n;
      const float* a0 = a + i * k;
      for (std::size_t p = 0; p < k; ++p) {
        const float v0 = a0[p], v1 = a0[k + p], v2 = a0[2 * k + p], v3 = a0[3 * k + p];
        if (v0 == 0.0f && v1 == 0.0f && v2 == 0.0f && v3 == 0.0f) continue;
        const float* __restrict brow = b + p * n;
        for (std::size_t j = j0; j < j1; ++j) {
          const float bv = brow[j];
          c0[j] += v0 * bv;
          c1[j] += v1 * bv;
          c2[j] += v2 * bv;
          c3[j] += v3 * bv;
        }
      }
    }
    for (; i < m; ++i) {
      float* __restrict crow = c + i * n;
      const float* arow = a + i * k;
      for (std::size_t p = 0; p < k; ++p) {
        const float av = arow[p];
        if (av == 0.0f) continue;
        const float* __restrict brow = b + p * n;
        for (std::size_t j = j0; j < j1; ++j) crow[j] += av * brow[j];
      }
    }
  }
}

void gemm_tn(const float* a, const float* b, float* c, std::size_t m, std::size_t k, std::size_t n,
             bool accumulate) {
  if (!accumulate) std::fill(c, c + m * n, 0.0f);
  for (std::size_t j0 = 0; j0 < n; j0 += kBlock) {
    const std::size_t j1 = std::min(n, j0 + kBlock);
    for (std::size_t p = 0; p < k; ++p) {
      const float* arow = a + p * m;
      const float* __restrict brow = b + p * n;
      for (std::size_t i = 0; i < m; ++i) {
        const float av = arow[i];
        if (av == 0.0f) continue;
        float* __restrict crow = c + i * n;
        for (std::size_t j = j0; j < j1; ++j) crow[j] += av * brow[j];
      }
    }
  }
}

void gemm_nt(const float* a, const float* b, float* c, std::size_t m, std::size_t k, std::size_t n,
             bool accumulate) {
  std::vector<float> bt(k * n);
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t p = 0; p < k; ++p) bt[p * n + j] = b[j * k + p];
  gemm_nn(a, bt.data(), c, m, k, n, accumulate);
}

float dot(const float* a, const float* b, std::size_t n) {
  float acc[8] = {0, 0, 0, 0, 0, 0, 0, 0};
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8)
    for (std::size_t l = 0; l < 8; ++l) acc[l] += a[i + l] * b[i + l];
  float tail = 0.0f;
  for (; i < n; ++i) tail += a[i] * b[i];
  return ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7])) + tail;
}

}  // namespace evotraj::nn
