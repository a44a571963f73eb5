#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace evotraj::nn {

/// Dense float32 array with an explicit shape. Row-major.
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<float> values;

  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> dims, float fill = 0.0f);

  std::size_t size() const { return values.size(); }
  std::size_t dim(std::size_t i) const { return shape.at(i); }
  std::size_t rank() const { return shape.size(); }

  float* data() { return values.data(); }
  const float* data() const { return values.data(); }
  float& operator[](std::size_t i) { return values[i]; }
  float operator[](std::size_t i) const { return values[i]; }

  void fill(float v);
  /// Reinterprets the data with a new shape of identical element count.
  Tensor reshaped(std::vector<std::size_t> dims) const&;
  Tensor reshaped(std::vector<std::size_t> dims) &&;

  friend bool operator==(const Tensor&, const Tensor&) = default;
};

std::size_t element_count(std::span<const std::size_t> shape);
std::string shape_string(std::span<const std::size_t> shape);

/// Throws NumericalError naming `where` if any value is NaN or infinite.
void check_finite(const Tensor& t, std::string_view where);

/// Trainable tensor with its gradient accumulator.
struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;

  Parameter() = default;
  Parameter(std::string n, std::vector<std::size_t> shape)
      : name(std::move(n)), value(shape), grad(std::move(shape)) {}

  void zero_grad() { grad.fill(0.0f); }
};

// Matrix kernels on row-major buffers. All accumulate into C when `accumulate`
// is set, otherwise overwrite.
//   gemm_nn: C[M,N] = A[M,K] * B[K,N]
//   gemm_tn: C[M,N] = A[K,M]^T * B[K,N]
//   gemm_nt: C[M,N] = A[M,K] * B[N,K]^T
void gemm_nn(const float* a, const float* b, float* c, std::size_t m, std::size_t k, std::size_t n,
             bool accumulate);
void gemm_tn(const float* a, const float* b, float* c, std::size_t m, std::size_t k, std::size_t n,
             bool accumulate);
void gemm_nt(const float* a, const float* b, float* c, std::size_t m, std::size_t k, std::size_t n,
             bool accumulate);

/// Dot product with eight interleaved partial sums (a fixed summation order).
float dot(const float* a, const float* b, std::size_t n);

}  // namespace evotraj::nn
