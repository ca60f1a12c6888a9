#pragma once

#include <cstddef>
#include <vector>

namespace rba {

// Dense row-major array of 64-bit floats with an explicit shape.
// The single numeric currency of the engine; data.size() equals the
// product of the shape at all times.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> shape);  // zero-filled
  Tensor(std::vector<std::size_t> shape, std::vector<double> values);

  static Tensor scalar(double value);
  static Tensor from_rows(const std::vector<std::vector<double>>& rows);

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }
  std::size_t dim(std::size_t axis) const;

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::vector<double>& values() { return data_; }
  const std::vector<double>& values() const { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  double& at(std::size_t i, std::size_t j);
  double at(std::size_t i, std::size_t j) const;
  double& at(std::size_t i, std::size_t j, std::size_t k);
  double at(std::size_t i, std::size_t j, std::size_t k) const;

  Tensor reshaped(std::vector<std::size_t> new_shape) const;

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
  friend bool operator==(const Tensor& a, const Tensor& b) = default;

 private:
  std::vector<std::size_t> shape_;
  std::vector<double> data_;
};

// Throws EngineError(kNumeric) if any value is NaN or infinite.
void ensure_finite(const Tensor& t, const char* what);
void ensure_finite(const double* values, std::size_t n, const char* what);

// Matrix product of 2-D tensors; inner dimensions must agree. The k-sum
// accumulates in ascending index order, so results are bit-reproducible.
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor matmul_nt(const Tensor& a, const Tensor& b);  // a * b^T
Tensor matmul_tn(const Tensor& a, const Tensor& b);  // a^T * b
Tensor transpose(const Tensor& a);

// Stabilized softmax along `axis` (max subtraction); slices sum to 1.
Tensor softmax(const Tensor& v, std::size_t axis);
Tensor sigmoid(const Tensor& v);
Tensor tanh_(const Tensor& v);
Tensor relu(const Tensor& v);
// Stabilized log(sum(exp)) along `axis`; the axis is dropped from the shape.
Tensor logsumexp(const Tensor& v, std::size_t axis);

double sigmoid_scalar(double x);

}  // namespace rba
