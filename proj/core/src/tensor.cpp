#include "rba/tensor.hpp"

#include <cmath>
#include <string>
#include <utility>

#include "rba/errors.hpp"

namespace rba {

namespace {

std::size_t shape_product(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) {
    require(d > 0, ErrorCategory::kInvalid, "tensor dimensions must be positive");
    n *= d;
  }
  return n;
}

// outer * axis_len * inner == total size; used by the axis-wise ops.
struct AxisSplit {
  std::size_t outer, axis_len, inner;
};

AxisSplit split_at(const Tensor& t, std::size_t axis) {
  require(axis < t.rank(), ErrorCategory::kInvalid, "axis out of range");
  AxisSplit s{1, t.shape()[axis], 1};
  for (std::size_t i = 0; i < axis; ++i) s.outer *= t.shape()[i];
  for (std::size_t i = axis + 1; i < t.rank(); ++i) s.inner *= t.shape()[i];
  return s;
}

}  // namespace

Tensor::Tensor(std::vector<std::size_t> shape)
    : shape_(std::move(shape)), data_(shape_product(shape_), 0.0) {}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> values)
    : shape_(std::move(shape)), data_(std::move(values)) {
  require(data_.size() == shape_product(shape_), ErrorCategory::kInvalid,
          "tensor data length does not match shape");
}

Tensor Tensor::scalar(double value) { return Tensor({1}, {value}); }

Tensor Tensor::from_rows(const std::vector<std::vector<double>>& rows) {
  require(!rows.empty() && !rows[0].empty(), ErrorCategory::kInvalid,
          "from_rows: empty input");
  const std::size_t cols = rows[0].size();
  std::vector<double> data;
  data.reserve(rows.size() * cols);
  for (const auto& row : rows) {
    require(row.size() == cols, ErrorCategory::kInvalid, "from_rows: ragged rows");
    data.insert(data.end(), row.begin(), row.end());
  }
  return Tensor({rows.size(), cols}, std::move(data));
}

std::size_t Tensor::dim(std::size_t axis) const {
  require(axis < rank(), ErrorCategory::kInvalid, "axis out of range");
  return shape_[axis];
}

double& Tensor::at(std::size_t i, std::size_t j) {
  return data_[i * shape_[1] + j];
}
double Tensor::at(std::size_t i, std::size_t j) const {
  return data_[i * shape_[1] + j];
}
double& Tensor::at(std::size_t i, std::size_t j, std::size_t k) {
  return data_[(i * shape_[1] + j) * shape_[2] + k];
}
double Tensor::at(std::size_t i, std::size_t j, std::size_t k) const {
  return data_[(i * shape_[1] + j) * shape_[2] + k];
}

Tensor Tensor::reshaped(std::vector<std::size_t> new_shape) const {
  require(shape_product(new_shape) == data_.size(), ErrorCategory::kInvalid,
          "reshape changes element count");
  return Tensor(std::move(new_shape), data_);
}

void ensure_finite(const double* values, std::size_t n, const char* what) {
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(values[i])) {
      fail(ErrorCategory::kNumeric,
           std::string(what) + ": non-finite value at flat index " + std::to_string(i));
    }
  }
}

void ensure_finite(const Tensor& t, const char* what) {
  ensure_finite(t.data(), t.size(), what);
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  require(a.rank() == 2 && b.rank() == 2, ErrorCategory::kInvalid,
          "matmul: operands must be 2-D");
  require(a.dim(1) == b.dim(0), ErrorCategory::kInvalid,
          "matmul: inner dimensions disagree");
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  Tensor c({m, n});
  const double* pa = a.data();
  const double* pb = b.data();
  double* pc = c.data();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t kk = 0; kk < k; ++kk) {
      const double aik = pa[i * k + kk];
      const double* brow = pb + kk * n;
      double* crow = pc + i * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += aik * brow[j];
    }
  }
  ensure_finite(c, "matmul");
  return c;
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
  require(a.rank() == 2 && b.rank() == 2, ErrorCategory::kInvalid,
          "matmul_nt: operands must be 2-D");
  require(a.dim(1) == b.dim(1), ErrorCategory::kInvalid,
          "matmul_nt: inner dimensions disagree");
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(0);
  Tensor c({m, n});
  const double* pa = a.data();
  const double* pb = b.data();
  double* pc = c.data();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const double* arow = pa + i * k;
      const double* brow = pb + j * k;
      double acc = 0.0;
      for (std::size_t kk = 0; kk < k; ++kk) acc += arow[kk] * brow[kk];
      pc[i * n + j] = acc;
    }
  }
  ensure_finite(c, "matmul_nt");
  return c;
}

Tensor matmul_tn(const Tensor& a, const Tensor& b) {
  require(a.rank() == 2 && b.rank() == 2, ErrorCategory::kInvalid,
          "matmul_tn: operands must be 2-D");
  require(a.dim(0) == b.dim(0), ErrorCategory::kInvalid,
          "matmul_tn: inner dimensions disagree");
  const std::size_t m = a.dim(1), k = a.dim(0), n = b.dim(1);
  Tensor c({m, n});
  const double* pa = a.data();
  const double* pb = b.data();
  double* pc = c.data();
  for (std::size_t kk = 0; kk < k; ++kk) {
    const double* arow = pa + kk * m;
    const double* brow = pb + kk * n;
    for (std::size_t i = 0; i < m; ++i) {
      const double aki = arow[i];
      double* crow = pc + i * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += aki * brow[j];
    }
  }
  ensure_finite(c, "matmul_tn");
  return c;
}

Tensor transpose(const Tensor& a) {
  require(a.rank() == 2, ErrorCategory::kInvalid, "transpose: operand must be 2-D");
  const std::size_t m = a.dim(0), n = a.dim(1);
  Tensor t({n, m});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) t.at(j, i) = a.at(i, j);
  return t;
}

Tensor softmax(const Tensor& v, std::size_t axis) {
  const AxisSplit s = split_at(v, axis);
  Tensor out(v.shape());
  const double* pv = v.data();
  double* po = out.data();
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t in = 0; in < s.inner; ++in) {
      const std::size_t base = o * s.axis_len * s.inner + in;
      double max_val = pv[base];
      for (std::size_t a = 1; a < s.axis_len; ++a)
        max_val = std::max(max_val, pv[base + a * s.inner]);
      double sum = 0.0;
      for (std::size_t a = 0; a < s.axis_len; ++a) {
        const double e = std::exp(pv[base + a * s.inner] - max_val);
        po[base + a * s.inner] = e;
        sum += e;
      }
      const double inv = 1.0 / sum;
      for (std::size_t a = 0; a < s.axis_len; ++a) po[base + a * s.inner] *= inv;
    }
  }
  ensure_finite(out, "softmax");
  return out;
}

Tensor sigmoid(const Tensor& v) {
  Tensor out(v.shape());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = sigmoid_scalar(v[i]);
  return out;
}

Tensor tanh_(const Tensor& v) {
  Tensor out(v.shape());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = std::tanh(v[i]);
  return out;
}

Tensor relu(const Tensor& v) {
  Tensor out(v.shape());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i] > 0.0 ? v[i] : 0.0;
  return out;
}

Tensor logsumexp(const Tensor& v, std::size_t axis) {
  const AxisSplit s = split_at(v, axis);
  std::vector<std::size_t> out_shape;
  for (std::size_t i = 0; i < v.rank(); ++i)
    if (i != axis) out_shape.push_back(v.shape()[i]);
  if (out_shape.empty()) out_shape.push_back(1);
  Tensor out(out_shape);
  const double* pv = v.data();
  double* po = out.data();
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t in = 0; in < s.inner; ++in) {
      const std::size_t base = o * s.axis_len * s.inner + in;
      double max_val = pv[base];
      for (std::size_t a = 1; a < s.axis_len; ++a)
        max_val = std::max(max_val, pv[base + a * s.inner]);
      double sum = 0.0;
      for (std::size_t a = 0; a < s.axis_len; ++a)
        sum += std::exp(pv[base + a * s.inner] - max_val);
      po[o * s.inner + in] = max_val + std::log(sum);
    }
  }
  ensure_finite(out, "logsumexp");
  return out;
}

double sigmoid_scalar(double x) {
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace rba
