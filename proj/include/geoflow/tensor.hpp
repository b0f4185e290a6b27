#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace geoflow {

/// Dense row-major tensor of doubles. Rank 1 or 2 in practice; shape is fixed
/// after construction by convention (ParamStore enforces it for parameters).
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> v;

  Tensor() = default;
  static Tensor zeros(std::vector<std::size_t> shape);
  static Tensor row(std::span<const double> values);  // [1 x n]

  std::size_t size() const { return v.size(); }
  std::size_t rows() const { return shape.empty() ? 0 : shape[0]; }
  std::size_t cols() const { return shape.size() < 2 ? (shape.empty() ? 0 : 1) : shape[1]; }

  double* row_ptr(std::size_t r) { return v.data() + r * cols(); }
  const double* row_ptr(std::size_t r) const { return v.data() + r * cols(); }
  std::span<const double> row_span(std::size_t r) const { return {row_ptr(r), cols()}; }

  bool finite() const;
  void fill(double value);
  bool same_shape(const Tensor& o) const { return shape == o.shape; }
};

// y = x * W^T + b        x:[B,I]  W:[O,I]  b:[O]  y:[B,O]
void linear_forward(const Tensor& x, const Tensor& w, const Tensor& b, Tensor& y);
// dx = dy * W
void linear_backward_input(const Tensor& dy, const Tensor& w, Tensor& dx);
// dW += dy^T * x,  db += column sums of dy
void linear_backward_params(const Tensor& dy, const Tensor& x, Tensor& dw, Tensor& db);

}  // namespace geoflow
