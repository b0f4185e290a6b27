#include "geoflow/tensor.hpp"

#include <cmath>
#include <cstring>

#include "geoflow/errors.hpp"
#include "geoflow/parallel.hpp"

namespace geoflow {

Tensor Tensor::zeros(std::vector<std::size_t> shape) {
  Tensor t;
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  t.shape = std::move(shape);
  t.v.assign(n, 0.0);
  return t;
}

Tensor Tensor::row(std::span<const double> values) {
  Tensor t;
  t.shape = {1, values.size()};
  t.v.assign(values.begin(), values.end());
  return t;
}

bool Tensor::finite() const {
  for (double x : v) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

void Tensor::fill(double value) {
  for (double& x : v) x = value;
}

void linear_forward(const Tensor& x, const Tensor& w, const Tensor& b, Tensor& y) {
  const std::size_t B = x.rows(), I = x.cols(), O = w.rows();
  if (w.cols() != I || b.size() != O)
    throw InvalidInput("linear_forward: shape mismatch");
  y.shape = {B, O};
  y.v.resize(B * O);
  parallel_for(0, B, [&](std::size_t lo, std::size_t hi) {
    for (std::size_t r = lo; r < hi; ++r) {
      const double* xr = x.row_ptr(r);
      double* yr = y.row_ptr(r);
      for (std::size_t o = 0; o < O; ++o) {
        const double* wr = w.row_ptr(o);
        double acc = b.v[o];
        for (std::size_t i = 0; i < I; ++i) acc += xr[i] * wr[i];
        yr[o] = acc;
      }
    }
  }, 64);
}

void linear_backward_input(const Tensor& dy, const Tensor& w, Tensor& dx) {
  const std::size_t B = dy.rows(), O = dy.cols(), I = w.cols();
  if (w.rows() != O) throw InvalidInput("linear_backward_input: shape mismatch");
  dx.shape = {B, I};
  dx.v.assign(B * I, 0.0);
  parallel_for(0, B, [&](std::size_t lo, std::size_t hi) {
    for (std::size_t r = lo; r < hi; ++r) {
      const double* gr = dy.row_ptr(r);
      double* dr = dx.row_ptr(r);
      for (std::size_t o = 0; o < O; ++o) {
        const double g = gr[o];
        if (g == 0) continue;
        const double* wr = w.row_ptr(o);
        for (std::size_t i = 0; i < I; ++i) dr[i] += g * wr[i];
      }
    }
  }, 64);
}

void linear_backward_params(const Tensor& dy, const Tensor& x, Tensor& dw, Tensor& db) {
  const std::size_t B = dy.rows(), O = dy.cols(), I = x.cols();
  if (x.rows() != B || dw.rows() != O || dw.cols() != I || db.size() != O)
    throw InvalidInput("linear_backward_params: shape mismatch");
  // Parallel over output rows; each row sums over the batch in index order,
  // so the accumulation is deterministic for any worker count.
  parallel_for(0, O, [&](std::size_t lo, std::size_t hi) {
    for (std::size_t o = lo; o < hi; ++o) {
      double* dwr = dw.row_ptr(o);
      double dbo = 0;
      for (std::size_t r = 0; r < B; ++r) {
        const double g = dy.v[r * O + o];
        dbo += g;
        if (g == 0) continue;
        const double* xr = x.row_ptr(r);
        for (std::size_t i = 0; i < I; ++i) dwr[i] += g * xr[i];
      }
      db.v[o] += dbo;
    }
  }, 16);
}

}  // namespace geoflow
