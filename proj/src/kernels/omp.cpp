#include <cmath>

#include "dd/errors.hpp"
#include "dd/kernels.hpp"

#ifdef DD_WITH_OPENMP
#include <omp.h>
#endif

namespace dd::kernels::omp {

int max_threads() {
#ifdef DD_WITH_OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

void affine(const Matrix& x, const Matrix& w, std::span<const double> b, Matrix& y) {
  if (x.cols != w.cols || b.size() != w.rows) throw ValidationError("affine: shape mismatch");
  y = Matrix(x.rows, w.rows);
  const auto rows = static_cast<long>(x.rows);
#pragma omp parallel for schedule(static)
  for (long n = 0; n < rows; ++n) {
    const double* xr = x.data.data() + n * x.cols;
    double* yr = y.data.data() + n * y.cols;
    for (std::size_t o = 0; o < w.rows; ++o) {
      const double* wr = w.data.data() + o * w.cols;
      double acc = b[o];
      for (std::size_t i = 0; i < w.cols; ++i) acc += xr[i] * wr[i];
      yr[o] = acc;
    }
  }
}

void backprop_input(const Matrix& dy, const Matrix& w, Matrix& dx) {
  if (dy.cols != w.rows) throw ValidationError("backprop_input: shape mismatch");
  dx = Matrix(dy.rows, w.cols);
  const auto rows = static_cast<long>(dy.rows);
#pragma omp parallel for schedule(static)
  for (long n = 0; n < rows; ++n) {
    const double* g = dy.data.data() + n * dy.cols;
    double* out = dx.data.data() + n * dx.cols;
    for (std::size_t o = 0; o < w.rows; ++o) {
      const double* wr = w.data.data() + o * w.cols;
      for (std::size_t i = 0; i < w.cols; ++i) out[i] += g[o] * wr[i];
    }
  }
}

void accumulate_weight_grad(const Matrix& dy, const Matrix& x, Matrix& dw, std::span<double> db) {
  if (dy.rows != x.rows || dw.rows != dy.cols || dw.cols != x.cols || db.size() != dy.cols)
    throw ValidationError("accumulate_weight_grad: shape mismatch");
  const auto outs = static_cast<long>(dw.rows);
  // Parallel over output rows: no cross-thread reductions.
#pragma omp parallel for schedule(static)
  for (long o = 0; o < outs; ++o) {
    double* wr = dw.data.data() + o * dw.cols;
    double bias = 0.0;
    for (std::size_t n = 0; n < dy.rows; ++n) {
      const double g = dy.data[n * dy.cols + o];
      const double* xr = x.data.data() + n * x.cols;
      for (std::size_t i = 0; i < x.cols; ++i) wr[i] += g * xr[i];
      bias += g;
    }
    db[o] += bias;
  }
}

std::vector<double> pairwise_distances(const Matrix& points) {
  const std::size_t n = points.rows;
  std::vector<double> out(n < 2 ? 0 : n * (n - 1) / 2);
  const auto count = static_cast<long>(n);
#pragma omp parallel for schedule(dynamic, 16)
  for (long i = 0; i < count; ++i) {
    const std::size_t ui = static_cast<std::size_t>(i);
    const std::size_t base = ui * n - ui * (ui + 1) / 2;
    for (std::size_t j = ui + 1; j < n; ++j) {
      double s = 0.0;
      for (std::size_t c = 0; c < points.cols; ++c) {
        const double d = points(ui, c) - points(j, c);
        s += d * d;
      }
      out[base + (j - ui - 1)] = std::sqrt(s);
    }
  }
  return out;
}

}  // namespace dd::kernels::omp
