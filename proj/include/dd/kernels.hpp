#pragma once

// Data-parallel inner loops used by the model and the evaluation code.
//
// Every kernel exists twice: `serial::` is the plain reference loop nest and
// `omp::` parallelizes the outermost independent loop with OpenMP. Each output
// element is always accumulated by a single thread in the same order as the
// serial version, so both variants are bit-identical. The unqualified
// `kernels::` entry points pick the OpenMP variant when it is compiled in and
// the problem is large enough to amortize a parallel region.

#include <span>
#include <vector>

#include "dd/tensor.hpp"

namespace dd::kernels {

#define DD_KERNEL_DECLS                                                              \
  /* Y = X * W^T + b.  X: n x in, W: out x in, b: out. Y is resized. */              \
  void affine(const Matrix& x, const Matrix& w, std::span<const double> b, Matrix& y); \
  /* dX = dY * W.  dY: n x out, W: out x in. dX is resized. */                       \
  void backprop_input(const Matrix& dy, const Matrix& w, Matrix& dx);                \
  /* dW += dY^T * X and db += column sums of dY. */                                  \
  void accumulate_weight_grad(const Matrix& dy, const Matrix& x, Matrix& dw,         \
                              std::span<double> db);                                 \
  /* Euclidean distances for all pairs i < j, row-major upper triangle. */           \
  std::vector<double> pairwise_distances(const Matrix& points);

namespace serial {
DD_KERNEL_DECLS
}  // namespace serial

namespace omp {
DD_KERNEL_DECLS
// Number of threads an OpenMP region would use; 1 when built without OpenMP.
int max_threads();
}  // namespace omp

DD_KERNEL_DECLS

#undef DD_KERNEL_DECLS

}  // namespace dd::kernels
