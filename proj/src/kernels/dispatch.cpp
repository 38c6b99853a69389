#include "dd/kernels.hpp"

namespace dd::kernels {

namespace {

// Below this many multiply-adds a parallel region costs more than it saves.
constexpr std::size_t kParallelWork = 1 << 15;

bool use_omp(std::size_t work) {
#ifdef DD_WITH_OPENMP
  return work >= kParallelWork && omp::max_threads() > 1;
#else
  (void)work;
  return false;
#endif
}

}  // namespace

void affine(const Matrix& x, const Matrix& w, std::span<const double> b, Matrix& y) {
  if (use_omp(x.rows * w.rows * w.cols)) return omp::affine(x, w, b, y);
  serial::affine(x, w, b, y);
}

void backprop_input(const Matrix& dy, const Matrix& w, Matrix& dx) {
  if (use_omp(dy.rows * w.rows * w.cols)) return omp::backprop_input(dy, w, dx);
  serial::backprop_input(dy, w, dx);
}

void accumulate_weight_grad(const Matrix& dy, const Matrix& x, Matrix& dw, std::span<double> db) {
  if (use_omp(dy.rows * dw.rows * dw.cols)) return omp::accumulate_weight_grad(dy, x, dw, db);
  serial::accumulate_weight_grad(dy, x, dw, db);
}

std::vector<double> pairwise_distances(const Matrix& points) {
  if (use_omp(points.rows * points.rows * points.cols / 2)) return omp::pairwise_distances(points);
  return serial::pairwise_distances(points);
}

}  // namespace dd::kernels
