#include <cmath>

#include <gtest/gtest.h>

#include "dd/kernels.hpp"
#include "dd/rng.hpp"

#ifdef DD_WITH_OPENMP
#include <omp.h>
#endif

using namespace dd;

namespace {

Matrix random_matrix(std::size_t r, std::size_t c, std::uint64_t seed) {
  Matrix m(r, c);
  Rng rng(seed);
  for (auto& v : m.data) v = rng.normal();
  return m;
}

// Forces a real team even on a single-core machine so the parallel path is exercised.
class Kernels : public ::testing::Test {
 protected:
  void SetUp() override {
#ifdef DD_WITH_OPENMP
    saved_ = omp_get_max_threads();
    omp_set_num_threads(4);
#endif
  }
  void TearDown() override {
#ifdef DD_WITH_OPENMP
    omp_set_num_threads(saved_);
#endif
  }
  int saved_ = 1;
};

}  // namespace

TEST_F(Kernels, AffineMatchesNaiveAndSerial) {
  const auto x = random_matrix(37, 11, 1), w = random_matrix(13, 11, 2);
  std::vector<double> b(13);
  for (std::size_t o = 0; o < 13; ++o) b[o] = 0.1 * static_cast<double>(o);
  Matrix ys, yp, yd;
  kernels::serial::affine(x, w, b, ys);
  kernels::omp::affine(x, w, b, yp);
  kernels::affine(x, w, b, yd);
  EXPECT_EQ(ys.data, yp.data);
  EXPECT_EQ(ys.data, yd.data);
  for (std::size_t n = 0; n < x.rows; ++n)
    for (std::size_t o = 0; o < w.rows; ++o) {
      double ref = b[o];
      for (std::size_t i = 0; i < x.cols; ++i) ref += x(n, i) * w(o, i);
      EXPECT_NEAR(ys(n, o), ref, 1e-12);
    }
}

TEST_F(Kernels, BackpropAndWeightGradBitIdentical) {
  const auto dy = random_matrix(300, 40, 3), w = random_matrix(40, 25, 4), x = random_matrix(300, 25, 5);
  Matrix dxs, dxp;
  kernels::serial::backprop_input(dy, w, dxs);
  kernels::omp::backprop_input(dy, w, dxp);
  EXPECT_EQ(dxs.data, dxp.data);

  Matrix dws(40, 25, 0.5), dwp(40, 25, 0.5);
  std::vector<double> dbs(40, 1.0), dbp(40, 1.0);
  kernels::serial::accumulate_weight_grad(dy, x, dws, dbs);
  kernels::omp::accumulate_weight_grad(dy, x, dwp, dbp);
  EXPECT_EQ(dws.data, dwp.data);
  EXPECT_EQ(dbs, dbp);
  double ref = 0.5;
  for (std::size_t n = 0; n < 300; ++n) ref += dy(n, 7) * x(n, 3);
  EXPECT_NEAR(dws(7, 3), ref, 1e-10);
}

TEST_F(Kernels, PairwiseDistancesUpperTriangle) {
  const auto pts = random_matrix(57, 6, 6);
  const auto s = kernels::serial::pairwise_distances(pts);
  const auto p = kernels::omp::pairwise_distances(pts);
  ASSERT_EQ(s.size(), 57u * 56u / 2u);
  EXPECT_EQ(s, p);
  std::size_t k = 0;
  for (std::size_t i = 0; i < 57; ++i)
    for (std::size_t j = i + 1; j < 57; ++j, ++k) {
      double d = 0.0;
      for (std::size_t c = 0; c < 6; ++c) d += (pts(i, c) - pts(j, c)) * (pts(i, c) - pts(j, c));
      EXPECT_NEAR(s[k], std::sqrt(d), 1e-12);
    }
  EXPECT_TRUE(kernels::pairwise_distances(random_matrix(1, 3, 7)).empty());
}

TEST_F(Kernels, LargeProblemsTakeTheParallelPathIdentically) {
  const auto x = random_matrix(512, 64, 8), w = random_matrix(128, 64, 9);
  std::vector<double> b(128, 0.0);
  Matrix ys, yd;
  kernels::serial::affine(x, w, b, ys);
  kernels::affine(x, w, b, yd);
  EXPECT_EQ(ys.data, yd.data);
}
