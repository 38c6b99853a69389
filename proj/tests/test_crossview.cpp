#include <cmath>
#include <set>

#include <gtest/gtest.h>

#include "dd/crossview.hpp"
#include "dd/errors.hpp"
#include "dd/heads.hpp"
#include "dd/rng.hpp"
#include "oracles.hpp"

using namespace dd;

namespace {

std::vector<double> random_vec(Rng& rng, std::size_t d, double scale = 1.0, double shift = 0.0) {
  std::vector<double> v(d);
  for (auto& x : v) x = shift + scale * rng.normal();
  return v;
}

Matrix random_matrix(Rng& rng, std::size_t r, std::size_t c) {
  Matrix m(r, c);
  for (auto& x : m.data) x = rng.normal();
  return m;
}

}  // namespace

TEST(StatTransfer, HandExample) {
  const auto out = stat_transfer(std::vector<double>{4, 6, 8}, std::vector<double>{1, 2, 3}, 0.0);
  EXPECT_NEAR(out[0], 4.0, 1e-12);
  EXPECT_NEAR(out[1], 6.0, 1e-12);
  EXPECT_NEAR(out[2], 8.0, 1e-12);
}

TEST(StatTransfer, ConstantContentGivesStyleMean) {
  const auto out = stat_transfer(std::vector<double>{1, 2, 6}, std::vector<double>{5, 5, 5});
  for (double x : out) EXPECT_DOUBLE_EQ(x, 3.0);
}

TEST(StatTransfer, MatchesStyleStatisticsProperty) {
  Rng rng(1);
  for (int t = 0; t < 1000; ++t) {
    const auto style = random_vec(rng, 32, rng.uniform(0.1, 3.0), rng.uniform(-2, 2));
    const auto content = random_vec(rng, 32, rng.uniform(0.1, 3.0), rng.uniform(-2, 2));
    const auto out = stat_transfer(style, content, kDefaultStatEps);
    const double sc = ddtest::vec_pop_std(content);
    EXPECT_NEAR(ddtest::vec_mean(out), ddtest::vec_mean(style), 1e-9);
    // With the eps guard the output std is std(style) * std(c) / (std(c) + eps).
    EXPECT_NEAR(ddtest::vec_pop_std(out), ddtest::vec_pop_std(style) * sc / (sc + kDefaultStatEps), 1e-9);
    EXPECT_NEAR(ddtest::vec_pop_std(out), ddtest::vec_pop_std(style), 1e-5 * ddtest::vec_pop_std(style) / sc + 1e-9);
  }
}

TEST(StatTransfer, SelfTransferIsIdentity) {
  Rng rng(2);
  for (int t = 0; t < 200; ++t) {
    const auto v = random_vec(rng, 16);
    const auto out = stat_transfer(v, v, 0.0);
    for (std::size_t k = 0; k < v.size(); ++k) EXPECT_NEAR(out[k], v[k], 1e-12);
    // The eps guard shrinks the centred part by std / (std + eps).
    const double m = ddtest::vec_mean(v), sd = ddtest::vec_pop_std(v);
    const auto guarded = stat_transfer(v, v);
    for (std::size_t k = 0; k < v.size(); ++k)
      EXPECT_NEAR(guarded[k], m + (v[k] - m) * sd / (sd + kDefaultStatEps), 1e-12);
  }
}

TEST(StatTransfer, BackwardMatchesFiniteDifferences) {
  Rng rng(3);
  for (int t = 0; t < 20; ++t) {
    auto style = random_vec(rng, 6), content = random_vec(rng, 6), w = random_vec(rng, 6);
    auto loss = [&] {
      const auto out = stat_transfer(style, content);
      double l = 0.0;
      for (std::size_t k = 0; k < out.size(); ++k) l += w[k] * out[k];
      return l;
    };
    std::vector<double> ds(6), dc(6);
    stat_transfer_backward(style, content, kDefaultStatEps, w, ds, dc);
    for (std::size_t k = 0; k < 6; ++k) {
      EXPECT_LT(ddtest::relative_error(ds[k], ddtest::central_difference(style[k], loss)), 1e-5);
      EXPECT_LT(ddtest::relative_error(dc[k], ddtest::central_difference(content[k], loss)), 1e-5);
    }
  }
}

TEST(CrossViewMix, EndpointsAndLinearity) {
  Rng rng(4);
  const auto a = random_vec(rng, 8), g = random_vec(rng, 8);
  EXPECT_EQ(cross_view_mix(a, g, 1.0), a);
  const auto t = stat_transfer(g, a);
  const auto mid = cross_view_mix(a, g, 0.5);
  for (std::size_t k = 0; k < 8; ++k) EXPECT_NEAR(mid[k], 0.5 * (a[k] + t[k]), 1e-12);
  const auto m6 = cross_view_mix(a, g, 0.6), m8 = cross_view_mix(a, g, 0.8), m7 = cross_view_mix(a, g, 0.7);
  for (std::size_t k = 0; k < 8; ++k) EXPECT_NEAR(m7[k], 0.5 * (m6[k] + m8[k]), 1e-12);
  EXPECT_THROW(cross_view_mix(a, g, 0.4), ValidationError);
  EXPECT_THROW(cross_view_mix(a, g, 1.1), ValidationError);
}

TEST(PairPartners, ForcedAndProperty) {
  const std::vector<int> y2{0, 1};
  EXPECT_EQ(pair_partners(2, y2, 0), (std::vector<std::size_t>{1, 0}));
  Rng rng(5);
  for (int t = 0; t < 300; ++t) {
    const std::size_t b = 2 + rng.index(30);
    std::vector<int> y(b);
    for (auto& v : y) v = rng.bernoulli(0.5);
    const auto p = pair_partners(b, y, t);
    ASSERT_EQ(p.size(), b);
    for (std::size_t i = 0; i < b; ++i) {
      EXPECT_NE(p[i], i);
      EXPECT_LT(p[i], b);
    }
    EXPECT_EQ(p, pair_partners(b, y, t));
  }
  const std::vector<int> y1{1};
  EXPECT_THROW(pair_partners(1, y1, 0), ValidationError);
}

TEST(Gammas, RangeAndDeterminism) {
  const auto g = draw_gammas(1000, 7);
  for (double x : g) {
    EXPECT_GE(x, 0.5);
    EXPECT_LT(x, 1.0);
  }
  EXPECT_EQ(g, draw_gammas(1000, 7));
}

TEST(AugmentAi, RowsFollowAiCount) {
  Rng rng(6);
  const auto a = random_matrix(rng, 8, 5), g = random_matrix(rng, 8, 5);
  const std::vector<int> none(8, 0);
  EXPECT_EQ(augment_ai(a, none, g, 1).rows, 0u);
  const std::vector<int> three{1, 0, 0, 1, 0, 0, 1, 0};
  EXPECT_EQ(augment_ai(a, three, g, 1).rows, 3u);

  const auto pb = perturb_batch(a, g, three, 9);
  ASSERT_EQ(pb.a_aug.rows, 3u);
  EXPECT_EQ(pb.aug_rows, (std::vector<std::size_t>{0, 3, 6}));
  for (std::size_t r = 0; r < 3; ++r) {
    const std::size_t i = pb.aug_rows[r];
    bool differs = false;
    for (std::size_t k = 0; k < 5; ++k) differs = differs || pb.a_aug(r, k) != pb.a_tilde(i, k);
    EXPECT_TRUE(differs);
  }
}

TEST(PerturbBatch, BothViewsShareTheDraws) {
  Rng rng(7);
  const auto a = random_matrix(rng, 6, 4), g = random_matrix(rng, 6, 4);
  const std::vector<int> y{1, 0, 1, 0, 1, 1};
  const auto pb = perturb_batch(a, g, y, 3);
  for (std::size_t i = 0; i < 6; ++i) {
    const std::size_t j = pb.pair_index[i];
    const auto at = cross_view_mix(a.row(i), g.row(j), pb.gamma[i]);
    const auto gt = cross_view_mix(g.row(i), a.row(j), pb.gamma[i]);
    for (std::size_t k = 0; k < 4; ++k) {
      EXPECT_DOUBLE_EQ(pb.a_tilde(i, k), at[k]);
      EXPECT_DOUBLE_EQ(pb.g_tilde(i, k), gt[k]);
    }
  }
}

TEST(PerturbBatch, BackwardMatchesFiniteDifferences) {
  Rng rng(8);
  auto a = random_matrix(rng, 5, 4), g = random_matrix(rng, 5, 4);
  const std::vector<int> y{1, 0, 1, 1, 0};
  const auto pb0 = perturb_batch(a, g, y, 2);
  const auto wa = random_matrix(rng, 5, 4), wg = random_matrix(rng, 5, 4), waug = random_matrix(rng, pb0.a_aug.rows, 4);
  auto dot = [](const Matrix& x, const Matrix& w) {
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) s += x.data[i] * w.data[i];
    return s;
  };
  auto loss = [&] {
    const auto pb = perturb_batch(a, g, y, 2);
    return dot(pb.a_tilde, wa) + dot(pb.g_tilde, wg) + dot(pb.a_aug, waug);
  };
  Matrix da(5, 4), dg(5, 4);
  perturb_batch_backward(a, g, pb0, kDefaultStatEps, wa, wg, waug, da, dg);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_LT(ddtest::relative_error(da.data[i], ddtest::central_difference(a.data[i], loss)), 1e-5);
    EXPECT_LT(ddtest::relative_error(dg.data[i], ddtest::central_difference(g.data[i], loss)), 1e-5);
  }
}

TEST(RegLoss, HandCases) {
  Matrix pa(2, 2, 0.5), pg(2, 3, 1.0 / 3.0), none(0, 2);
  const std::vector<std::size_t> y{0, 0}, s{2, 1}, no_aug;
  EXPECT_NEAR(reg_loss_from_probs(pa, pg, none, y, s, no_aug), std::log(2.0) + std::log(3.0), 1e-12);
  EXPECT_NEAR(std::log(2.0) + std::log(3.0), 1.7918, 1e-4);

  Matrix pa1(2, 2), pg1(2, 3);
  pa1(0, 0) = pa1(1, 0) = 1.0;
  pg1(0, 2) = pg1(1, 1) = 1.0;
  EXPECT_EQ(reg_loss_from_probs(pa1, pg1, none, y, s, no_aug), 0.0);
}

TEST(RegLoss, UniformDiscriminatorsThroughTheHeads) {
  Rng init(9);
  Discriminator da(4, 8, 2, "D_a"), dg(4, 8, 3, "D_g");
  da.init(init);
  dg.init(init);
  da.output.weight.value.fill(0.0);
  dg.output.weight.value.fill(0.0);
  Rng rng(10);
  const auto at = random_matrix(rng, 3, 4), gt = random_matrix(rng, 3, 4);
  const std::vector<std::size_t> y{0, 0, 0}, s{0, 1, 2}, no_aug;
  EXPECT_NEAR(reg_loss(at, gt, Matrix(0, 4), y, s, no_aug, da, dg), std::log(2.0) + std::log(3.0), 1e-12);
}

TEST(RegLoss, MonotoneInTrueClassProbability) {
  Rng rng(11);
  for (int t = 0; t < 200; ++t) {
    const double p = rng.uniform(0.01, 0.98), q = rng.uniform(p + 1e-3, 0.999);
    Matrix pa(1, 2), pa2(1, 2), pg(1, 2, 0.5), none(0, 2);
    pa(0, 1) = p;
    pa(0, 0) = 1 - p;
    pa2(0, 1) = q;
    pa2(0, 0) = 1 - q;
    const std::vector<std::size_t> y{1}, s{0}, no_aug;
    const double l1 = reg_loss_from_probs(pa, pg, none, y, s, no_aug);
    const double l2 = reg_loss_from_probs(pa2, pg, none, y, s, no_aug);
    EXPECT_LT(l2, l1);
    EXPECT_GE(l2, 0.0);
  }
}
