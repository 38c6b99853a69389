#include "dd/crossview.hpp"

#include <cmath>

#include "dd/errors.hpp"
#include "dd/rng.hpp"

namespace dd {

namespace {

struct Moments {
  double mean = 0.0;
  double std = 0.0;
};

Moments moments(std::span<const double> v) {
  Moments m;
  for (double x : v) m.mean += x;
  m.mean /= static_cast<double>(v.size());
  for (double x : v) m.std += (x - m.mean) * (x - m.mean);
  m.std = std::sqrt(m.std / static_cast<double>(v.size()));
  return m;
}

void check_dims(std::span<const double> style, std::span<const double> content) {
  if (style.size() != content.size()) throw ValidationError("stat_transfer: dimension mismatch");
  if (content.size() < 2) throw ValidationError("stat_transfer: need at least two features");
}

void mix_row(std::span<const double> a, std::span<const double> g, double gamma, double eps, std::span<double> out) {
  const auto t = stat_transfer(g, a, eps);
  for (std::size_t d = 0; d < a.size(); ++d) out[d] = gamma * a[d] + (1.0 - gamma) * t[d];
}

// Adds d(mix)/d(a) and d(mix)/d(g) contributions for one row.
void mix_row_backward(std::span<const double> a, std::span<const double> g, double gamma, double eps,
                      std::span<const double> dout, std::span<double> da, std::span<double> dg) {
  std::vector<double> scaled(dout.size());
  for (std::size_t d = 0; d < dout.size(); ++d) {
    da[d] += gamma * dout[d];
    scaled[d] = (1.0 - gamma) * dout[d];
  }
  stat_transfer_backward(g, a, eps, scaled, dg, da);
}

}  // namespace

std::vector<double> stat_transfer(std::span<const double> style, std::span<const double> content, double eps) {
  check_dims(style, content);
  const Moments ms = moments(style);
  const Moments mc = moments(content);
  std::vector<double> out(content.size());
  const double denom = mc.std + eps;
  for (std::size_t d = 0; d < content.size(); ++d) {
    // A constant content vector normalizes to zero; with eps = 0 there is nothing to divide.
    const double normalized = denom > 0.0 ? (content[d] - mc.mean) / denom : 0.0;
    out[d] = normalized * ms.std + ms.mean;
  }
  return out;
}

void stat_transfer_backward(std::span<const double> style, std::span<const double> content, double eps,
                            std::span<const double> dout, std::span<double> dstyle, std::span<double> dcontent) {
  check_dims(style, content);
  const double n = static_cast<double>(content.size());
  const Moments ms = moments(style);
  const Moments mc = moments(content);
  const double denom = mc.std + eps;

  // Style side: out = xhat * std_s + mean_s.
  double d_std_s = 0.0;
  double d_mean_s = 0.0;
  for (std::size_t d = 0; d < dout.size(); ++d) {
    const double xhat = denom > 0.0 ? (content[d] - mc.mean) / denom : 0.0;
    d_std_s += dout[d] * xhat;
    d_mean_s += dout[d];
  }
  for (std::size_t d = 0; d < style.size(); ++d) {
    double g = d_mean_s / n;
    if (ms.std > 0.0) g += d_std_s * (style[d] - ms.mean) / (n * ms.std);
    dstyle[d] += g;
  }

  // Content side: xhat = u / (std_c + eps), u = c - mean_c.
  if (!(denom > 0.0)) return;
  double d_denom = 0.0;
  std::vector<double> du(content.size());
  double du_mean = 0.0;
  for (std::size_t d = 0; d < content.size(); ++d) {
    const double u = content[d] - mc.mean;
    const double dxhat = dout[d] * ms.std;
    du[d] = dxhat / denom;
    d_denom -= dxhat * u / (denom * denom);
    du_mean += du[d];
  }
  du_mean /= n;
  for (std::size_t d = 0; d < content.size(); ++d) {
    const double u = content[d] - mc.mean;
    double g = du[d] - du_mean;
    if (mc.std > 0.0) g += d_denom * u / (n * mc.std);
    dcontent[d] += g;
  }
}

std::vector<double> cross_view_mix(std::span<const double> a_i, std::span<const double> g_j, double gamma,
                                   double eps) {
  if (!(gamma >= kGammaLow && gamma <= kGammaHigh))
    throw ValidationError("cross_view_mix: gamma must lie in [0.5, 1]");
  std::vector<double> out(a_i.size());
  mix_row(a_i, g_j, gamma, eps, out);
  return out;
}

std::vector<std::size_t> pair_partners(std::size_t batch_size, std::span<const int> y, std::uint64_t seed) {
  if (batch_size < 2) throw ValidationError("pair_partners: batch size must be at least 2");
  if (!y.empty() && y.size() != batch_size) throw ValidationError("pair_partners: label count mismatch");
  Rng rng(seed, "pair");
  std::vector<std::size_t> out(batch_size);
  for (std::size_t i = 0; i < batch_size; ++i) {
    // Uniform over the batch_size - 1 other slots.
    const std::size_t j = rng.index(batch_size - 1);
    out[i] = j >= i ? j + 1 : j;
  }
  return out;
}

std::vector<double> draw_gammas(std::size_t n, std::uint64_t seed, double low, double high) {
  if (!(low < high)) throw ValidationError("draw_gammas: empty range");
  Rng rng(seed, "gamma");
  std::vector<double> out(n);
  for (auto& g : out) g = rng.uniform(low, high);
  return out;
}

namespace {

struct AugmentPlan {
  std::vector<std::size_t> rows;
  std::vector<std::size_t> partner;
  std::vector<double> gamma;
};

AugmentPlan plan_augmentation(std::span<const int> y, std::uint64_t seed, const MixOptions& opts) {
  AugmentPlan plan;
  for (std::size_t i = 0; i < y.size(); ++i)
    if (y[i] == 1) plan.rows.push_back(i);
  if (plan.rows.empty() || y.size() < 2) {
    plan.rows.clear();
    return plan;
  }
  const auto partners = pair_partners(y.size(), y, Rng::derive_seed(seed, "aug-pair", 0));
  const auto gammas = draw_gammas(y.size(), Rng::derive_seed(seed, "aug-gamma", 0), opts.gamma_low, opts.gamma_high);
  for (auto i : plan.rows) {
    plan.partner.push_back(partners[i]);
    plan.gamma.push_back(gammas[i]);
  }
  return plan;
}

}  // namespace

Matrix augment_ai(const Matrix& a, std::span<const int> y, const Matrix& g, std::uint64_t seed,
                  const MixOptions& opts) {
  if (y.size() != a.rows || !a.same_shape(g)) throw ValidationError("augment_ai: shape mismatch");
  const auto plan = plan_augmentation(y, seed, opts);
  Matrix out(plan.rows.size(), a.cols);
  for (std::size_t r = 0; r < plan.rows.size(); ++r)
    mix_row(a.row(plan.rows[r]), g.row(plan.partner[r]), plan.gamma[r], opts.eps, out.row(r));
  return out;
}

PerturbedBatch perturb_batch(const Matrix& a, const Matrix& g, std::span<const int> y, std::uint64_t seed,
                             const MixOptions& opts) {
  const double eps = opts.eps;
  if (!a.same_shape(g) || y.size() != a.rows) throw ValidationError("perturb_batch: shape mismatch");
  PerturbedBatch pb;
  pb.pair_index = pair_partners(a.rows, y, Rng::derive_seed(seed, "pair", 0));
  pb.gamma = draw_gammas(a.rows, Rng::derive_seed(seed, "gamma", 0), opts.gamma_low, opts.gamma_high);
  pb.a_tilde = Matrix(a.rows, a.cols);
  pb.g_tilde = Matrix(a.rows, a.cols);
  for (std::size_t i = 0; i < a.rows; ++i) {
    const std::size_t j = pb.pair_index[i];
    mix_row(a.row(i), g.row(j), pb.gamma[i], eps, pb.a_tilde.row(i));
    mix_row(g.row(i), a.row(j), pb.gamma[i], eps, pb.g_tilde.row(i));
  }
  const auto plan = plan_augmentation(y, seed, opts);
  pb.aug_rows = plan.rows;
  pb.aug_pair = plan.partner;
  pb.aug_gamma = plan.gamma;
  pb.a_aug = Matrix(plan.rows.size(), a.cols);
  for (std::size_t r = 0; r < plan.rows.size(); ++r)
    mix_row(a.row(plan.rows[r]), g.row(plan.partner[r]), plan.gamma[r], eps, pb.a_aug.row(r));
  return pb;
}

void perturb_batch_backward(const Matrix& a, const Matrix& g, const PerturbedBatch& pb, double eps,
                            const Matrix& da_tilde, const Matrix& dg_tilde, const Matrix& da_aug, Matrix& da,
                            Matrix& dg) {
  for (std::size_t i = 0; i < a.rows; ++i) {
    const std::size_t j = pb.pair_index[i];
    mix_row_backward(a.row(i), g.row(j), pb.gamma[i], eps, da_tilde.row(i), da.row(i), dg.row(j));
    mix_row_backward(g.row(i), a.row(j), pb.gamma[i], eps, dg_tilde.row(i), dg.row(i), da.row(j));
  }
  for (std::size_t r = 0; r < pb.aug_rows.size(); ++r)
    mix_row_backward(a.row(pb.aug_rows[r]), g.row(pb.aug_pair[r]), pb.aug_gamma[r], eps, da_aug.row(r),
                     da.row(pb.aug_rows[r]), dg.row(pb.aug_pair[r]));
}

double reg_loss_from_probs(const Matrix& probs_a, const Matrix& probs_g, const Matrix& probs_aug,
                           std::span<const std::size_t> y, std::span<const std::size_t> s,
                           std::span<const std::size_t> y_aug) {
  double loss = cross_entropy_rows(probs_a, y, 0.0, nullptr) + cross_entropy_rows(probs_g, s, 0.0, nullptr);
  if (probs_aug.rows > 0) loss += cross_entropy_rows(probs_aug, y_aug, 0.0, nullptr);
  return loss;
}

double reg_loss(const Matrix& a_tilde, const Matrix& g_tilde, const Matrix& a_aug,
                std::span<const std::size_t> y, std::span<const std::size_t> s, std::span<const std::size_t> y_aug,
                const Discriminator& d_a, const Discriminator& d_g) {
  const Matrix pa = d_a.forward(a_tilde, false, nullptr).probs;
  const Matrix pg = d_g.forward(g_tilde, false, nullptr).probs;
  const Matrix paug = a_aug.rows ? d_a.forward(a_aug, false, nullptr).probs : Matrix();
  return reg_loss_from_probs(pa, pg, paug, y, s, y_aug);
}

}  // namespace dd
