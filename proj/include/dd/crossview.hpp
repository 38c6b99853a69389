#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "dd/heads.hpp"
#include "dd/tensor.hpp"

namespace dd {

inline constexpr double kDefaultStatEps = 1e-5;
inline constexpr double kGammaLow = 0.5;
inline constexpr double kGammaHigh = 1.0;

// Renormalizes `content` to carry the feature mean and (population) standard
// deviation of `style`:
//   (content - mean(content)) / (std(content) + eps) * std(style) + mean(style)
std::vector<double> stat_transfer(std::span<const double> style, std::span<const double> content,
                                  double eps = kDefaultStatEps);

// Adds the vector-Jacobian products of stat_transfer for upstream `dout`.
void stat_transfer_backward(std::span<const double> style, std::span<const double> content, double eps,
                            std::span<const double> dout, std::span<double> dstyle, std::span<double> dcontent);

// gamma * a_i + (1 - gamma) * stat_transfer(g_j, a_i). gamma must lie in [0.5, 1];
// training draws it from [0.5, 1) and 1 is accepted as the identity endpoint.
std::vector<double> cross_view_mix(std::span<const double> a_i, std::span<const double> g_j, double gamma,
                                   double eps = kDefaultStatEps);

// Uniform partner j != i for each instance.
std::vector<std::size_t> pair_partners(std::size_t batch_size, std::span<const int> y, std::uint64_t seed);

// Independent U(low, high) coefficient per instance.
std::vector<double> draw_gammas(std::size_t n, std::uint64_t seed, double low = kGammaLow,
                                double high = kGammaHigh);

struct MixOptions {
  double eps = kDefaultStatEps;
  double gamma_low = kGammaLow;
  double gamma_high = kGammaHigh;
};

struct PerturbedBatch {
  Matrix a_tilde;
  Matrix g_tilde;
  Matrix a_aug;                        // one row per AI instance
  std::vector<std::size_t> pair_index;
  std::vector<double> gamma;
  std::vector<std::size_t> aug_rows;   // instance index behind each a_aug row
  std::vector<std::size_t> aug_pair;
  std::vector<double> aug_gamma;
};

// Second, independently drawn mix for every AI instance.
Matrix augment_ai(const Matrix& a, std::span<const int> y, const Matrix& g, std::uint64_t seed,
                  const MixOptions& opts = {});

// Builds a_tilde (perturbed by partner g), g_tilde (perturbed by partner a, same
// partner and gamma) and the AI-only augmentation.
PerturbedBatch perturb_batch(const Matrix& a, const Matrix& g, std::span<const int> y, std::uint64_t seed,
                             const MixOptions& opts = {});

// Backward through perturb_batch: accumulates into da and dg.
void perturb_batch_backward(const Matrix& a, const Matrix& g, const PerturbedBatch& pb, double eps,
                            const Matrix& da_tilde, const Matrix& dg_tilde, const Matrix& da_aug, Matrix& da,
                            Matrix& dg);

// Regularized prediction loss from discriminator probabilities:
//   mean CE(p_a, y) + mean CE(p_g, s) + mean CE(p_aug, y_aug)
// where the last term is dropped when there are no augmented rows. Rows of
// the first two matrices may stack several Monte Carlo draws.
double reg_loss_from_probs(const Matrix& probs_a, const Matrix& probs_g, const Matrix& probs_aug,
                           std::span<const std::size_t> y, std::span<const std::size_t> s,
                           std::span<const std::size_t> y_aug);

// Same loss evaluated with the discriminators in inference mode.
double reg_loss(const Matrix& a_tilde, const Matrix& g_tilde, const Matrix& a_aug,
                std::span<const std::size_t> y, std::span<const std::size_t> s, std::span<const std::size_t> y_aug,
                const Discriminator& d_a, const Discriminator& d_g);

}  // namespace dd
