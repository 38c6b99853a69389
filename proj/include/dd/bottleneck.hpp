#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "dd/layers.hpp"
#include "dd/tensor.hpp"

namespace dd {

enum class Branch { A, G };

std::string to_string(Branch b);

inline constexpr double kDefaultSigmaFloor = 1e-4;

// Diagonal Gaussian for one instance.
struct GaussianPosterior {
  std::vector<double> mu;
  std::vector<double> sigma;

  std::size_t dim() const { return mu.size(); }
};

// Learnable Gaussian prior, N(0, I) at construction. The scale is stored as
// raw_sigma with sigma = exp(raw_sigma), so it stays positive under any update.
struct LearnablePrior {
  LearnablePrior() = default;
  LearnablePrior(std::size_t dim, const std::string& name, bool trainable = true);

  Parameter mu;
  Parameter raw_sigma;
  bool trainable = true;

  std::size_t dim() const { return mu.value.cols; }
  GaussianPosterior distribution() const;
  std::vector<Parameter*> parameters() { return {&mu, &raw_sigma}; }
};

// h -> tanh projection -> (mu head, softplus sigma head).
class BranchEncoder {
 public:
  struct Forward {
    Matrix e;      // projected features, after tanh
    Matrix mu;
    Matrix raw;    // sigma head pre-activation
    Matrix sigma;  // softplus(raw) + floor
  };

  BranchEncoder() = default;
  BranchEncoder(std::size_t d_h, std::size_t d_e, std::size_t d_z, const std::string& name,
                double sigma_floor = kDefaultSigmaFloor);

  void init(Rng& rng);

  Forward forward(const Matrix& h) const;
  // Backpropagates dL/dmu and dL/dsigma (either may be empty) and returns dL/dh.
  Matrix backward(const Matrix& h, const Forward& fwd, const Matrix& dmu, const Matrix& dsigma,
                  bool accumulate);

  // Posterior for a single embedding; throws NumericError on non-finite input.
  GaussianPosterior posterior(std::span<const double> h) const;

  std::size_t d_z() const { return mu_head.out(); }
  double sigma_floor() const { return sigma_floor_; }

  std::vector<Parameter*> parameters();

  Dense projection;
  Dense mu_head;
  Dense sigma_head;

 private:
  double sigma_floor_ = kDefaultSigmaFloor;
};

// K reparameterized draws mu + sigma * eps.
std::vector<std::vector<double>> sample(const GaussianPosterior& post, std::size_t k, std::uint64_t seed);

// Closed-form KL(q || p) for diagonal Gaussians, summed over dimensions.
double kl_to_prior(const GaussianPosterior& q, const GaussianPosterior& p);
double kl_to_prior(const GaussianPosterior& q, const LearnablePrior& p);

// Span form used by the model. When the gradient spans are non-empty,
// scale * dKL/d(.) is added to them.
double kl_diag(std::span<const double> mu_q, std::span<const double> sigma_q,
               std::span<const double> mu_p, std::span<const double> sigma_p);
void kl_diag_grad(std::span<const double> mu_q, std::span<const double> sigma_q,
                  std::span<const double> mu_p, std::span<const double> sigma_p, double scale,
                  std::span<double> d_mu_q, std::span<double> d_sigma_q, std::span<double> d_mu_p,
                  std::span<double> d_sigma_p);

// Batch mean of KL(q_a || p_a) + KL(q_g || p_g).
double db_loss(const std::vector<GaussianPosterior>& post_a, const std::vector<GaussianPosterior>& post_g,
               const GaussianPosterior& prior_a, const GaussianPosterior& prior_g);

// Posterior mean; inference never samples.
inline const std::vector<double>& infer_latent(const GaussianPosterior& post) { return post.mu; }

}  // namespace dd
