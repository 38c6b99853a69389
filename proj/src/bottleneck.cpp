#include "dd/bottleneck.hpp"

#include <cmath>

#include "dd/errors.hpp"
#include "dd/rng.hpp"

namespace dd {

std::string to_string(Branch b) { return b == Branch::A ? "a" : "g"; }

LearnablePrior::LearnablePrior(std::size_t dim, const std::string& name, bool trainable_)
    : mu(name + ".mu", 1, dim), raw_sigma(name + ".raw_sigma", 1, dim), trainable(trainable_) {}

GaussianPosterior LearnablePrior::distribution() const {
  GaussianPosterior p;
  p.mu = mu.value.data;
  p.sigma.resize(dim());
  for (std::size_t d = 0; d < dim(); ++d) p.sigma[d] = std::exp(raw_sigma.value.data[d]);
  return p;
}

BranchEncoder::BranchEncoder(std::size_t d_h, std::size_t d_e, std::size_t d_z, const std::string& name,
                             double sigma_floor)
    : projection(d_h, d_e, name + ".projection"),
      mu_head(d_e, d_z, name + ".mu_head"),
      sigma_head(d_e, d_z, name + ".sigma_head"),
      sigma_floor_(sigma_floor) {}

void BranchEncoder::init(Rng& rng) {
  projection.init(rng);
  mu_head.init(rng);
  sigma_head.init(rng);
}

BranchEncoder::Forward BranchEncoder::forward(const Matrix& h) const {
  Forward f;
  f.e = tanh_forward(projection.forward(h));
  f.mu = mu_head.forward(f.e);
  f.raw = sigma_head.forward(f.e);
  f.sigma = f.raw;
  for (auto& v : f.sigma.data) v = softplus(v) + sigma_floor_;
  return f;
}

Matrix BranchEncoder::backward(const Matrix& h, const Forward& fwd, const Matrix& dmu, const Matrix& dsigma,
                               bool accumulate) {
  Matrix de(fwd.e.rows, fwd.e.cols);
  if (dmu.size()) {
    Matrix part = mu_head.backward(fwd.e, dmu, accumulate);
    for (std::size_t i = 0; i < de.size(); ++i) de.data[i] += part.data[i];
  }
  if (dsigma.size()) {
    Matrix draw = dsigma;
    for (std::size_t i = 0; i < draw.size(); ++i) draw.data[i] *= sigmoid(fwd.raw.data[i]);
    Matrix part = sigma_head.backward(fwd.e, draw, accumulate);
    for (std::size_t i = 0; i < de.size(); ++i) de.data[i] += part.data[i];
  }
  return projection.backward(h, tanh_backward(fwd.e, de), accumulate);
}

GaussianPosterior BranchEncoder::posterior(std::span<const double> h) const {
  if (h.size() != projection.in()) throw ValidationError("posterior: embedding has wrong dimension");
  Matrix x(1, h.size());
  for (std::size_t i = 0; i < h.size(); ++i) {
    if (!std::isfinite(h[i])) throw NumericError("posterior: non-finite embedding entry");
    x.data[i] = h[i];
  }
  auto f = forward(x);
  return {f.mu.data, f.sigma.data};
}

std::vector<Parameter*> BranchEncoder::parameters() {
  std::vector<Parameter*> out;
  for (auto* layer : {&projection, &mu_head, &sigma_head})
    for (auto* p : layer->parameters()) out.push_back(p);
  return out;
}

std::vector<std::vector<double>> sample(const GaussianPosterior& post, std::size_t k, std::uint64_t seed) {
  if (k < 1) throw ValidationError("sample: K must be at least 1");
  Rng rng(seed, "eps");
  std::vector<std::vector<double>> out(k, std::vector<double>(post.dim()));
  for (auto& draw : out)
    for (std::size_t d = 0; d < post.dim(); ++d) draw[d] = post.mu[d] + post.sigma[d] * rng.normal();
  return out;
}

double kl_diag(std::span<const double> mu_q, std::span<const double> sigma_q, std::span<const double> mu_p,
               std::span<const double> sigma_p) {
  if (mu_q.size() != sigma_q.size() || mu_q.size() != mu_p.size() || mu_q.size() != sigma_p.size())
    throw ValidationError("kl_to_prior: dimension mismatch");
  double kl = 0.0;
  for (std::size_t d = 0; d < mu_q.size(); ++d) {
    const double diff = mu_q[d] - mu_p[d];
    const double vp = sigma_p[d] * sigma_p[d];
    kl += std::log(sigma_p[d] / sigma_q[d]) + (sigma_q[d] * sigma_q[d] + diff * diff) / (2.0 * vp) - 0.5;
  }
  return kl;
}

void kl_diag_grad(std::span<const double> mu_q, std::span<const double> sigma_q, std::span<const double> mu_p,
                  std::span<const double> sigma_p, double scale, std::span<double> d_mu_q,
                  std::span<double> d_sigma_q, std::span<double> d_mu_p, std::span<double> d_sigma_p) {
  for (std::size_t d = 0; d < mu_q.size(); ++d) {
    const double diff = mu_q[d] - mu_p[d];
    const double vp = sigma_p[d] * sigma_p[d];
    if (!d_mu_q.empty()) d_mu_q[d] += scale * diff / vp;
    if (!d_mu_p.empty()) d_mu_p[d] -= scale * diff / vp;
    if (!d_sigma_q.empty()) d_sigma_q[d] += scale * (sigma_q[d] / vp - 1.0 / sigma_q[d]);
    if (!d_sigma_p.empty())
      d_sigma_p[d] += scale * (1.0 / sigma_p[d] - (sigma_q[d] * sigma_q[d] + diff * diff) / (vp * sigma_p[d]));
  }
}

double kl_to_prior(const GaussianPosterior& q, const GaussianPosterior& p) {
  return kl_diag(q.mu, q.sigma, p.mu, p.sigma);
}

double kl_to_prior(const GaussianPosterior& q, const LearnablePrior& p) { return kl_to_prior(q, p.distribution()); }

double db_loss(const std::vector<GaussianPosterior>& post_a, const std::vector<GaussianPosterior>& post_g,
               const GaussianPosterior& prior_a, const GaussianPosterior& prior_g) {
  if (post_a.size() != post_g.size()) throw ValidationError("db_loss: branch batch sizes differ");
  if (post_a.empty()) return 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < post_a.size(); ++i)
    total += kl_to_prior(post_a[i], prior_a) + kl_to_prior(post_g[i], prior_g);
  return total / static_cast<double>(post_a.size());
}

}  // namespace dd
