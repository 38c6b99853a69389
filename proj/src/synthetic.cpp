#include "dd/synthetic.hpp"

#include <cmath>
#include <span>

#include "dd/errors.hpp"
#include "dd/rng.hpp"

namespace dd {

SyntheticData make_synthetic(const SyntheticSpec& spec) {
  if (spec.generators < 2 || spec.per_generator < 2 || spec.code_dim < 1 || spec.d_h < 2)
    throw ConfigError("synthetic spec: sizes too small");
  Rng rng(spec.seed, "synthetic");
  const std::size_t d = spec.d_h;
  auto unit_direction = [&](std::span<double> v) {
    double norm = 0.0;
    for (auto& x : v) {
      x = rng.normal();
      norm += x * x;
    }
    for (auto& x : v) x /= std::sqrt(norm);
  };

  std::vector<double> u(d);
  unit_direction(u);
  Matrix mix(spec.code_dim, d);
  for (std::size_t c = 0; c < spec.code_dim; ++c) unit_direction(mix.row(c));

  const std::size_t train_gens = spec.generators - 1;
  Matrix codes(spec.generators, spec.code_dim), domains(spec.generators, spec.code_dim);
  for (auto& v : codes.data) v = rng.normal();
  for (auto& v : domains.data) v = rng.normal();
  std::vector<double> train_mean(spec.code_dim, 0.0);
  for (std::size_t s = 0; s < train_gens; ++s)
    for (std::size_t c = 0; c < spec.code_dim; ++c) train_mean[c] += codes(s, c) / static_cast<double>(train_gens);
  for (std::size_t c = 0; c < spec.code_dim; ++c) codes(train_gens, c) -= spec.held_out_shift * train_mean[c];

  SyntheticData out;
  for (std::size_t s = 0; s < spec.generators; ++s) out.categories.push_back("G" + std::to_string(s));
  out.held_out = out.categories.back();

  std::vector<Sample> samples;
  Matrix h(spec.generators * spec.per_generator, d);
  std::size_t row = 0;
  for (std::size_t s = 0; s < spec.generators; ++s) {
    for (std::size_t i = 0; i < spec.per_generator; ++i, ++row) {
      const int y = i % 2 == 0 ? 1 : 0;
      Sample smp;
      smp.id = "syn-" + std::to_string(s) + "-" + std::to_string(i);
      smp.y = y;
      smp.s = out.categories[s];
      samples.push_back(smp);

      auto hr = h.row(row);
      const double t = y == 1 ? 1.0 : -1.0;
      for (std::size_t k = 0; k < d; ++k) hr[k] = spec.detection_strength * t * u[k];
      for (std::size_t c = 0; c < spec.code_dim; ++c) {
        const double f = (y == 1 ? spec.style_strength * codes(s, c) : 0.0) + spec.domain_strength * domains(s, c);
        for (std::size_t k = 0; k < d; ++k) hr[k] += f * mix(c, k);
      }
      for (std::size_t k = 0; k < d; ++k) hr[k] += spec.noise * rng.normal();
    }
  }
  out.corpus = Corpus(std::move(samples));
  std::vector<std::string> ids;
  for (const auto& smp : out.corpus.samples()) ids.push_back(smp.id);
  out.embeddings = EmbeddingBatch::from_matrix(std::move(ids), h);
  return out;
}

}  // namespace dd
