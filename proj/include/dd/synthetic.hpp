#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dd/corpus.hpp"
#include "dd/embedder.hpp"

namespace dd {

// Controlled corpus with known factors. Each embedding is a fixed random
// linear mix
//   h = detection_strength * t * u + U (style_y * code_s + domain_s) + noise
// where t = +1 for AI and -1 for human text, code_s is the generator's style
// code (AI samples only), domain_s a slice code shared by both classes of a
// slice, u and the rows of U are random unit directions drawn once per
// dataset, and the noise is isotropic with per-coordinate scale `noise`. Codes of
// the held-out generator are drawn from a shifted distribution.
struct SyntheticSpec {
  std::size_t generators = 7;
  std::size_t per_generator = 600;  // half human, half AI
  std::size_t d_h = 64;
  std::size_t code_dim = 8;
  double detection_strength = 0.6;
  double style_strength = 2.0;
  double domain_strength = 0.5;
  double noise = 1.0;
  double held_out_shift = 1.0;  // held-out code = fresh code - shift * mean(train codes)
  std::uint64_t seed = 0;
};

struct SyntheticData {
  Corpus corpus;
  EmbeddingBatch embeddings;
  std::vector<std::string> categories;  // G0 .. G{n-1}; the last one is held out
  std::string held_out;
};

SyntheticData make_synthetic(const SyntheticSpec& spec);

}  // namespace dd
