#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "dd/corpus.hpp"
#include "dd/model.hpp"

namespace dd {

struct Metrics {
  double accuracy = 0.0;
  double f1 = 0.0;  // AI (y = 1) is the positive class
  std::size_t n = 0;
};

struct EvalReport : Metrics {
  std::map<std::string, Metrics> per_generator;

  std::string to_json() const;
};

// F1 is 0 when precision + recall is 0. `generators`, when non-empty, adds the
// per-category breakdown.
EvalReport classification_metrics(std::span<const int> preds, std::span<const int> labels,
                                  std::span<const std::string> generators = {});

// Fraction of clean-correct samples that the attack flips; 0 when nothing was
// correct to begin with.
double attack_success_rate(std::span<const int> clean_preds, std::span<const int> attacked_preds,
                           std::span<const int> labels);

struct ClassCompactness {
  double mean_to_center = 0.0;
  double cov_trace = 0.0;
  double p90_pairwise = 0.0;
};

struct CompactnessReport {
  std::map<int, ClassCompactness> per_class;

  // Unweighted mean over classes.
  ClassCompactness mean() const;
  std::string to_json() const;
};

// Linear-interpolation percentile, q in [0, 1].
double percentile(std::vector<double> values, double q);

CompactnessReport compactness(const Matrix& latents, std::span<const int> class_labels);

EvalReport evaluate(const Model& model, const Corpus& corpus);

// Clean report under "clean" plus one report per perturbation kind.
std::map<std::string, EvalReport> robustness_sweep(const Model& model, const Corpus& corpus,
                                                   std::span<const PerturbKind> kinds, double rate,
                                                   std::uint64_t seed);

// JSONL rows {"id", "y", "s", "vector"}; branch is "h", "a" or "g".
void export_embeddings(const Model& model, const Corpus& corpus, const std::string& branch,
                       const std::filesystem::path& path);

// Held-out accuracy of a multinomial logistic-regression probe trained on
// standardized `features` to predict `labels`. Samples are split 70/30 under
// `seed`. Used to measure how much class information a latent still carries.
double linear_probe_accuracy(const Matrix& features, std::span<const std::size_t> labels, std::uint64_t seed,
                             std::size_t epochs = 300);

}  // namespace dd
