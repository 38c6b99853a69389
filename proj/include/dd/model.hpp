#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "dd/bottleneck.hpp"
#include "dd/corpus.hpp"
#include "dd/crossview.hpp"
#include "dd/embedder.hpp"
#include "dd/heads.hpp"

namespace dd {

struct TrainConfig {
  double learning_rate = 2e-5;
  std::size_t batch_size = 16;
  std::size_t k_samples = 5;
  double beta = 5e-6;
  std::size_t epochs = 5;
  std::size_t d_h = kDefaultEmbeddingDim;
  std::size_t d_e = 128;
  std::size_t d_z = 32;
  std::size_t head_hidden = kDefaultHeadHidden;
  std::uint64_t seed = 0;
  double gamma_low = kGammaLow;
  double gamma_high = kGammaHigh;
  double dropout = kDefaultDropout;
  double sigma_floor = kDefaultSigmaFloor;
  double eps = kDefaultStatEps;
  double lambda_grl = 1.0;
  bool prior_trainable = true;

  // Component switches. All on is the full method; the ablations turn them
  // off from the right.
  bool dual_branch = true;   // generator branch + D_g
  bool variational = true;   // Gaussian posteriors, K samples, KL to prior
  bool cross_view = true;    // statistic-transfer mixing + AI-only augmentation
  bool adaptation = true;    // stage II

  void validate() const;
  std::string to_json() const;
  // Flat JSON object; missing keys keep their defaults, unknown keys are an error.
  static TrainConfig from_json(std::string_view text);
  void merge_json(std::string_view text);

  static TrainConfig baseline();
  static TrainConfig with_db();
  static TrainConfig with_db_crossview();
  static TrainConfig full();
};

struct LossBundle {
  double l_db = 0.0;
  double l_reg = 0.0;
  double l_stage1 = 0.0;
  double l_adapt = 0.0;
  std::uint64_t step = 0;
  std::uint64_t epoch = 0;

  std::string to_json() const;
};

// Relative weights of the two stage-I terms in the gradient.
struct Stage1Weights {
  double db = 1.0;
  double reg = 1.0;
};

// Relative weights of the four stage-II terms.
struct AdaptTerms {
  double a_own = 1.0;      // D_a(a), true label
  double g_into_da = 1.0;  // D_a(GRL(g)), true label
  double g_own = 1.0;      // D_g(g), true generator class
  double a_into_dg = 1.0;  // D_g(GRL(a)), true generator class
};

struct Prediction {
  int label = 0;
  double p_ai = 0.5;
};

inline const char* const kParameterGroups[] = {"embedder", "E_a", "E_g", "prior_a", "prior_g", "D_a", "D_g"};

class Model {
 public:
  // generator_classes: the generator-head label space, HUMAN included.
  Model(const TrainConfig& config, Embedder embedder, std::vector<std::string> generator_classes);

  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;

  const TrainConfig& config() const { return config_; }
  TrainConfig& mutable_config() { return config_; }
  const std::vector<std::string>& generator_classes() const { return generator_classes_; }
  std::size_t generator_index(const Sample& sample) const;

  std::map<std::string, std::vector<Parameter*>> groups();
  std::vector<Parameter*> group(const std::string& name);
  std::vector<Parameter*> all_parameters();
  std::uint64_t group_hash(const std::string& name);
  void zero_grad();

  // Forward + backward for stage I on the given corpus rows. Gradients are
  // added to the parameters' grad buffers (weighted by `weights`) when
  // `accumulate` is set; randomness is keyed by `step`. The returned bundle
  // always reports the unweighted terms with l_stage1 = beta*l_db + l_reg.
  LossBundle stage1(const Corpus& corpus, std::span<const std::size_t> rows, std::uint64_t step,
                    bool accumulate, Stage1Weights weights);
  LossBundle stage1(const Corpus& corpus, std::span<const std::size_t> rows, std::uint64_t step,
                    bool accumulate = true);

  // Stage II loss on clean posterior means with frozen discriminators. Only
  // E_a and E_g receive gradients.
  double stage2(const Corpus& corpus, std::span<const std::size_t> rows, bool accumulate,
                AdaptTerms terms = {});

  std::vector<Prediction> predict(const Matrix& h) const;
  std::vector<Prediction> predict(const Corpus& corpus) const;
  std::vector<Prediction> predict_texts(std::span<const std::string> texts) const;

  // Posterior means (a or g) or the raw embedding for export and diagnostics.
  Matrix latents(const Matrix& h, const std::string& branch) const;
  Matrix embed_all(const Corpus& corpus) const;

  Embedder embedder;
  BranchEncoder enc_a;
  BranchEncoder enc_g;
  LearnablePrior prior_a;
  LearnablePrior prior_g;
  Discriminator d_a;
  Discriminator d_g;

 private:
  void check_dim(const Matrix& h) const;

  TrainConfig config_;
  std::vector<std::string> generator_classes_;
  std::map<std::string, std::size_t> generator_lookup_;
};

// Train categories in order followed by the HUMAN pseudo-class.
std::vector<std::string> generator_classes_for(const std::vector<std::string>& train_categories);

}  // namespace dd
