#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "dd/checkpoint.hpp"
#include "dd/corpus.hpp"
#include "dd/model.hpp"

namespace dd {

// Owns the model and one Adam instance per stage: stage I updates every
// trainable group, stage II only E_a and E_g.
class Trainer {
 public:
  Trainer(const TrainConfig& config, Embedder embedder, const std::vector<std::string>& train_categories);

  Model& model() { return *model_; }
  const Model& model() const { return *model_; }

  LossBundle stage1_step(const Corpus& corpus, const Batch& batch);
  // Must follow stage1_step on the same batch; returns L_adapt.
  double stage2_step(const Corpus& corpus, const Batch& batch);
  // stage1_step then (when adaptation is on) stage2_step, advancing the step counter.
  LossBundle train_step(const Corpus& corpus, const Batch& batch);

  std::uint64_t step() const { return step_; }
  std::uint64_t epoch() const { return epoch_; }
  void set_epoch(std::uint64_t e) { epoch_ = e; }

  CheckpointData checkpoint();
  void save_checkpoint(const std::filesystem::path& path);
  // Restores parameters, optimizer moments and counters.
  void restore(const CheckpointData& data);

  // Throws ConfigError if any sample is outside the generator head's classes.
  void check_corpus(const Corpus& corpus) const;

 private:
  std::unique_ptr<Model> model_;
  std::vector<Parameter*> stage1_params_;
  std::vector<Parameter*> stage2_params_;
  Adam stage1_opt_;
  Adam stage2_opt_;
  std::uint64_t step_ = 0;
  std::uint64_t epoch_ = 0;
  bool stage1_done_ = false;
};

struct TrainOptions {
  std::filesystem::path out_dir;       // empty: keep everything in memory
  const Corpus* eval_corpus = nullptr;  // evaluated at every epoch end
  std::function<void(const LossBundle&)> on_step;
};

struct TrainResult {
  std::unique_ptr<Trainer> trainer;
  std::vector<LossBundle> log;
  std::vector<std::string> epoch_records;  // JSON lines
};

// Trains on the split's training ids for config.epochs epochs. When an
// out_dir is given, writes config.json, metrics.jsonl, checkpoint.ddckpt and
// checkpoint_epoch<N>.ddckpt there.
TrainResult train(const TrainConfig& config, const SplitPlan& split, const Corpus& corpus, Embedder embedder,
                  const TrainOptions& options = {});

// Embedder for a corpus: the cache when one is given, the toy encoder otherwise.
Embedder make_embedder(const TrainConfig& config, const Corpus& corpus, const EmbeddingCache* cache);

}  // namespace dd
