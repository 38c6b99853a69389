#include "dd/trainer.hpp"

#include <fstream>

#include <json.hpp>

#include "dd/errors.hpp"
#include "dd/eval.hpp"

namespace dd {

namespace {

std::vector<Parameter*> concat(std::initializer_list<std::vector<Parameter*>> parts) {
  std::vector<Parameter*> out;
  for (const auto& p : parts) out.insert(out.end(), p.begin(), p.end());
  return out;
}

}  // namespace

Trainer::Trainer(const TrainConfig& config, Embedder embedder, const std::vector<std::string>& train_categories)
    : model_(std::make_unique<Model>(config, std::move(embedder), generator_classes_for(train_categories))) {
  Model& m = *model_;
  stage1_params_ = concat({m.group("embedder"), m.group("E_a"), m.group("D_a")});
  if (config.dual_branch) stage1_params_ = concat({stage1_params_, m.group("E_g"), m.group("D_g")});
  if (config.variational && config.prior_trainable) {
    stage1_params_ = concat({stage1_params_, m.group("prior_a")});
    if (config.dual_branch) stage1_params_ = concat({stage1_params_, m.group("prior_g")});
  }
  stage2_params_ = concat({m.group("E_a"), m.group("E_g")});
  const Adam::Options opts{config.learning_rate, 0.9, 0.999, 1e-8};
  stage1_opt_ = Adam(stage1_params_, opts);
  stage2_opt_ = Adam(stage2_params_, opts);
}

void Trainer::check_corpus(const Corpus& corpus) const {
  for (const auto& s : corpus.samples()) {
    try {
      model_->generator_index(s);
    } catch (const ValidationError& e) {
      throw ConfigError(e.what());
    }
  }
}

LossBundle Trainer::stage1_step(const Corpus& corpus, const Batch& batch) {
  model_->zero_grad();
  LossBundle b = model_->stage1(corpus, batch.indices, step_, true);
  stage1_opt_.step();
  b.epoch = epoch_;
  stage1_done_ = true;
  return b;
}

double Trainer::stage2_step(const Corpus& corpus, const Batch& batch) {
  if (!stage1_done_) throw StateError("stage II must follow stage I on the same batch");
  model_->zero_grad();
  const double loss = model_->stage2(corpus, batch.indices, true);
  stage2_opt_.step();
  stage1_done_ = false;
  return loss;
}

LossBundle Trainer::train_step(const Corpus& corpus, const Batch& batch) {
  LossBundle b = stage1_step(corpus, batch);
  if (model_->config().adaptation) b.l_adapt = stage2_step(corpus, batch);
  stage1_done_ = false;
  ++step_;
  return b;
}

CheckpointData Trainer::checkpoint() {
  CheckpointData data = snapshot(*model_, step_, epoch_);
  auto put = [&](const std::string& prefix, const Adam& opt, const std::vector<Parameter*>& params) {
    for (std::size_t i = 0; i < params.size(); ++i) {
      data.tensors.emplace(prefix + ".m/" + params[i]->name, opt.first_moments()[i]);
      data.tensors.emplace(prefix + ".v/" + params[i]->name, opt.second_moments()[i]);
    }
    data.counters[prefix + ".t"] = opt.steps();
  };
  put("opt1", stage1_opt_, stage1_params_);
  put("opt2", stage2_opt_, stage2_params_);
  return data;
}

void Trainer::save_checkpoint(const std::filesystem::path& path) { write_checkpoint(checkpoint(), path); }

void Trainer::restore(const CheckpointData& data) {
  for (auto* p : model_->all_parameters()) {
    auto it = data.tensors.find(p->name);
    if (it == data.tensors.end() || !it->second.same_shape(p->value))
      throw FormatError("checkpoint: missing or mis-shaped tensor '" + p->name + "'");
    p->value = it->second;
  }
  auto get = [&](const std::string& prefix, Adam& opt, const std::vector<Parameter*>& params) {
    for (std::size_t i = 0; i < params.size(); ++i) {
      auto m = data.tensors.find(prefix + ".m/" + params[i]->name);
      auto v = data.tensors.find(prefix + ".v/" + params[i]->name);
      if (m == data.tensors.end() || v == data.tensors.end())
        throw FormatError("checkpoint: missing optimizer state for '" + params[i]->name + "'");
      opt.first_moments()[i] = m->second;
      opt.second_moments()[i] = v->second;
    }
    auto t = data.counters.find(prefix + ".t");
    opt.set_steps(t == data.counters.end() ? 0 : t->second);
  };
  get("opt1", stage1_opt_, stage1_params_);
  get("opt2", stage2_opt_, stage2_params_);
  step_ = data.step;
  epoch_ = data.epoch;
}

Embedder make_embedder(const TrainConfig& config, const Corpus& corpus, const EmbeddingCache* cache) {
  if (cache) return Embedder(*cache);
  return Embedder(toy_fit(corpus, config.d_h, config.seed));
}

TrainResult train(const TrainConfig& config, const SplitPlan& split, const Corpus& corpus, Embedder embedder,
                  const TrainOptions& options) {
  config.validate();
  const Corpus train_set = corpus.subset(split.train_ids);
  if (train_set.empty()) throw ConfigError("split has an empty training set");
  for (const auto& s : train_set.samples())
    if (s.s == split.held_out)
      throw ConfigError("training set contains held-out category sample '" + s.id + "'");

  TrainResult result;
  result.trainer = std::make_unique<Trainer>(config, std::move(embedder), split.train_categories);
  Trainer& trainer = *result.trainer;
  trainer.check_corpus(train_set);

  std::ofstream metrics;
  if (!options.out_dir.empty()) {
    std::filesystem::create_directories(options.out_dir);
    std::ofstream(options.out_dir / "config.json", std::ios::binary) << config.to_json();
    metrics.open(options.out_dir / "metrics.jsonl", std::ios::binary);
  }

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    trainer.set_epoch(epoch);
    for (const auto& batch : batch_iter(train_set, config.batch_size, config.seed, epoch, config.cross_view)) {
      LossBundle b = trainer.train_step(train_set, batch);
      if (metrics.is_open()) metrics << b.to_json() << '\n';
      if (options.on_step) options.on_step(b);
      result.log.push_back(b);
    }

    nlohmann::ordered_json rec;
    rec["type"] = "epoch";
    rec["epoch"] = epoch;
    rec["step"] = trainer.step();
    if (options.eval_corpus && !options.eval_corpus->empty()) {
      const auto report = evaluate(trainer.model(), *options.eval_corpus);
      rec["eval_accuracy"] = report.accuracy;
      rec["eval_f1"] = report.f1;
      rec["eval_n"] = report.n;
    }
    result.epoch_records.push_back(rec.dump());
    if (metrics.is_open()) {
      metrics << rec.dump() << '\n';
      trainer.save_checkpoint(options.out_dir / ("checkpoint_epoch" + std::to_string(epoch + 1) + ".ddckpt"));
    }
  }
  trainer.set_epoch(config.epochs);
  if (!options.out_dir.empty()) trainer.save_checkpoint(options.out_dir / "checkpoint.ddckpt");
  return result;
}

}  // namespace dd
