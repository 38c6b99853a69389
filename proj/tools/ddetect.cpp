// ddetect: command-line front end for training and evaluating the
// disentangled AI-text detector.
//
// Exit codes: 0 success, 2 usage or validation error, 3 numeric failure.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "dd/checkpoint.hpp"
#include "dd/corpus.hpp"
#include "dd/embedder.hpp"
#include "dd/errors.hpp"
#include "dd/eval.hpp"
#include "dd/trainer.hpp"

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitNumeric = 3;

// Run directories are append-only: never write into a non-empty one.
void open_run_dir(const fs::path& out) {
  if (fs::exists(out) && !(fs::is_directory(out) && fs::is_empty(out)))
    throw dd::ValidationError("output directory " + out.string() + " already exists and is not empty");
  fs::create_directories(out);
}

std::uint64_t resolve_seed(std::optional<std::uint64_t> flag, std::optional<std::uint64_t> from_config = {}) {
  if (flag) return *flag;
  if (from_config) return *from_config;
  if (const char* env = std::getenv("DD_SEED")) {
    try {
      return std::stoull(env);
    } catch (const std::exception&) {
      throw dd::ValidationError(std::string("DD_SEED is not an integer: '") + env + "'");
    }
  }
  return 0;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw dd::ValidationError("cannot open " + p.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw dd::ValidationError("cannot write " + p.string());
  out << text;
}

std::optional<dd::EmbeddingCache> maybe_cache(const std::string& path, std::optional<std::size_t> d_h = {}) {
  if (path.empty()) return std::nullopt;
  return dd::EmbeddingCache(dd::load_cache(path, d_h));
}

dd::Corpus restrict_to_test(const dd::Corpus& corpus, const std::string& split_path) {
  if (split_path.empty()) return corpus;
  return corpus.subset(dd::SplitPlan::load(split_path).test_ids);
}

std::vector<int> labels_of(const dd::Corpus& c) {
  std::vector<int> y;
  for (const auto& s : c.samples()) y.push_back(s.y);
  return y;
}

// ---------------------------------------------------------------------------

struct PrepareArgs {
  std::string data, out;
  std::optional<std::size_t> per_category;
  std::optional<std::uint64_t> seed;
};

int run_prepare(const PrepareArgs& a) {
  const auto corpus = dd::load_corpus(a.data);
  const std::uint64_t seed = resolve_seed(a.seed);
  std::size_t per = 0;
  if (a.per_category) {
    per = *a.per_category;
  } else {
    std::map<std::pair<std::string, int>, std::size_t> cells;
    for (const auto& s : corpus.samples()) ++cells[{s.s, s.y}];
    per = std::numeric_limits<std::size_t>::max();
    for (const auto& c : corpus.categories())
      for (int y : {0, 1}) per = std::min(per, cells[{c, y}]);
  }
  const auto balanced = dd::balanced_sample(corpus, per, seed);
  std::vector<dd::SplitPlan> plans;
  for (const auto& cat : balanced.categories()) plans.push_back(dd::make_logo_split(balanced, cat));

  open_run_dir(a.out);
  const fs::path out(a.out);
  dd::write_corpus(balanced, out / "corpus.jsonl");
  for (auto& p : plans) {
    p.seed = seed;
    p.save(out / ("split_" + p.held_out + ".json"));
  }
  ordered_json cfg = {{"command", "prepare"}, {"data", a.data}, {"per_category", per}, {"seed", seed}};
  write_file(out / "config.json", cfg.dump(2) + "\n");
  std::cout << "wrote " << balanced.size() << " samples and " << plans.size() << " splits to " << a.out << "\n";
  return 0;
}

struct TrainArgs {
  std::string config, split, data, out, embeddings;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> epochs, batch_size, k;
  std::optional<double> lr, beta;
};

dd::TrainConfig resolve_config(const TrainArgs& a) {
  dd::TrainConfig cfg;
  std::optional<std::uint64_t> config_seed;
  if (!a.config.empty()) {
    const std::string text = read_file(a.config);
    cfg.merge_json(text);
    if (nlohmann::json::parse(text).contains("seed")) config_seed = cfg.seed;
  }
  cfg.seed = resolve_seed(a.seed, config_seed);
  if (a.epochs) cfg.epochs = *a.epochs;
  if (a.batch_size) cfg.batch_size = *a.batch_size;
  if (a.k) cfg.k_samples = *a.k;
  if (a.lr) cfg.learning_rate = *a.lr;
  if (a.beta) cfg.beta = *a.beta;
  cfg.validate();
  return cfg;
}

int run_train(const TrainArgs& a) {
  const auto cfg = resolve_config(a);
  const auto corpus = dd::load_corpus(a.data);
  const auto split = dd::SplitPlan::load(a.split);
  const auto cache = maybe_cache(a.embeddings, cfg.d_h);
  const auto train_set = corpus.subset(split.train_ids);
  auto embedder = dd::make_embedder(cfg, train_set, cache ? &*cache : nullptr);

  open_run_dir(a.out);
  const auto test_set = corpus.subset(split.test_ids);
  dd::TrainOptions opts;
  opts.out_dir = a.out;
  opts.eval_corpus = &test_set;
  auto result = dd::train(cfg, split, corpus, std::move(embedder), opts);
  std::cout << "trained " << result.log.size() << " steps; checkpoint at " << (fs::path(a.out) / "checkpoint.ddckpt").string()
            << "\n";
  return 0;
}

struct EvalArgs {
  std::string checkpoint, data, split, embeddings, out, perturb;
  double rate = dd::kDefaultPerturbRate;
  std::optional<std::uint64_t> seed;
};

int run_eval(const EvalArgs& a) {
  auto model = dd::load_model(a.checkpoint, maybe_cache(a.embeddings));
  const auto corpus = restrict_to_test(dd::load_corpus(a.data), a.split);
  std::vector<dd::PerturbKind> kinds;
  if (!a.perturb.empty()) {
    std::stringstream ss(a.perturb);
    std::string k;
    while (std::getline(ss, k, ',')) kinds.push_back(dd::parse_perturb_kind(k));
  }
  const std::uint64_t seed = resolve_seed(a.seed);

  const auto report = dd::evaluate(*model, corpus);
  ordered_json robustness;
  if (!kinds.empty()) {
    const auto sweep = dd::robustness_sweep(*model, corpus, kinds, a.rate, seed);
    const auto labels = labels_of(corpus);
    std::vector<std::string> texts;
    for (const auto& s : corpus.samples()) texts.push_back(s.text);
    std::vector<int> clean;
    for (const auto& p : model->predict_texts(texts)) clean.push_back(p.label);
    for (const auto& [name, rep] : sweep) {
      robustness[name] = ordered_json::parse(rep.to_json());
      if (name == "clean") continue;
      std::vector<std::string> perturbed(texts.size());
      for (std::size_t i = 0; i < texts.size(); ++i)
        perturbed[i] = dd::perturb_text(texts[i], dd::parse_perturb_kind(name), a.rate,
                                        dd::Rng::derive_seed(seed, corpus[i].id, 0));
      std::vector<int> attacked;
      for (const auto& p : model->predict_texts(perturbed)) attacked.push_back(p.label);
      robustness[name]["asr"] = dd::attack_success_rate(clean, attacked, labels);
    }
  }

  open_run_dir(a.out);
  const fs::path out(a.out);
  write_file(out / "report.json", report.to_json() + "\n");
  if (!kinds.empty()) write_file(out / "robustness.json", robustness.dump(2) + "\n");
  ordered_json cfg = {{"command", "eval"}, {"checkpoint", a.checkpoint}, {"data", a.data}, {"split", a.split},
                      {"perturb", a.perturb}, {"rate", a.rate}, {"seed", seed}};
  write_file(out / "config.json", cfg.dump(2) + "\n");
  std::cout << "accuracy " << report.accuracy << "  f1 " << report.f1 << "  n " << report.n << "\n";
  return 0;
}

struct PerturbArgs {
  std::string data, out, kind;
  double rate = dd::kDefaultPerturbRate;
  std::optional<std::uint64_t> seed;
};

int run_perturb(const PerturbArgs& a) {
  const auto corpus = dd::load_corpus(a.data);
  const auto kind = dd::parse_perturb_kind(a.kind);
  const std::uint64_t seed = resolve_seed(a.seed);
  std::vector<dd::Sample> out_samples = corpus.samples();
  for (auto& s : out_samples) s.text = dd::perturb_text(s.text, kind, a.rate, dd::Rng::derive_seed(seed, s.id, 0));

  open_run_dir(a.out);
  const fs::path out(a.out);
  dd::write_corpus(dd::Corpus(std::move(out_samples)), out / "perturbed.jsonl");
  ordered_json cfg = {{"command", "perturb"}, {"data", a.data}, {"kind", a.kind}, {"rate", a.rate}, {"seed", seed}};
  write_file(out / "config.json", cfg.dump(2) + "\n");
  return 0;
}

struct LatentArgs {
  std::string checkpoint, data, split, embeddings, out, branch = "a";
};

int run_export(const LatentArgs& a) {
  auto model = dd::load_model(a.checkpoint, maybe_cache(a.embeddings));
  const auto corpus = restrict_to_test(dd::load_corpus(a.data), a.split);
  open_run_dir(a.out);
  const fs::path out(a.out);
  dd::export_embeddings(*model, corpus, a.branch, out / ("embeddings_" + a.branch + ".jsonl"));
  ordered_json cfg = {{"command", "export-embeddings"}, {"checkpoint", a.checkpoint}, {"data", a.data},
                      {"split", a.split}, {"branch", a.branch}, {"seed", model->config().seed}};
  write_file(out / "config.json", cfg.dump(2) + "\n");
  return 0;
}

int run_compactness(const LatentArgs& a) {
  auto model = dd::load_model(a.checkpoint, maybe_cache(a.embeddings));
  const auto corpus = restrict_to_test(dd::load_corpus(a.data), a.split);
  const auto latents = model->latents(model->embed_all(corpus), a.branch);
  const auto report = dd::compactness(latents, labels_of(corpus));
  const auto mean = report.mean();

  ordered_json j;
  j["branch"] = a.branch;
  j["per_class"] = ordered_json::parse(report.to_json());
  j["mean"] = {{"mean_to_center", mean.mean_to_center}, {"cov_trace", mean.cov_trace},
               {"p90_pairwise", mean.p90_pairwise}};
  open_run_dir(a.out);
  const fs::path out(a.out);
  write_file(out / "compactness.json", j.dump(2) + "\n");
  ordered_json cfg = {{"command", "compactness"}, {"checkpoint", a.checkpoint}, {"data", a.data},
                      {"split", a.split}, {"branch", a.branch}, {"seed", model->config().seed}};
  write_file(out / "config.json", cfg.dump(2) + "\n");
  return 0;
}

struct DiversityArgs {
  TrainArgs train;
  std::string held_out;
  std::size_t n = 0;
  std::size_t budget = 12000;
  std::vector<std::string> categories;
};

int run_diversity(DiversityArgs a) {
  const auto corpus = dd::load_corpus(a.train.data);
  if (!corpus.categories().contains(a.held_out))
    throw dd::ValidationError("unknown held-out category '" + a.held_out + "'");
  std::vector<std::string> cats = a.categories;
  if (cats.empty()) {
    std::vector<std::string> avail;
    for (const auto& c : corpus.categories())
      if (c != a.held_out) avail.push_back(c);
    if (a.n == 0 || a.n > avail.size())
      throw dd::ValidationError("--n must lie in [1, " + std::to_string(avail.size()) + "]");
    cats.assign(avail.begin(), avail.begin() + static_cast<std::ptrdiff_t>(a.n));
  } else if (a.n != 0 && a.n != cats.size()) {
    throw dd::ValidationError("--n disagrees with the number of --categories");
  }
  auto cfg = resolve_config(a.train);
  const auto split = dd::make_diversity_split(corpus, cats, a.budget, a.held_out, cfg.seed);
  const auto cache = maybe_cache(a.train.embeddings, cfg.d_h);
  const auto train_set = corpus.subset(split.train_ids);
  const auto test_set = corpus.subset(split.test_ids);

  open_run_dir(a.train.out);
  const fs::path out(a.train.out);
  split.save(out / "split.json");
  dd::TrainOptions opts;
  opts.out_dir = out / "train";
  opts.eval_corpus = &test_set;
  auto result = dd::train(cfg, split, corpus, dd::make_embedder(cfg, train_set, cache ? &*cache : nullptr), opts);
  const auto report = dd::evaluate(result.trainer->model(), test_set);

  ordered_json j;
  j["held_out"] = a.held_out;
  j["n"] = cats.size();
  j["budget"] = a.budget;
  j["train_categories"] = cats;
  j["report"] = ordered_json::parse(report.to_json());
  write_file(out / "report.json", j.dump(2) + "\n");
  std::cout << "held-out " << a.held_out << " n=" << cats.size() << " accuracy " << report.accuracy << " f1 "
            << report.f1 << "\n";
  return 0;
}

void add_train_flags(CLI::App* cmd, TrainArgs& a, bool need_split) {
  cmd->add_option("--config", a.config, "JSON config (flat TrainConfig keys)")->check(CLI::ExistingFile);
  if (need_split) cmd->add_option("--split", a.split, "Split plan JSON")->required();
  cmd->add_option("--data", a.data, "Dataset JSONL")->required();
  cmd->add_option("--out", a.out, "Run directory (must not exist or be empty)")->required();
  cmd->add_option("--embeddings", a.embeddings, "Embedding cache; default is the toy hashed encoder");
  cmd->add_option("--seed", a.seed, "Root seed (fallback: config, then DD_SEED)");
  cmd->add_option("--epochs", a.epochs);
  cmd->add_option("--batch-size", a.batch_size);
  cmd->add_option("--K", a.k, "Monte Carlo samples per latent");
  cmd->add_option("--lr", a.lr);
  cmd->add_option("--beta", a.beta);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Disentangled AI-generated text detection"};
  app.require_subcommand(1);

  PrepareArgs prep;
  auto* c_prep = app.add_subcommand("prepare", "Balance a corpus and write one leave-one-out split per category");
  c_prep->add_option("--data", prep.data, "Dataset JSONL")->required();
  c_prep->add_option("--out", prep.out, "Output directory")->required();
  c_prep->add_option("--per-category", prep.per_category, "Samples per (category, label) cell");
  c_prep->add_option("--seed", prep.seed);

  TrainArgs tr;
  auto* c_train = app.add_subcommand("train", "Train on a split");
  add_train_flags(c_train, tr, true);

  EvalArgs ev;
  auto* c_eval = app.add_subcommand("eval", "Evaluate a checkpoint, optionally under word-level perturbations");
  c_eval->add_option("--checkpoint", ev.checkpoint)->required();
  c_eval->add_option("--data", ev.data)->required();
  c_eval->add_option("--split", ev.split, "Evaluate only the split's test ids");
  c_eval->add_option("--embeddings", ev.embeddings);
  c_eval->add_option("--out", ev.out)->required();
  c_eval->add_option("--perturb", ev.perturb, "Comma-separated kinds: delete,swap,insert,replace");
  c_eval->add_option("--rate", ev.rate)->check(CLI::Range(0.0, 1.0));
  c_eval->add_option("--seed", ev.seed);

  PerturbArgs pa;
  auto* c_pert = app.add_subcommand("perturb", "Write a word-level perturbed copy of a corpus");
  c_pert->add_option("--data", pa.data)->required();
  c_pert->add_option("--kind", pa.kind)->required();
  c_pert->add_option("--rate", pa.rate)->check(CLI::Range(0.0, 1.0));
  c_pert->add_option("--seed", pa.seed);
  c_pert->add_option("--out", pa.out)->required();

  LatentArgs ex;
  auto* c_exp = app.add_subcommand("export-embeddings", "Export h, a or g vectors as JSONL");
  LatentArgs cp;
  auto* c_cmp = app.add_subcommand("compactness", "Intra-class compactness of a latent branch");
  for (auto [cmd, args] : {std::pair{c_exp, &ex}, std::pair{c_cmp, &cp}}) {
    cmd->add_option("--checkpoint", args->checkpoint)->required();
    cmd->add_option("--data", args->data)->required();
    cmd->add_option("--split", args->split, "Use only the split's test ids");
    cmd->add_option("--embeddings", args->embeddings);
    cmd->add_option("--branch", args->branch, "h, a or g")->check(CLI::IsMember({"h", "a", "g"}));
    cmd->add_option("--out", args->out)->required();
  }

  DiversityArgs dv;
  auto* c_div = app.add_subcommand("diversity", "Fixed-budget training on N categories, evaluated on a held-out one");
  add_train_flags(c_div, dv.train, false);
  c_div->add_option("--held-out", dv.held_out)->required();
  c_div->add_option("--n", dv.n, "Number of training categories");
  c_div->add_option("--budget", dv.budget, "Training-set size");
  c_div->add_option("--categories", dv.categories, "Explicit training categories")->delimiter(',');

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (c_prep->parsed()) return run_prepare(prep);
    if (c_train->parsed()) return run_train(tr);
    if (c_eval->parsed()) return run_eval(ev);
    if (c_pert->parsed()) return run_perturb(pa);
    if (c_exp->parsed()) return run_export(ex);
    if (c_cmp->parsed()) return run_compactness(cp);
    if (c_div->parsed()) return run_diversity(dv);
  } catch (const dd::NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const dd::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}
