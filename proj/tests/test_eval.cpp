#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>
#include <json.hpp>

#include "dd/errors.hpp"
#include "dd/eval.hpp"
#include "dd/rng.hpp"
#include "dd/trainer.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace dd;
namespace fs = std::filesystem;

namespace {

std::vector<int> labels_of(const Corpus& c) {
  std::vector<int> y;
  for (const auto& s : c.samples()) y.push_back(s.y);
  return y;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::unique_ptr<Trainer> tiny_model(const Corpus& train_set, const std::vector<std::string>& cats) {
  TrainConfig c;
  c.d_h = 16;
  c.d_e = 8;
  c.d_z = 4;
  c.head_hidden = 8;
  c.k_samples = 1;
  c.learning_rate = 1e-2;
  auto t = std::make_unique<Trainer>(c, Embedder(toy_fit(train_set, c.d_h, 0)), cats);
  for (const auto& b : batch_iter(train_set, 8, 0)) t->train_step(train_set, b);
  return t;
}

}  // namespace

TEST(Metrics, HandCase) {
  // TP=3, FP=1, FN=1, TN=5
  const std::vector<int> pred{1, 1, 1, 1, 0, 0, 0, 0, 0, 0};
  const std::vector<int> lab{1, 1, 1, 0, 1, 0, 0, 0, 0, 0};
  const auto r = classification_metrics(pred, lab);
  EXPECT_DOUBLE_EQ(r.accuracy, 0.8);
  EXPECT_DOUBLE_EQ(r.f1, 0.75);
  EXPECT_EQ(r.n, 10u);
}

TEST(Metrics, DegenerateConventions) {
  const std::vector<int> ones{1, 1, 0}, zeros{0, 0, 0};
  EXPECT_EQ(classification_metrics(ones, ones).f1, 1.0);
  const auto r = classification_metrics(zeros, zeros);
  EXPECT_EQ(r.accuracy, 1.0);
  EXPECT_EQ(r.f1, 0.0);
  const std::vector<int> short_pred{1};
  EXPECT_THROW(classification_metrics(short_pred, zeros), ValidationError);
}

TEST(Metrics, MatchesBruteForceConfusion) {
  Rng rng(1);
  for (int t = 0; t < 1000; ++t) {
    const std::size_t n = 1 + rng.index(60);
    std::vector<int> p(n), y(n);
    const double bias = rng.uniform();
    for (std::size_t i = 0; i < n; ++i) {
      p[i] = rng.bernoulli(bias);
      y[i] = rng.bernoulli(0.5);
    }
    const auto c = ddtest::brute_confusion(p, y);
    const auto r = classification_metrics(p, y);
    EXPECT_EQ(r.accuracy, ddtest::brute_accuracy(c));
    EXPECT_EQ(r.f1, ddtest::brute_f1(c));
  }
}

TEST(Metrics, PerGeneratorBreakdown) {
  const std::vector<int> p{1, 0, 1, 1}, y{1, 0, 0, 1};
  const std::vector<std::string> g{"a", "a", "b", "b"};
  const auto r = classification_metrics(p, y, g);
  ASSERT_EQ(r.per_generator.size(), 2u);
  EXPECT_EQ(r.per_generator.at("a").accuracy, 1.0);
  EXPECT_EQ(r.per_generator.at("b").accuracy, 0.5);
  EXPECT_EQ(r.per_generator.at("b").n, 2u);
  const auto j = nlohmann::json::parse(r.to_json());
  EXPECT_EQ(j["per_generator"]["a"]["n"], 2);
}

TEST(Asr, HandCases) {
  std::vector<int> labels(12, 1), clean(12, 1), attacked(12, 1);
  clean[10] = clean[11] = 0;  // 10 clean-correct
  EXPECT_EQ(attack_success_rate(clean, clean, labels), 0.0);
  for (int i = 0; i < 4; ++i) attacked[i] = 0;
  EXPECT_EQ(attack_success_rate(clean, attacked, labels), 0.4);
  std::vector<int> all_flipped(12, 0);
  EXPECT_EQ(attack_success_rate(clean, all_flipped, labels), 1.0);
  std::vector<int> wrong(12, 0);
  EXPECT_EQ(attack_success_rate(wrong, wrong, labels), 0.0);
}

TEST(Asr, BoundedAndMonotone) {
  Rng rng(2);
  for (int t = 0; t < 100; ++t) {
    const std::size_t n = 5 + rng.index(40);
    std::vector<int> y(n), clean(n);
    for (std::size_t i = 0; i < n; ++i) {
      y[i] = rng.bernoulli(0.5);
      clean[i] = rng.bernoulli(0.7) ? y[i] : 1 - y[i];
    }
    auto attacked = clean;
    double prev = attack_success_rate(clean, attacked, y);
    EXPECT_EQ(prev, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      if (clean[i] != y[i]) continue;
      attacked[i] = 1 - attacked[i];
      const double now = attack_success_rate(clean, attacked, y);
      EXPECT_GE(now, prev);
      EXPECT_LE(now, 1.0);
      prev = now;
    }
  }
}

TEST(Compactness, HandCases) {
  const Matrix same = Matrix::from_rows({{2, 3}, {2, 3}, {2, 3}});
  const std::vector<int> one_class{0, 0, 0};
  const auto z = compactness(same, one_class).per_class.at(0);
  EXPECT_EQ(z.mean_to_center, 0.0);
  EXPECT_EQ(z.cov_trace, 0.0);
  EXPECT_EQ(z.p90_pairwise, 0.0);

  const Matrix two = Matrix::from_rows({{0, 0, 0}, {3, 4, 0}});
  const std::vector<int> two_labels{1, 1};
  const auto d = compactness(two, two_labels).per_class.at(1);
  EXPECT_NEAR(d.mean_to_center, 2.5, 1e-9);
  EXPECT_NEAR(d.p90_pairwise, 5.0, 1e-9);

  const Matrix line = Matrix::from_rows({{-1}, {1}});
  EXPECT_NEAR(compactness(line, two_labels).per_class.at(1).cov_trace, 1.0, 1e-9);

  const Matrix single = Matrix::from_rows({{1}, {2}, {3}});
  const std::vector<int> lonely{0, 0, 1};
  EXPECT_THROW(compactness(single, lonely), ValidationError);
}

TEST(Compactness, TranslationInvariantAndScaling) {
  Rng rng(3);
  Matrix x(40, 5);
  for (auto& v : x.data) v = rng.normal();
  std::vector<int> cls(40);
  for (std::size_t i = 0; i < 40; ++i) cls[i] = static_cast<int>(i % 3);
  const auto base = compactness(x, cls);
  Matrix moved = x, scaled = x;
  for (std::size_t i = 0; i < x.rows; ++i)
    for (std::size_t k = 0; k < 5; ++k) {
      moved(i, k) += 10.0 + static_cast<double>(k);
      scaled(i, k) *= -2.5;
    }
  const auto m = compactness(moved, cls), s = compactness(scaled, cls);
  for (const auto& [c, v] : base.per_class) {
    EXPECT_NEAR(m.per_class.at(c).mean_to_center, v.mean_to_center, 1e-9);
    EXPECT_NEAR(m.per_class.at(c).cov_trace, v.cov_trace, 1e-9);
    EXPECT_NEAR(m.per_class.at(c).p90_pairwise, v.p90_pairwise, 1e-9);
    EXPECT_NEAR(s.per_class.at(c).mean_to_center, 2.5 * v.mean_to_center, 1e-9);
    EXPECT_NEAR(s.per_class.at(c).cov_trace, 6.25 * v.cov_trace, 1e-9);
    EXPECT_NEAR(s.per_class.at(c).p90_pairwise, 2.5 * v.p90_pairwise, 1e-9);
  }
  const auto mean = base.mean();
  double mtc = 0.0;
  for (const auto& [c, v] : base.per_class) mtc += v.mean_to_center / 3.0;
  EXPECT_NEAR(mean.mean_to_center, mtc, 1e-12);
}

TEST(Percentile, LinearInterpolation) {
  EXPECT_DOUBLE_EQ(percentile({5}, 0.9), 5.0);
  EXPECT_DOUBLE_EQ(percentile({4, 1, 3, 2}, 0.0), 1.0);
  EXPECT_DOUBLE_EQ(percentile({4, 1, 3, 2}, 1.0), 4.0);
  // rank = 0.9 * 3 = 2.7 between 3 and 4
  EXPECT_NEAR(percentile({4, 1, 3, 2}, 0.9), 3.7, 1e-12);
  EXPECT_THROW(percentile({}, 0.5), ValidationError);
}

TEST(LinearProbe, SeparatesSeparableAndNotNoise) {
  Rng rng(4);
  Matrix x(300, 4);
  std::vector<std::size_t> cls(300), noise(300);
  for (std::size_t i = 0; i < 300; ++i) {
    cls[i] = i % 3;
    noise[i] = rng.index(3);
    for (std::size_t k = 0; k < 4; ++k) x(i, k) = rng.normal() + (k == cls[i] ? 4.0 : 0.0);
  }
  EXPECT_GT(linear_probe_accuracy(x, cls, 0), 0.95);
  EXPECT_LT(linear_probe_accuracy(x, noise, 0), 0.6);
  EXPECT_EQ(linear_probe_accuracy(x, cls, 1), linear_probe_accuracy(x, cls, 1));
}

TEST(Robustness, SweepShapeIdentityAndDeterminism) {
  const auto corpus = ddtest::make_corpus({"a", "b"}, 8, 8);
  const auto split = make_logo_split(corpus, "b");
  const auto train_set = corpus.subset(split.train_ids);
  auto t = tiny_model(train_set, split.train_categories);
  const std::vector<PerturbKind> kinds{PerturbKind::Delete, PerturbKind::Swap, PerturbKind::Insert,
                                       PerturbKind::Replace};
  const auto zero = robustness_sweep(t->model(), corpus, kinds, 0.0, 5);
  ASSERT_EQ(zero.size(), 5u);
  for (const auto& [k, r] : zero) EXPECT_EQ(r.to_json(), zero.at("clean").to_json()) << k;
  const auto a = robustness_sweep(t->model(), corpus, kinds, 0.3, 5);
  const auto b = robustness_sweep(t->model(), corpus, kinds, 0.3, 5);
  for (const auto& [k, r] : a) EXPECT_EQ(r.to_json(), b.at(k).to_json());
  EXPECT_EQ(a.at("clean").to_json(), evaluate(t->model(), corpus).to_json());
}

TEST(Export, RowsShapesAndDeterminism) {
  const auto corpus = ddtest::make_corpus({"a", "b"}, 5, 5);
  const auto split = make_logo_split(corpus, "b");
  auto t = tiny_model(corpus.subset(split.train_ids), split.train_categories);
  const auto dir = fs::temp_directory_path();
  for (const auto& [branch, dim] : std::vector<std::pair<std::string, std::size_t>>{{"a", 4}, {"g", 4}, {"h", 16}}) {
    const auto p1 = dir / ("dd_export_" + branch + "_1.jsonl"), p2 = dir / ("dd_export_" + branch + "_2.jsonl");
    export_embeddings(t->model(), corpus, branch, p1);
    export_embeddings(t->model(), corpus, branch, p2);
    EXPECT_EQ(slurp(p1), slurp(p2));
    std::ifstream in(p1);
    std::size_t rows = 0;
    for (std::string line; std::getline(in, line); ++rows) {
      const auto j = nlohmann::json::parse(line);
      EXPECT_EQ(j["vector"].size(), dim);
      EXPECT_EQ(j["id"], corpus[rows].id);
      EXPECT_EQ(j["y"], corpus[rows].y);
      EXPECT_EQ(j["s"], corpus[rows].s);
    }
    EXPECT_EQ(rows, corpus.size());
    fs::remove(p1);
    fs::remove(p2);
  }
  EXPECT_THROW(export_embeddings(t->model(), corpus, "z", dir / "dd_export_bad.jsonl"), ValidationError);
}

TEST(Evaluate, MatchesPredictions) {
  const auto corpus = ddtest::make_corpus({"a", "b"}, 6, 6);
  const auto split = make_logo_split(corpus, "b");
  auto t = tiny_model(corpus.subset(split.train_ids), split.train_categories);
  std::vector<int> preds;
  for (const auto& p : t->model().predict(corpus)) preds.push_back(p.label);
  const auto c = ddtest::brute_confusion(preds, labels_of(corpus));
  const auto r = evaluate(t->model(), corpus);
  EXPECT_EQ(r.accuracy, ddtest::brute_accuracy(c));
  EXPECT_EQ(r.per_generator.size(), 2u);
}
