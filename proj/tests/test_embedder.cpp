#include <cmath>
#include <filesystem>
#include <fstream>

#include <gtest/gtest.h>

#include "dd/embedder.hpp"
#include "dd/errors.hpp"
#include "dd/rng.hpp"
#include "fixtures.hpp"

using namespace dd;
namespace fs = std::filesystem;

namespace {

fs::path temp_file(const std::string& name) { return fs::temp_directory_path() / ("dd_embedder_" + name); }

EmbeddingBatch random_batch(std::size_t n, std::size_t d, std::uint64_t seed) {
  Rng rng(seed);
  Matrix m(n, d);
  for (auto& x : m.data) x = static_cast<float>(rng.normal());
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < n; ++i) ids.push_back("id-" + std::to_string(i) + (i % 3 ? "" : "-ünï"));
  return EmbeddingBatch::from_matrix(ids, m);
}

}  // namespace

TEST(HashedEncoder, BucketCountsBeforeNormalization) {
  std::size_t d = 1024;
  ASSERT_NE(HashedEncoder::bucket("a", d), HashedEncoder::bucket("b", d));
  HashedEncoder enc(d);
  const std::vector<std::string> texts{"a a b"};
  const Matrix f = enc.hashed_features(texts);
  const double fa = f(0, HashedEncoder::bucket("a", d));
  const double fb = f(0, HashedEncoder::bucket("b", d));
  EXPECT_NEAR(fa / fb, 2.0, 1e-12);
  std::size_t nonzero = 0;
  double norm = 0.0;
  for (double x : f.data) {
    nonzero += x != 0.0;
    norm += x * x;
  }
  EXPECT_EQ(nonzero, 2u);
  EXPECT_NEAR(norm, 1.0, 1e-12);
  EXPECT_EQ(HashedEncoder::bucket("Word", d), HashedEncoder::bucket("word", d));
}

TEST(HashedEncoder, EmptyTextAndShape) {
  const auto corpus = ddtest::make_corpus({"a"}, 3, 3);
  Embedder emb(toy_fit(corpus, 64, 1));
  const std::vector<std::string> texts{"", "some words here", "some words here", "Zebra!"};
  const auto out = emb.encode(texts);
  ASSERT_EQ(out.count(), 4u);
  ASSERT_EQ(out.d_h, 64u);
  for (float x : out.row(0)) EXPECT_EQ(x, 0.0f);
  for (std::size_t k = 0; k < 64; ++k) EXPECT_EQ(out.row(1)[k], out.row(2)[k]);
  for (float x : out.vectors) EXPECT_TRUE(std::isfinite(x));
}

TEST(HashedEncoder, FitIsDeterministic) {
  const auto corpus = ddtest::make_corpus({"a", "b"}, 4, 4);
  auto a = toy_fit(corpus, 32, 5), b = toy_fit(corpus, 32, 5), c = toy_fit(corpus, 32, 6);
  EXPECT_EQ(a.layer.weight.value.data, b.layer.weight.value.data);
  EXPECT_NE(a.layer.weight.value.data, c.layer.weight.value.data);
  EXPECT_THROW(toy_fit(corpus, 4, 0), ConfigError);
}

TEST(Embedder, UninitializedAndCacheRestrictions) {
  Embedder none;
  const std::vector<std::string> texts{"x"};
  EXPECT_FALSE(none.initialized());
  EXPECT_THROW(none.embed_texts(texts), StateError);
  Embedder cached{EmbeddingCache(random_batch(2, 4, 1))};
  EXPECT_FALSE(cached.trainable());
  EXPECT_TRUE(cached.parameters().empty());
  EXPECT_THROW(cached.encode(texts), StateError);
}

TEST(Cache, RoundTripIsExact) {
  const auto batch = random_batch(17, 12, 3);
  const auto path = temp_file("roundtrip.bin");
  save_cache(batch, path);
  const auto back = load_cache(path);
  EXPECT_EQ(back.ids, batch.ids);
  EXPECT_EQ(back.d_h, 12u);
  EXPECT_EQ(back.vectors, batch.vectors);
  EXPECT_EQ(load_cache(path, 12).vectors, batch.vectors);
  EXPECT_THROW(load_cache(path, 768), FormatError);
  fs::remove(path);
}

TEST(Cache, CorruptionIsAFormatError) {
  const auto batch = random_batch(5, 8, 4);
  const auto path = temp_file("corrupt.bin");
  save_cache(batch, path);
  const auto size = fs::file_size(path);
  fs::resize_file(path, size - 3);
  EXPECT_THROW(load_cache(path), FormatError);

  save_cache(batch, path);
  std::ofstream(path, std::ios::app | std::ios::binary) << "junk";
  EXPECT_THROW(load_cache(path), FormatError);

  std::ofstream(path, std::ios::binary) << "NOTACACHE 8 5\n";
  EXPECT_THROW(load_cache(path), FormatError);
  EXPECT_THROW(load_cache(temp_file("missing.bin")), FormatError);
  fs::remove(path);
}

TEST(Cache, LookupByIdAndEmbedding) {
  const auto batch = random_batch(4, 3, 8);
  EmbeddingCache cache(batch);
  EXPECT_EQ(cache.dim(), 3u);
  EXPECT_TRUE(cache.contains("id-1"));
  EXPECT_DOUBLE_EQ(cache.lookup("id-1")[2], static_cast<double>(batch.row(1)[2]));
  EXPECT_THROW(cache.lookup("nope"), ValidationError);
}

TEST(HashedEncoder, BackwardMatchesFiniteDifferences) {
  const auto corpus = ddtest::make_corpus({"a"}, 2, 2);
  HashedEncoder enc = toy_fit(corpus, 16, 2);
  std::vector<std::string> texts{"alpha beta", "gamma gamma delta"};
  const Matrix f = enc.hashed_features(texts);
  Matrix w(2, 16);
  Rng rng(1);
  for (auto& x : w.data) x = rng.normal();
  auto loss = [&] {
    const Matrix h = enc.forward(f);
    double l = 0.0;
    for (std::size_t i = 0; i < h.size(); ++i) l += w.data[i] * h.data[i];
    return l;
  };
  for (auto* p : enc.layer.parameters()) p->zero_grad();
  enc.backward(f, enc.forward(f), w);
  for (std::size_t i = 0; i < enc.layer.weight.value.size(); i += 7) {
    double& x = enc.layer.weight.value.data[i];
    const double saved = x;
    x = saved + 1e-6;
    const double up = loss();
    x = saved - 1e-6;
    const double down = loss();
    x = saved;
    const double fd = (up - down) / 2e-6;
    EXPECT_NEAR(enc.layer.weight.grad.data[i], fd, 1e-6 * std::max(1.0, std::abs(fd)));
  }
}
