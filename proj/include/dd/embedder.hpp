#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "dd/corpus.hpp"
#include "dd/layers.hpp"
#include "dd/tensor.hpp"

namespace dd {

inline constexpr std::size_t kDefaultEmbeddingDim = 64;

struct EmbeddingBatch {
  std::vector<std::string> ids;
  std::size_t d_h = 0;
  std::vector<float> vectors;  // row-major, ids.size() x d_h

  std::size_t count() const { return ids.size(); }
  std::span<const float> row(std::size_t i) const { return {vectors.data() + i * d_h, d_h}; }
  Matrix to_matrix() const;
  static EmbeddingBatch from_matrix(std::vector<std::string> ids, const Matrix& m);
};

// "DDEMB1 <d_h> <count>\n" then per record: u32 id length, id bytes,
// d_h little-endian float32 values.
void save_cache(const EmbeddingBatch& batch, const std::filesystem::path& path);
// Throws FormatError on a bad header, truncation, or when expected_d_h is
// given and differs from the file.
EmbeddingBatch load_cache(const std::filesystem::path& path, std::optional<std::size_t> expected_d_h = {});

// Desk-scale text encoder: lowercase whitespace tokens hashed into d_h
// buckets, counts L2-normalized, then one trainable tanh layer.
class HashedEncoder {
 public:
  HashedEncoder() = default;
  explicit HashedEncoder(std::size_t d_h);

  std::size_t dim() const { return layer.out(); }

  static std::size_t bucket(std::string_view token, std::size_t d_h);
  // Normalized bucket counts, one row per text.
  Matrix hashed_features(std::span<const std::string> texts) const;
  Matrix forward(const Matrix& features) const;
  void backward(const Matrix& features, const Matrix& h, const Matrix& dh);

  Dense layer;
};

HashedEncoder toy_fit(const Corpus& corpus, std::size_t d_h, std::uint64_t seed);

// Precomputed embeddings looked up by sample id. Frozen by construction.
class EmbeddingCache {
 public:
  EmbeddingCache() = default;
  explicit EmbeddingCache(const EmbeddingBatch& batch);

  std::size_t dim() const { return table_.cols; }
  bool contains(const std::string& id) const { return rows_.contains(id); }
  std::span<const double> lookup(const std::string& id) const;

 private:
  Matrix table_;
  std::map<std::string, std::size_t> rows_;
};

// Front end the trainer talks to: either backend, or nothing yet.
class Embedder {
 public:
  struct Forward {
    Matrix features;  // hashed counts for the toy backend, empty for the cache
    Matrix h;
  };

  Embedder() = default;
  explicit Embedder(HashedEncoder enc) : backend_(std::move(enc)) {}
  explicit Embedder(EmbeddingCache cache) : backend_(std::move(cache)) {}

  bool initialized() const { return !std::holds_alternative<std::monostate>(backend_); }
  bool trainable() const { return std::holds_alternative<HashedEncoder>(backend_); }
  bool uses_cache() const { return std::holds_alternative<EmbeddingCache>(backend_); }
  std::size_t dim() const;

  // Embeds the given samples (text for the toy backend, id for the cache).
  Forward embed(std::span<const Sample* const> samples) const;
  Forward embed(const Corpus& corpus, std::span<const std::size_t> indices) const;
  Forward embed_texts(std::span<const std::string> texts) const;
  void backward(const Forward& fwd, const Matrix& dh);

  // Inference-mode encoding of raw text; requires the toy backend.
  EmbeddingBatch encode(std::span<const std::string> texts) const;

  std::vector<Parameter*> parameters();
  HashedEncoder* hashed() { return std::get_if<HashedEncoder>(&backend_); }
  const HashedEncoder* hashed() const { return std::get_if<HashedEncoder>(&backend_); }

 private:
  std::variant<std::monostate, HashedEncoder, EmbeddingCache> backend_;
};

}  // namespace dd
