#include "dd/embedder.hpp"

#include <bit>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "dd/errors.hpp"

namespace dd {

static_assert(std::endian::native == std::endian::little, "cache I/O assumes a little-endian host");

Matrix EmbeddingBatch::to_matrix() const {
  Matrix m(count(), d_h);
  for (std::size_t i = 0; i < vectors.size(); ++i) m.data[i] = static_cast<double>(vectors[i]);
  return m;
}

EmbeddingBatch EmbeddingBatch::from_matrix(std::vector<std::string> ids, const Matrix& m) {
  if (ids.size() != m.rows) throw ValidationError("embedding batch: id count differs from row count");
  EmbeddingBatch b;
  b.ids = std::move(ids);
  b.d_h = m.cols;
  b.vectors.resize(m.size());
  for (std::size_t i = 0; i < m.size(); ++i) b.vectors[i] = static_cast<float>(m.data[i]);
  return b;
}

void save_cache(const EmbeddingBatch& batch, const std::filesystem::path& path) {
  if (batch.vectors.size() != batch.count() * batch.d_h) throw ValidationError("save_cache: ragged batch");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write " + path.string());
  out << "DDEMB1 " << batch.d_h << ' ' << batch.count() << '\n';
  for (std::size_t i = 0; i < batch.count(); ++i) {
    const auto len = static_cast<std::uint32_t>(batch.ids[i].size());
    out.write(reinterpret_cast<const char*>(&len), sizeof len);
    out.write(batch.ids[i].data(), len);
    out.write(reinterpret_cast<const char*>(batch.vectors.data() + i * batch.d_h),
              static_cast<std::streamsize>(batch.d_h * sizeof(float)));
  }
}

EmbeddingBatch load_cache(const std::filesystem::path& path, std::optional<std::size_t> expected_d_h) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open embedding cache " + path.string());
  std::string header;
  if (!std::getline(in, header)) throw FormatError("embedding cache: missing header");
  std::istringstream hs(header);
  std::string magic;
  long long d_h = -1;
  long long count = -1;
  if (!(hs >> magic >> d_h >> count) || magic != "DDEMB1" || d_h <= 0 || count < 0)
    throw FormatError("embedding cache: bad header '" + header + "'");
  if (expected_d_h && static_cast<std::size_t>(d_h) != *expected_d_h)
    throw FormatError("embedding cache: file has d_h=" + std::to_string(d_h) + ", configured d_h=" +
                      std::to_string(*expected_d_h));

  EmbeddingBatch b;
  b.d_h = static_cast<std::size_t>(d_h);
  b.ids.reserve(static_cast<std::size_t>(count));
  b.vectors.resize(static_cast<std::size_t>(count) * b.d_h);
  for (long long i = 0; i < count; ++i) {
    std::uint32_t len = 0;
    if (!in.read(reinterpret_cast<char*>(&len), sizeof len))
      throw FormatError("embedding cache: truncated at record " + std::to_string(i));
    std::string id(len, '\0');
    if (!in.read(id.data(), len)) throw FormatError("embedding cache: truncated id at record " + std::to_string(i));
    if (!in.read(reinterpret_cast<char*>(b.vectors.data() + i * b.d_h),
                 static_cast<std::streamsize>(b.d_h * sizeof(float))))
      throw FormatError("embedding cache: truncated vector at record " + std::to_string(i));
    b.ids.push_back(std::move(id));
  }
  if (in.peek() != std::char_traits<char>::eof()) throw FormatError("embedding cache: trailing bytes");
  for (float v : b.vectors)
    if (!std::isfinite(v)) throw FormatError("embedding cache: non-finite entry");
  return b;
}

HashedEncoder::HashedEncoder(std::size_t d_h) : layer(d_h, d_h, "embedder.dense") {}

std::size_t HashedEncoder::bucket(std::string_view token, std::size_t d_h) {
  std::uint64_t h = 14695981039346656037ULL;
  for (char c : token) {
    h ^= static_cast<unsigned char>(std::tolower(static_cast<unsigned char>(c)));
    h *= 1099511628211ULL;
  }
  return static_cast<std::size_t>(h % d_h);
}

Matrix HashedEncoder::hashed_features(std::span<const std::string> texts) const {
  const std::size_t d_h = dim();
  Matrix f(texts.size(), d_h);
  const auto n = static_cast<long>(texts.size());
#pragma omp parallel for schedule(dynamic, 8)
  for (long i = 0; i < n; ++i) {
    auto row = f.row(static_cast<std::size_t>(i));
    std::istringstream in(texts[static_cast<std::size_t>(i)]);
    std::string tok;
    while (in >> tok) row[bucket(tok, d_h)] += 1.0;
    double norm = 0.0;
    for (double v : row) norm += v * v;
    norm = std::sqrt(norm);
    if (norm > 0.0)
      for (auto& v : row) v /= norm;
  }
  return f;
}

Matrix HashedEncoder::forward(const Matrix& features) const { return tanh_forward(layer.forward(features)); }

void HashedEncoder::backward(const Matrix& features, const Matrix& h, const Matrix& dh) {
  layer.backward(features, tanh_backward(h, dh), true);
}

HashedEncoder toy_fit(const Corpus& /*corpus*/, std::size_t d_h, std::uint64_t seed) {
  if (d_h < 8) throw ConfigError("toy encoder needs d_h >= 8");
  HashedEncoder enc(d_h);
  Rng rng(seed, "init:embedder");
  enc.layer.init(rng);
  return enc;
}

EmbeddingCache::EmbeddingCache(const EmbeddingBatch& batch) : table_(batch.to_matrix()) {
  for (std::size_t i = 0; i < batch.count(); ++i)
    if (!rows_.emplace(batch.ids[i], i).second) throw FormatError("embedding cache: duplicate id '" + batch.ids[i] + "'");
}

std::span<const double> EmbeddingCache::lookup(const std::string& id) const {
  auto it = rows_.find(id);
  if (it == rows_.end()) throw ValidationError("embedding cache has no entry for id '" + id + "'");
  return table_.row(it->second);
}

std::size_t Embedder::dim() const {
  if (auto* h = std::get_if<HashedEncoder>(&backend_)) return h->dim();
  if (auto* c = std::get_if<EmbeddingCache>(&backend_)) return c->dim();
  return 0;
}

Embedder::Forward Embedder::embed(std::span<const Sample* const> samples) const {
  if (!initialized()) throw StateError("embedder backend is not initialized");
  Forward f;
  if (auto* enc = std::get_if<HashedEncoder>(&backend_)) {
    std::vector<std::string> texts;
    texts.reserve(samples.size());
    for (const auto* s : samples) texts.push_back(s->text);
    f.features = enc->hashed_features(texts);
    f.h = enc->forward(f.features);
  } else {
    const auto& cache = std::get<EmbeddingCache>(backend_);
    f.h = Matrix(samples.size(), cache.dim());
    for (std::size_t i = 0; i < samples.size(); ++i) {
      auto src = cache.lookup(samples[i]->id);
      std::copy(src.begin(), src.end(), f.h.row(i).begin());
    }
  }
  return f;
}

Embedder::Forward Embedder::embed(const Corpus& corpus, std::span<const std::size_t> indices) const {
  std::vector<const Sample*> ptrs;
  ptrs.reserve(indices.size());
  for (auto i : indices) ptrs.push_back(&corpus[i]);
  return embed(ptrs);
}

Embedder::Forward Embedder::embed_texts(std::span<const std::string> texts) const {
  if (!initialized()) throw StateError("embedder backend is not initialized");
  const auto* enc = std::get_if<HashedEncoder>(&backend_);
  if (!enc) throw StateError("the embedding-cache backend cannot encode raw text");
  Forward f;
  f.features = enc->hashed_features(texts);
  f.h = enc->forward(f.features);
  return f;
}

void Embedder::backward(const Forward& fwd, const Matrix& dh) {
  if (auto* enc = std::get_if<HashedEncoder>(&backend_)) enc->backward(fwd.features, fwd.h, dh);
}

EmbeddingBatch Embedder::encode(std::span<const std::string> texts) const {
  auto f = embed_texts(texts);
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < texts.size(); ++i) ids.push_back(std::to_string(i));
  return EmbeddingBatch::from_matrix(std::move(ids), f.h);
}

std::vector<Parameter*> Embedder::parameters() {
  if (auto* enc = std::get_if<HashedEncoder>(&backend_)) return enc->layer.parameters();
  return {};
}

}  // namespace dd
