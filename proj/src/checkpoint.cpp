#include "dd/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include <json.hpp>

#include "dd/errors.hpp"

namespace dd {

using ordered_json = nlohmann::ordered_json;

void write_checkpoint(const CheckpointData& data, const std::filesystem::path& path) {
  ordered_json header;
  header["format"] = kCheckpointMagic;
  header["config"] = ordered_json::parse(data.config.to_json());
  header["step"] = data.step;
  header["epoch"] = data.epoch;
  header["backend"] = data.backend;
  header["generator_classes"] = data.generator_classes;
  header["counters"] = data.counters;
  ordered_json tensors = ordered_json::array();
  for (const auto& [name, m] : data.tensors) tensors.push_back({{"name", name}, {"rows", m.rows}, {"cols", m.cols}});
  header["tensors"] = tensors;
  const std::string text = header.dump();

  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write checkpoint " + path.string());
  out << kCheckpointMagic << '\n';
  const std::uint64_t len = text.size();
  out.write(reinterpret_cast<const char*>(&len), sizeof len);
  out.write(text.data(), static_cast<std::streamsize>(len));
  for (const auto& [name, m] : data.tensors)
    out.write(reinterpret_cast<const char*>(m.data.data()), static_cast<std::streamsize>(m.size() * sizeof(double)));
  if (!out) throw ValidationError("failed writing checkpoint " + path.string());
}

CheckpointData read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open checkpoint " + path.string());
  std::string magic;
  if (!std::getline(in, magic) || magic != kCheckpointMagic)
    throw FormatError(path.string() + " is not a DDCKPT1 checkpoint");
  std::uint64_t len = 0;
  if (!in.read(reinterpret_cast<char*>(&len), sizeof len) || len > (1ULL << 32))
    throw FormatError("checkpoint: bad header length");
  std::string text(len, '\0');
  if (!in.read(text.data(), static_cast<std::streamsize>(len))) throw FormatError("checkpoint: truncated header");

  CheckpointData data;
  try {
    const auto header = ordered_json::parse(text);
    if (header.at("format").get<std::string>() != kCheckpointMagic) throw FormatError("checkpoint: wrong format tag");
    data.config = TrainConfig::from_json(header.at("config").dump());
    data.step = header.at("step").get<std::uint64_t>();
    data.epoch = header.at("epoch").get<std::uint64_t>();
    data.backend = header.at("backend").get<std::string>();
    data.generator_classes = header.at("generator_classes").get<std::vector<std::string>>();
    data.counters = header.at("counters").get<std::map<std::string, std::uint64_t>>();
    for (const auto& t : header.at("tensors")) {
      Matrix m(t.at("rows").get<std::size_t>(), t.at("cols").get<std::size_t>());
      if (!in.read(reinterpret_cast<char*>(m.data.data()), static_cast<std::streamsize>(m.size() * sizeof(double))))
        throw FormatError("checkpoint: truncated tensor '" + t.at("name").get<std::string>() + "'");
      data.tensors.emplace(t.at("name").get<std::string>(), std::move(m));
    }
    if (in.peek() != std::char_traits<char>::eof()) throw FormatError("checkpoint: trailing bytes");
  } catch (const ordered_json::exception& e) {
    throw FormatError(std::string("checkpoint: bad header (") + e.what() + ")");
  }
  return data;
}

CheckpointData snapshot(Model& model, std::uint64_t step, std::uint64_t epoch) {
  CheckpointData data;
  data.config = model.config();
  data.step = step;
  data.epoch = epoch;
  data.backend = model.embedder.trainable() ? "hashed" : "cache";
  data.generator_classes = model.generator_classes();
  for (auto* p : model.all_parameters()) data.tensors.emplace(p->name, p->value);
  return data;
}

std::unique_ptr<Model> restore_model(const CheckpointData& data, std::optional<EmbeddingCache> cache) {
  Embedder emb;
  if (data.backend == "hashed") {
    emb = Embedder(HashedEncoder(data.config.d_h));
  } else if (data.backend == "cache") {
    if (!cache) throw StateError("checkpoint was trained on cached embeddings; supply the embedding cache");
    emb = Embedder(std::move(*cache));
  } else {
    throw FormatError("checkpoint: unknown embedder backend '" + data.backend + "'");
  }
  auto model = std::make_unique<Model>(data.config, std::move(emb), data.generator_classes);
  for (auto* p : model->all_parameters()) {
    auto it = data.tensors.find(p->name);
    if (it == data.tensors.end()) throw FormatError("checkpoint: missing tensor '" + p->name + "'");
    if (!it->second.same_shape(p->value)) throw FormatError("checkpoint: tensor '" + p->name + "' has the wrong shape");
    p->value = it->second;
  }
  return model;
}

std::unique_ptr<Model> load_model(const std::filesystem::path& path, std::optional<EmbeddingCache> cache) {
  return restore_model(read_checkpoint(path), std::move(cache));
}

}  // namespace dd
