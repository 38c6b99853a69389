#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>

#include "dd/embedder.hpp"
#include "dd/model.hpp"

namespace dd {

inline constexpr std::string_view kCheckpointMagic = "DDCKPT1";

// Single-file container:
//   "DDCKPT1\n", u64 little-endian header length, JSON header
//   {format, config, step, epoch, backend, generator_classes, tensors:[{name, rows, cols}]},
//   then the tensors' doubles in header order.
// Tensors are model parameters keyed by their qualified names plus optional
// extra tensors (optimizer moments) under their own names.
struct CheckpointData {
  TrainConfig config;
  std::uint64_t step = 0;
  std::uint64_t epoch = 0;
  std::string backend;  // "hashed" or "cache"
  std::vector<std::string> generator_classes;
  std::map<std::string, Matrix> tensors;
  std::map<std::string, std::uint64_t> counters;
};

void write_checkpoint(const CheckpointData& data, const std::filesystem::path& path);
CheckpointData read_checkpoint(const std::filesystem::path& path);

// Collects the model's parameters into `data.tensors` and its config/classes.
CheckpointData snapshot(Model& model, std::uint64_t step, std::uint64_t epoch);

// Rebuilds a model for inference. Checkpoints made with the cache backend
// need the cache supplied again.
std::unique_ptr<Model> restore_model(const CheckpointData& data, std::optional<EmbeddingCache> cache = {});
std::unique_ptr<Model> load_model(const std::filesystem::path& path, std::optional<EmbeddingCache> cache = {});

}  // namespace dd
