#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "cotdrive/nn/tensor.hpp"

namespace cotdrive::nn {

inline constexpr int kCheckpointSchemaVersion = 1;

/// Self-describing checkpoint: a text magic line, one JSON header line
/// (schema version, kind, config, tensor table, metadata), then raw
/// little-endian float64 tensor data in header order.
struct CheckpointData {
  std::string kind;
  nlohmann::json config;
  nlohmann::json metadata;
  std::vector<std::pair<std::string, Matrix>> tensors;

  const Matrix& tensor(const std::string& name) const;
  std::vector<std::pair<std::string, Matrix>> with_prefix(const std::string& prefix) const;
};

void save_checkpoint(const std::filesystem::path& path, const CheckpointData& data);
CheckpointData load_checkpoint(const std::filesystem::path& path);

}  // namespace cotdrive::nn
