#include "cotdrive/nn/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "cotdrive/core/error.hpp"
#include "cotdrive/core/text.hpp"

namespace cotdrive::nn {

namespace {
constexpr std::string_view kMagic = "COTDRIVE-CHECKPOINT";
static_assert(std::endian::native == std::endian::little, "checkpoint format assumes little endian");
}  // namespace

const Matrix& CheckpointData::tensor(const std::string& name) const {
  for (const auto& [n, m] : tensors)
    if (n == name) return m;
  throw SchemaError("checkpoint has no tensor " + name);
}

std::vector<std::pair<std::string, Matrix>> CheckpointData::with_prefix(const std::string& prefix) const {
  std::vector<std::pair<std::string, Matrix>> out;
  for (const auto& [n, m] : tensors)
    if (n.rfind(prefix, 0) == 0) out.emplace_back(n.substr(prefix.size()), m);
  return out;
}

void save_checkpoint(const std::filesystem::path& path, const CheckpointData& data) {
  nlohmann::json header;
  header["schema_version"] = kCheckpointSchemaVersion;
  header["kind"] = data.kind;
  header["config"] = data.config;
  header["metadata"] = data.metadata;
  nlohmann::json table = nlohmann::json::array();
  std::size_t offset = 0;
  for (const auto& [name, m] : data.tensors) {
    table.push_back({{"name", name}, {"rows", m.rows()}, {"cols", m.cols()}, {"offset", offset}});
    offset += static_cast<std::size_t>(m.size());
  }
  header["tensors"] = table;
  std::string blob;
  blob.append(kMagic);
  blob.push_back('\n');
  blob.append(header.dump());
  blob.push_back('\n');
  for (const auto& [name, m] : data.tensors) {
    const std::size_t bytes = static_cast<std::size_t>(m.size()) * sizeof(double);
    const std::size_t at = blob.size();
    blob.resize(at + bytes);
    if (bytes) std::memcpy(blob.data() + at, m.data(), bytes);
  }
  write_file(path, blob);
}

CheckpointData load_checkpoint(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw IoError("checkpoint not found: " + path.string());
  const std::string blob = read_file(path);
  const std::size_t l1 = blob.find('\n');
  if (l1 == std::string::npos || std::string_view(blob).substr(0, l1) != kMagic)
    throw SchemaError(path.string() + " is not a checkpoint");
  const std::size_t l2 = blob.find('\n', l1 + 1);
  if (l2 == std::string::npos) throw SchemaError("truncated checkpoint header");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(blob.substr(l1 + 1, l2 - l1 - 1));
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("bad checkpoint header: ") + e.what());
  }
  if (header.value("schema_version", 0) != kCheckpointSchemaVersion)
    throw SchemaError("unsupported checkpoint schema version");
  CheckpointData out;
  out.kind = header.at("kind").get<std::string>();
  out.config = header.at("config");
  out.metadata = header.at("metadata");
  const char* base = blob.data() + l2 + 1;
  const std::size_t avail = blob.size() - (l2 + 1);
  for (const auto& t : header.at("tensors")) {
    const auto rows = t.at("rows").get<Eigen::Index>();
    const auto cols = t.at("cols").get<Eigen::Index>();
    const auto offset = t.at("offset").get<std::size_t>();
    const std::size_t bytes = static_cast<std::size_t>(rows * cols) * sizeof(double);
    if ((offset * sizeof(double)) + bytes > avail) throw SchemaError("truncated checkpoint data");
    Matrix m(rows, cols);
    if (bytes) std::memcpy(m.data(), base + offset * sizeof(double), bytes);
    out.tensors.emplace_back(t.at("name").get<std::string>(), std::move(m));
  }
  return out;
}

}  // namespace cotdrive::nn
