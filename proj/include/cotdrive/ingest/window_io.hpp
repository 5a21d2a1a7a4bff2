#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "cotdrive/ingest/types.hpp"

namespace cotdrive::ingest {

inline constexpr int kWindowSchemaVersion = 1;

nlohmann::json window_to_json(const SceneWindow& w);
/// Throws SchemaError on a missing field or unknown schema_version.
SceneWindow window_from_json(const nlohmann::json& j);

nlohmann::json state_to_json(const AgentState& s);
AgentState state_from_json(const nlohmann::json& j);

std::string render_windows_jsonl(const std::vector<SceneWindow>& windows);
/// A corrupt line raises ParseError naming its 1-based line number.
std::vector<SceneWindow> parse_windows_jsonl(std::string_view text, const std::string& origin = "<memory>");

void save_windows(const std::filesystem::path& path, const std::vector<SceneWindow>& windows);
std::vector<SceneWindow> load_windows(const std::filesystem::path& path);

}  // namespace cotdrive::ingest
