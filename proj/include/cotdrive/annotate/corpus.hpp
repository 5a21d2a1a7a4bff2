#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "cotdrive/annotate/session.hpp"
#include "cotdrive/annotate/types.hpp"

namespace cotdrive::annotate {

inline constexpr int kAnnotationSchemaVersion = 1;

nlohmann::json annotation_to_json(const CoTAnnotation& a);
CoTAnnotation annotation_from_json(const nlohmann::json& j);

std::string render_annotations_jsonl(const std::vector<CoTAnnotation>& annotations);
/// A corrupt or truncated line raises ParseError naming its line number.
std::vector<CoTAnnotation> parse_annotations_jsonl(std::string_view text, const std::string& origin = "<memory>");

/// scene_ref -> split name ("train", "val", "test").
using SplitMembership = std::map<std::string, std::string>;

/// Writes `path` (JSONL) and a sibling `<stem>.manifest.json` with counts and
/// split membership. Returns the manifest.
nlohmann::json write_annotation_dataset(const std::vector<CoTAnnotation>& annotations,
                                        const std::filesystem::path& path, const SplitMembership& splits = {});
std::vector<CoTAnnotation> read_annotation_dataset(const std::filesystem::path& path);
std::filesystem::path manifest_path_for(const std::filesystem::path& corpus);

struct SessionOutcome {
  std::string scene_ref;
  std::optional<CoTAnnotation> annotation;
  std::string error;
  ValidationReport validation;
};

/// Runs one session per window with at most `parallelism` in flight; results
/// come back in input order. Teacher failures are recorded, not thrown.
std::vector<SessionOutcome> annotate_windows(const std::vector<ingest::SceneWindow>& windows,
                                             const TeacherFactory& factory, const PromptTemplates& templates,
                                             int parallelism);

}  // namespace cotdrive::annotate
