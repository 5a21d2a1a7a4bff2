#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "cotdrive/annotate/types.hpp"
#include "cotdrive/ingest/types.hpp"

namespace cotdrive::annotate {

/// Deterministic text description of a normalized window; target first and
/// flagged [TARGET], numbers rounded to 2 decimals.
std::string serialize_scene(const ingest::SceneWindow& window);

/// Prompt templates read from plain-text files with `{scene}` and
/// `{prior_steps}` placeholders.
struct PromptTemplates {
  std::string system;
  std::array<std::string, 4> steps;

  /// Throws ConfigError naming the first missing file.
  static PromptTemplates load(const std::filesystem::path& dir);
  static std::filesystem::path default_dir();
  static std::string file_name(Step s);
};

struct PromptPayload {
  Step step = Step::background_statistics;
  /// Template with `{scene}` filled; `{prior_steps}` is resolved per session.
  std::string text;
};

std::vector<PromptPayload> build_cot_dialogue(const std::string& scene_text, const PromptTemplates& templates);
std::vector<PromptPayload> build_cot_dialogue(const std::string& scene_text);

/// Fills `{prior_steps}` with the responses of the given turns.
std::string render_prompt(const PromptPayload& payload, const std::vector<DialogueTurn>& prior);

}  // namespace cotdrive::annotate
