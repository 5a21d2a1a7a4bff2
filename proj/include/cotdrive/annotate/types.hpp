#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace cotdrive::annotate {

enum class Step { background_statistics = 0, interaction_analysis = 1, risk_assessment = 2, prediction = 3 };

inline constexpr std::array<Step, 4> kSteps = {Step::background_statistics, Step::interaction_analysis,
                                               Step::risk_assessment, Step::prediction};

std::string_view to_string(Step s);
Step step_from_string(std::string_view s);

enum class Provenance { teacher_live, teacher_mock, student };

std::string_view to_string(Provenance p);
Provenance provenance_from_string(std::string_view s);

struct DialogueTurn {
  Step step = Step::background_statistics;
  std::string prompt_text;
  std::string response_text;

  bool operator==(const DialogueTurn&) const = default;
};

struct Point2 {
  double x = 0.0;
  double y = 0.0;
  bool operator==(const Point2&) const = default;
};

struct CoTAnnotation {
  std::string scene_ref;
  std::vector<DialogueTurn> turns;
  std::string summary;
  std::optional<std::vector<Point2>> predicted_coordinates;
  Provenance provenance = Provenance::teacher_mock;
  std::vector<std::string> warnings;

  bool operator==(const CoTAnnotation&) const = default;
};

/// Chat transcript entry sent to a teacher.
struct ChatMessage {
  std::string role;  // "system", "user" or "assistant"
  std::string content;

  bool operator==(const ChatMessage&) const = default;
};

}  // namespace cotdrive::annotate
