#pragma once

#include <optional>
#include <string>
#include <vector>

#include "cotdrive/annotate/prompts.hpp"
#include "cotdrive/annotate/teacher.hpp"
#include "cotdrive/annotate/types.hpp"
#include "cotdrive/core/error.hpp"
#include "cotdrive/ingest/types.hpp"

namespace cotdrive::annotate {

/// A session that stopped early; carries the turns completed so far.
class SessionError : public Error {
 public:
  SessionError(const std::string& message, std::vector<DialogueTurn> partial)
      : Error("session", message), partial_(std::move(partial)) {}
  const std::vector<DialogueTurn>& partial() const noexcept { return partial_; }

 private:
  std::vector<DialogueTurn> partial_;
};

/// Outbound transcripts, one per step, as sent to the teacher.
using TranscriptLog = std::vector<std::vector<ChatMessage>>;

/// Runs the four steps in order. Step i's transcript holds the system prompt
/// and every earlier prompt/response pair, and its prompt text quotes the
/// earlier responses as well.
CoTAnnotation run_cot_session(const ingest::SceneWindow& window, TeacherClient& client,
                              const PromptTemplates& templates, TranscriptLog* log = nullptr);
CoTAnnotation run_cot_session(const ingest::SceneWindow& window, TeacherClient& client);

enum class CoordinateParse { absent, ok, malformed };

/// Parses the first bracketed list of (x, y) pairs.
CoordinateParse parse_coordinates(const std::string& text, std::vector<Point2>& out);

inline constexpr double kCoordinateSpacingSeconds = 1.0;

struct ValidationOptions {
  double box = 500.0;
  double v_max = 60.0;
  double spacing_seconds = kCoordinateSpacingSeconds;
};

struct ValidationReport {
  std::vector<std::string> violations;
  bool ok() const { return violations.empty(); }
  bool operator==(const ValidationReport&) const = default;
};

/// Report-only checks; never mutates its inputs.
ValidationReport validate_annotation(const CoTAnnotation& annotation, const ingest::SceneWindow& window,
                                     const ValidationOptions& options = {});

}  // namespace cotdrive::annotate
