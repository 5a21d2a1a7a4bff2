#include "cotdrive/annotate/session.hpp"

#include <cmath>
#include <regex>

#include "cotdrive/core/text.hpp"
#include "cotdrive/ingest/windows.hpp"

namespace cotdrive::annotate {

CoTAnnotation run_cot_session(const ingest::SceneWindow& window, TeacherClient& client,
                              const PromptTemplates& templates, TranscriptLog* log) {
  const ingest::SceneWindow normalized =
      window.transform ? window : ingest::normalize_to_target_frame(window);
  const auto payloads = build_cot_dialogue(serialize_scene(normalized), templates);

  CoTAnnotation ann;
  ann.scene_ref = window.scene_ref;
  ann.provenance = client.provenance();
  std::vector<ChatMessage> transcript;
  if (!templates.system.empty()) transcript.push_back({"system", templates.system});

  for (const auto& payload : payloads) {
    DialogueTurn turn;
    turn.step = payload.step;
    turn.prompt_text = render_prompt(payload, ann.turns);
    transcript.push_back({"user", turn.prompt_text});
    if (log) log->push_back(transcript);
    try {
      turn.response_text = trim(client.send(transcript));
    } catch (const Error& e) {
      throw SessionError(window.scene_ref + ": step " + std::string(to_string(payload.step)) + ": " + e.what(),
                         ann.turns);
    }
    transcript.push_back({"assistant", turn.response_text});
    ann.turns.push_back(std::move(turn));
  }
  ann.summary = ann.turns.back().response_text;
  std::vector<Point2> coords;
  switch (parse_coordinates(ann.summary, coords)) {
    case CoordinateParse::ok: ann.predicted_coordinates = std::move(coords); break;
    case CoordinateParse::malformed: ann.warnings.push_back("malformed coordinate list"); break;
    case CoordinateParse::absent: break;
  }
  return ann;
}

CoTAnnotation run_cot_session(const ingest::SceneWindow& window, TeacherClient& client) {
  return run_cot_session(window, client, PromptTemplates::load(PromptTemplates::default_dir()));
}

CoordinateParse parse_coordinates(const std::string& text, std::vector<Point2>& out) {
  out.clear();
  const auto open = text.find("[(");
  if (open == std::string::npos) return CoordinateParse::absent;
  const auto close = text.find(']', open);
  if (close == std::string::npos) return CoordinateParse::malformed;
  static const std::string num = R"(\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)\s*)";
  static const std::regex list_re(R"(\[\s*\()" + num + "," + num + R"(\)(?:\s*,\s*\()" + num + "," + num +
                                  R"(\))*\s*\])");
  static const std::regex pair_re(R"(\()" + num + "," + num + R"(\))");
  const std::string body = text.substr(open, close - open + 1);
  if (!std::regex_match(body, list_re)) return CoordinateParse::malformed;
  for (auto it = std::sregex_iterator(body.begin(), body.end(), pair_re); it != std::sregex_iterator(); ++it)
    out.push_back({std::stod((*it)[1].str()), std::stod((*it)[2].str())});
  return CoordinateParse::ok;
}

ValidationReport validate_annotation(const CoTAnnotation& a, const ingest::SceneWindow& window,
                                     const ValidationOptions& o) {
  ValidationReport r;
  for (Step s : kSteps) {
    bool found = false;
    for (const auto& t : a.turns) found |= t.step == s;
    if (!found) r.violations.push_back("missing step: " + std::string(to_string(s)));
  }
  if (a.turns.size() > kSteps.size()) r.violations.push_back("extra turns: " + std::to_string(a.turns.size()));
  for (std::size_t i = 0; i < a.turns.size() && i < kSteps.size(); ++i)
    if (a.turns[i].step != kSteps[i]) {
      r.violations.push_back("steps out of order at turn " + std::to_string(i + 1));
      break;
    }
  for (const auto& t : a.turns)
    if (trim(t.response_text).empty())
      r.violations.push_back("empty response: " + std::string(to_string(t.step)));
  if (trim(a.summary).empty())
    r.violations.push_back("empty summary");
  else if (!contains_icase(a.summary, "target") && a.summary.find(window.target_id) == std::string::npos)
    r.violations.push_back("summary does not mention the target agent");
  if (a.predicted_coordinates) {
    const double step_limit = o.v_max * o.spacing_seconds;
    Point2 prev{0.0, 0.0};
    for (std::size_t i = 0; i < a.predicted_coordinates->size(); ++i) {
      const auto& p = (*a.predicted_coordinates)[i];
      if (!std::isfinite(p.x) || !std::isfinite(p.y) || std::abs(p.x) > o.box || std::abs(p.y) > o.box) {
        r.violations.push_back("coordinate " + std::to_string(i + 1) + " outside the plausibility box");
      } else if (std::hypot(p.x - prev.x, p.y - prev.y) > step_limit) {
        r.violations.push_back("coordinate " + std::to_string(i + 1) + " jumps " +
                               format_fixed(std::hypot(p.x - prev.x, p.y - prev.y), 2) + " m in one step");
      }
      prev = p;
    }
  }
  return r;
}

}  // namespace cotdrive::annotate
