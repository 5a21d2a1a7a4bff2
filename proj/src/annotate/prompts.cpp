#include "cotdrive/annotate/prompts.hpp"

#include <filesystem>

#include "cotdrive/core/error.hpp"
#include "cotdrive/core/text.hpp"

namespace cotdrive::annotate {

namespace {

std::string replace_all(std::string s, std::string_view from, std::string_view to) {
  std::size_t pos = 0;
  while ((pos = s.find(from, pos)) != std::string::npos) {
    s.replace(pos, from.size(), to);
    pos += to.size();
  }
  return s;
}

std::string fmt2(double v) { return format_fixed(v, 2); }

}  // namespace

std::string serialize_scene(const ingest::SceneWindow& w) {
  std::string out = "Scene " + w.scene_ref + ": " + std::to_string(w.agents.size()) +
                    (w.agents.size() == 1 ? " agent" : " agents") + " observed for " +
                    fmt2((w.history_length() - 1) / w.sampling_rate_hz) + " s at " + fmt2(w.sampling_rate_hz) +
                    " Hz. Units: meters, m/s, radians.\n";
  for (std::size_t i = 0; i < w.agents.size(); ++i) {
    const auto& a = w.agents[i];
    const auto& s = a.states.back();
    out += "Agent " + std::to_string(i);
    if (i == 0) out += " [TARGET]";
    out += " id " + a.agent_id + ": " + std::string(ingest::to_string(a.agent_class));
    out += ", position (" + fmt2(s.x) + ", " + fmt2(s.y) + ") m";
    out += ", velocity " + fmt2(s.velocity) + " m/s";
    out += ", heading " + fmt2(s.heading) + " rad";
    out += ", lane " + (s.lane_id ? std::to_string(*s.lane_id) : std::string("unknown"));
    if (i == 0) {
      const auto& first = a.states.front();
      out += ", acceleration " + fmt2(s.acceleration) + " m/s^2";
      out += ", moved (" + fmt2(s.x - first.x) + ", " + fmt2(s.y - first.y) + ") m over the history";
    }
    out += ".\n";
  }
  return out;
}

std::string PromptTemplates::file_name(Step s) {
  switch (s) {
    case Step::background_statistics: return "step1_background_statistics.txt";
    case Step::interaction_analysis: return "step2_interaction_analysis.txt";
    case Step::risk_assessment: return "step3_risk_assessment.txt";
    case Step::prediction: return "step4_prediction.txt";
  }
  return {};
}

std::filesystem::path PromptTemplates::default_dir() {
  if (const char* env = std::getenv("COTDRIVE_TEMPLATE_DIR"); env && *env) return env;
  return COTDRIVE_TEMPLATE_DIR;
}

PromptTemplates PromptTemplates::load(const std::filesystem::path& dir) {
  auto read = [&](const std::string& name) {
    const auto p = dir / name;
    if (!std::filesystem::is_regular_file(p)) throw ConfigError("missing prompt template " + p.string());
    return read_file(p);
  };
  PromptTemplates t;
  t.system = trim(read("system.txt"));
  for (Step s : kSteps) {
    auto text = read(file_name(s));
    if (text.find("{scene}") == std::string::npos)
      throw ConfigError("template " + file_name(s) + " lacks the {scene} placeholder");
    t.steps[static_cast<std::size_t>(s)] = std::move(text);
  }
  return t;
}

std::vector<PromptPayload> build_cot_dialogue(const std::string& scene_text, const PromptTemplates& templates) {
  if (trim(scene_text).empty()) throw ArgumentError("build_cot_dialogue: empty scene text");
  std::vector<PromptPayload> out;
  for (Step s : kSteps)
    out.push_back({s, replace_all(templates.steps[static_cast<std::size_t>(s)], "{scene}", trim(scene_text))});
  return out;
}

std::vector<PromptPayload> build_cot_dialogue(const std::string& scene_text) {
  return build_cot_dialogue(scene_text, PromptTemplates::load(PromptTemplates::default_dir()));
}

std::string render_prompt(const PromptPayload& payload, const std::vector<DialogueTurn>& prior) {
  std::string steps;
  for (const auto& t : prior) {
    steps += "Step " + std::to_string(static_cast<int>(t.step) + 1) + " (" + std::string(to_string(t.step)) +
             "): " + t.response_text + "\n";
  }
  if (steps.empty()) steps = "(none)\n";
  return trim(replace_all(payload.text, "{prior_steps}", trim(steps))) + "\n";
}

}  // namespace cotdrive::annotate
