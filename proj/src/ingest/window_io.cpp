#include "cotdrive/ingest/window_io.hpp"

#include "cotdrive/core/error.hpp"
#include "cotdrive/core/text.hpp"

namespace cotdrive::ingest {

using nlohmann::json;

json state_to_json(const AgentState& s) {
  json j = {{"agent_id", s.agent_id},
            {"agent_class", std::string(to_string(s.agent_class))},
            {"frame", s.frame},
            {"x", s.x},
            {"y", s.y},
            {"velocity", s.velocity},
            {"heading", s.heading},
            {"acceleration", s.acceleration}};
  j["lane_id"] = s.lane_id ? json(*s.lane_id) : json(nullptr);
  return j;
}

AgentState state_from_json(const json& j) {
  AgentState s;
  s.agent_id = j.at("agent_id").get<std::string>();
  s.agent_class = agent_class_from_string(j.value("agent_class", std::string("vehicle")));
  s.frame = j.at("frame").get<std::int64_t>();
  s.x = j.at("x").get<double>();
  s.y = j.at("y").get<double>();
  s.velocity = j.at("velocity").get<double>();
  s.heading = j.at("heading").get<double>();
  s.acceleration = j.value("acceleration", 0.0);
  if (j.contains("lane_id") && !j["lane_id"].is_null()) s.lane_id = j["lane_id"].get<int>();
  return s;
}

json window_to_json(const SceneWindow& w) {
  json agents = json::array();
  for (const auto& a : w.agents) {
    json states = json::array();
    for (const auto& s : a.states) states.push_back(state_to_json(s));
    agents.push_back({{"agent_id", a.agent_id},
                      {"agent_class", std::string(to_string(a.agent_class))},
                      {"valid", a.valid},
                      {"states", std::move(states)}});
  }
  json future = json::array();
  for (const auto& s : w.future) future.push_back(state_to_json(s));
  json j = {{"schema_version", kWindowSchemaVersion},
            {"scene_ref", w.scene_ref},
            {"target_id", w.target_id},
            {"anchor_frame", w.anchor_frame},
            {"sampling_rate_hz", w.sampling_rate_hz},
            {"agents", std::move(agents)},
            {"future", std::move(future)}};
  if (w.maneuver)
    j["maneuver"] = {{"lateral", std::string(to_string(w.maneuver->lateral))},
                     {"longitudinal", std::string(to_string(w.maneuver->longitudinal))},
                     {"joint_index", w.maneuver->joint_index()}};
  else
    j["maneuver"] = nullptr;
  if (w.transform)
    j["transform"] = {{"origin_x", w.transform->origin_x},
                      {"origin_y", w.transform->origin_y},
                      {"heading", w.transform->heading}};
  else
    j["transform"] = nullptr;
  return j;
}

SceneWindow window_from_json(const json& j) {
  try {
    const int version = j.at("schema_version").get<int>();
    if (version != kWindowSchemaVersion)
      throw SchemaError("unsupported window schema_version " + std::to_string(version));
    SceneWindow w;
    w.scene_ref = j.value("scene_ref", std::string());
    w.target_id = j.at("target_id").get<std::string>();
    w.anchor_frame = j.at("anchor_frame").get<std::int64_t>();
    w.sampling_rate_hz = j.at("sampling_rate_hz").get<double>();
    for (const auto& a : j.at("agents")) {
      AgentHistory h;
      h.agent_id = a.at("agent_id").get<std::string>();
      h.agent_class = agent_class_from_string(a.value("agent_class", std::string("vehicle")));
      h.valid = a.at("valid").get<std::vector<std::uint8_t>>();
      for (const auto& s : a.at("states")) h.states.push_back(state_from_json(s));
      if (h.valid.size() != h.states.size())
        throw SchemaError("agent " + h.agent_id + ": valid mask length differs from states");
      w.agents.push_back(std::move(h));
    }
    if (w.agents.empty()) throw SchemaError("window has no agents");
    for (const auto& s : j.at("future")) w.future.push_back(state_from_json(s));
    if (j.contains("maneuver") && !j["maneuver"].is_null()) {
      const auto& m = j["maneuver"];
      w.maneuver = ManeuverLabel{lateral_from_string(m.at("lateral").get<std::string>()),
                                 longitudinal_from_string(m.at("longitudinal").get<std::string>())};
    }
    if (j.contains("transform") && !j["transform"].is_null()) {
      const auto& t = j["transform"];
      w.transform = FrameTransform{t.at("origin_x").get<double>(), t.at("origin_y").get<double>(),
                                   t.at("heading").get<double>()};
    }
    return w;
  } catch (const json::exception& e) {
    throw SchemaError(std::string("window: ") + e.what());
  }
}

std::string render_windows_jsonl(const std::vector<SceneWindow>& windows) {
  std::string out;
  for (const auto& w : windows) {
    out += window_to_json(w).dump();
    out += '\n';
  }
  return out;
}

std::vector<SceneWindow> parse_windows_jsonl(std::string_view text, const std::string& origin) {
  std::vector<SceneWindow> out;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    ++line_no;
    const std::string line = trim(std::string(text.substr(start, end - start)));
    start = end + 1;
    if (line.empty()) continue;
    try {
      out.push_back(window_from_json(json::parse(line)));
    } catch (const json::exception& e) {
      throw ParseError(origin + ":" + std::to_string(line_no) + ": " + e.what());
    } catch (const Error& e) {
      throw ParseError(origin + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

void save_windows(const std::filesystem::path& path, const std::vector<SceneWindow>& windows) {
  write_file(path, render_windows_jsonl(windows));
}

std::vector<SceneWindow> load_windows(const std::filesystem::path& path) {
  return parse_windows_jsonl(read_file(path), path.string());
}

}  // namespace cotdrive::ingest
