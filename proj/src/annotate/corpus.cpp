#include "cotdrive/annotate/corpus.hpp"

#include <atomic>
#include <thread>

#include "cotdrive/core/error.hpp"
#include "cotdrive/core/text.hpp"
#include "cotdrive/ingest/windows.hpp"

namespace cotdrive::annotate {

using nlohmann::json;

json annotation_to_json(const CoTAnnotation& a) {
  json turns = json::array();
  for (const auto& t : a.turns)
    turns.push_back({{"step", std::string(to_string(t.step))},
                     {"prompt_text", t.prompt_text},
                     {"response_text", t.response_text}});
  json j = {{"schema_version", kAnnotationSchemaVersion},
            {"scene_ref", a.scene_ref},
            {"turns", std::move(turns)},
            {"summary", a.summary},
            {"provenance", std::string(to_string(a.provenance))},
            {"warnings", a.warnings}};
  if (a.predicted_coordinates) {
    json pts = json::array();
    for (const auto& p : *a.predicted_coordinates) pts.push_back({p.x, p.y});
    j["predicted_coordinates"] = std::move(pts);
  } else {
    j["predicted_coordinates"] = nullptr;
  }
  return j;
}

CoTAnnotation annotation_from_json(const json& j) {
  try {
    const int v = j.at("schema_version").get<int>();
    if (v != kAnnotationSchemaVersion) throw SchemaError("unsupported annotation schema_version " + std::to_string(v));
    CoTAnnotation a;
    a.scene_ref = j.at("scene_ref").get<std::string>();
    for (const auto& t : j.at("turns"))
      a.turns.push_back({step_from_string(t.at("step").get<std::string>()), t.at("prompt_text").get<std::string>(),
                         t.at("response_text").get<std::string>()});
    a.summary = j.at("summary").get<std::string>();
    a.provenance = provenance_from_string(j.at("provenance").get<std::string>());
    if (j.contains("warnings")) a.warnings = j["warnings"].get<std::vector<std::string>>();
    if (j.contains("predicted_coordinates") && !j["predicted_coordinates"].is_null()) {
      std::vector<Point2> pts;
      for (const auto& p : j["predicted_coordinates"]) pts.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
      a.predicted_coordinates = std::move(pts);
    }
    return a;
  } catch (const json::exception& e) {
    throw SchemaError(std::string("annotation: ") + e.what());
  }
}

std::string render_annotations_jsonl(const std::vector<CoTAnnotation>& annotations) {
  std::string out;
  for (const auto& a : annotations) out += annotation_to_json(a).dump() + "\n";
  return out;
}

std::vector<CoTAnnotation> parse_annotations_jsonl(std::string_view text, const std::string& origin) {
  std::vector<CoTAnnotation> out;
  const auto lines = split(text, '\n');
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::string line = trim(lines[i]);
    if (line.empty()) continue;
    try {
      out.push_back(annotation_from_json(json::parse(line)));
    } catch (const json::exception& e) {
      throw ParseError(origin + ":" + std::to_string(i + 1) + ": " + e.what());
    } catch (const Error& e) {
      throw ParseError(origin + ":" + std::to_string(i + 1) + ": " + e.what());
    }
  }
  return out;
}

std::filesystem::path manifest_path_for(const std::filesystem::path& corpus) {
  return corpus.parent_path() / (corpus.stem().string() + ".manifest.json");
}

json write_annotation_dataset(const std::vector<CoTAnnotation>& annotations, const std::filesystem::path& path,
                              const SplitMembership& splits) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  write_file(path, render_annotations_jsonl(annotations));
  std::map<std::string, std::size_t> by_prov;
  std::map<std::string, std::vector<std::string>> members;
  for (const auto& a : annotations) {
    ++by_prov[std::string(to_string(a.provenance))];
    auto it = splits.find(a.scene_ref);
    if (it != splits.end()) members[it->second].push_back(a.scene_ref);
  }
  json manifest = {{"schema_version", kAnnotationSchemaVersion},
                   {"corpus", path.filename().string()},
                   {"count", annotations.size()},
                   {"provenance", by_prov},
                   {"splits", members}};
  write_file(manifest_path_for(path), manifest.dump(2) + "\n");
  return manifest;
}

std::vector<CoTAnnotation> read_annotation_dataset(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw IoError("annotation corpus not found: " + path.string());
  return parse_annotations_jsonl(read_file(path), path.string());
}

std::vector<SessionOutcome> annotate_windows(const std::vector<ingest::SceneWindow>& windows,
                                             const TeacherFactory& factory, const PromptTemplates& templates,
                                             int parallelism) {
  std::vector<SessionOutcome> out(windows.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < windows.size(); i = next++) {
      auto& o = out[i];
      o.scene_ref = windows[i].scene_ref;
      try {
        auto client = factory(windows[i]);
        o.annotation = run_cot_session(windows[i], *client, templates);
        const auto normalized =
            windows[i].transform ? windows[i] : ingest::normalize_to_target_frame(windows[i]);
        o.validation = validate_annotation(*o.annotation, normalized);
      } catch (const Error& e) {
        o.error = std::string(e.kind()) + ": " + e.what();
      }
    }
  };
  const int n = std::max(1, std::min<int>(parallelism, static_cast<int>(windows.size())));
  if (n == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < n; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  return out;
}

}  // namespace cotdrive::annotate
