#include "cotdrive/ingest/loader.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <unordered_map>

#include "json.hpp"

#include "cotdrive/core/error.hpp"
#include "cotdrive/core/text.hpp"

namespace cotdrive::ingest {

namespace {

double parse_double(const std::string& s, const char* field) {
  const std::string t = trim(s);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc{} || ptr != t.data() + t.size() || !std::isfinite(v))
    throw InputError(std::string("bad ") + field + " '" + t + "'");
  return v;
}

std::int64_t parse_int(const std::string& s, const char* field) {
  const std::string t = trim(s);
  std::int64_t v = 0;
  auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc{} || ptr != t.data() + t.size()) {
    // Accept integral floats such as "12.0".
    const double d = parse_double(t, field);
    if (d != std::floor(d)) throw InputError(std::string("bad ") + field + " '" + t + "'");
    return static_cast<std::int64_t>(d);
  }
  return v;
}

void check_state(AgentState& s) {
  if (s.agent_id.empty()) throw InputError("empty agent_id");
  if (s.velocity < 0.0) throw InputError("negative velocity");
  s.heading = wrap_angle(s.heading);
}

void finish(LoadResult& out, const std::vector<std::size_t>& rows, const std::string& origin) {
  std::vector<std::size_t> order(out.states.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto& sa = out.states[a];
    const auto& sb = out.states[b];
    if (sa.agent_id != sb.agent_id) return sa.agent_id < sb.agent_id;
    return sa.frame < sb.frame;
  });
  std::vector<AgentState> sorted;
  sorted.reserve(order.size());
  for (std::size_t k = 0; k < order.size(); ++k) {
    const auto& s = out.states[order[k]];
    if (!sorted.empty() && sorted.back().agent_id == s.agent_id && sorted.back().frame == s.frame)
      throw IntegrityError(origin + ": row " + std::to_string(rows[order[k]]) +
                           " repeats frame " + std::to_string(s.frame) + " of agent " + s.agent_id);
    sorted.push_back(s);
  }
  out.states = std::move(sorted);
}

LoadResult parse_csv(std::string_view text, const std::string& origin) {
  LoadResult out;
  std::vector<std::size_t> rows;
  auto lines = split(text, '\n');
  std::size_t first = 0;
  while (first < lines.size() && trim(lines[first]).empty()) ++first;
  if (first == lines.size()) throw SchemaError(origin + ": missing header");
  auto header = split(trim(lines[first]), ',');
  std::unordered_map<std::string, std::size_t> col;
  for (std::size_t i = 0; i < header.size(); ++i) col[trim(header[i])] = i;
  for (const char* req : {"agent_id", "frame", "x", "y", "velocity", "heading"})
    if (!col.count(req)) throw SchemaError(origin + ": missing mandatory column '" + req + "'");
  auto opt = [&](const char* name) -> long {
    auto it = col.find(name);
    return it == col.end() ? -1 : static_cast<long>(it->second);
  };
  const long c_lane = opt("lane_id"), c_acc = opt("acceleration"), c_cls = opt("agent_class");
  for (std::size_t li = first + 1; li < lines.size(); ++li) {
    std::string line = lines[li];
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    const auto f = split(line, ',');
    try {
      if (f.size() != header.size())
        throw InputError("expected " + std::to_string(header.size()) + " fields, got " +
                         std::to_string(f.size()));
      AgentState s;
      s.agent_id = trim(f[col["agent_id"]]);
      s.frame = parse_int(f[col["frame"]], "frame");
      s.x = parse_double(f[col["x"]], "x");
      s.y = parse_double(f[col["y"]], "y");
      s.velocity = parse_double(f[col["velocity"]], "velocity");
      s.heading = parse_double(f[col["heading"]], "heading");
      if (c_lane >= 0 && !trim(f[static_cast<std::size_t>(c_lane)]).empty())
        s.lane_id = static_cast<int>(parse_int(f[static_cast<std::size_t>(c_lane)], "lane_id"));
      if (c_acc >= 0 && !trim(f[static_cast<std::size_t>(c_acc)]).empty())
        s.acceleration = parse_double(f[static_cast<std::size_t>(c_acc)], "acceleration");
      if (c_cls >= 0 && !trim(f[static_cast<std::size_t>(c_cls)]).empty()) {
        try {
          s.agent_class = agent_class_from_string(trim(f[static_cast<std::size_t>(c_cls)]));
        } catch (const SchemaError& e) {
          throw InputError(e.what());
        }
      }
      check_state(s);
      out.states.push_back(std::move(s));
      rows.push_back(li + 1);
    } catch (const InputError& e) {
      out.rejected.push_back({li + 1, e.what()});
    }
  }
  finish(out, rows, origin);
  return out;
}

LoadResult parse_jsonl(std::string_view text, const std::string& origin) {
  LoadResult out;
  std::vector<std::size_t> rows;
  auto lines = split(text, '\n');
  for (std::size_t li = 0; li < lines.size(); ++li) {
    const std::string line = trim(lines[li]);
    if (line.empty()) continue;
    try {
      nlohmann::json j;
      try {
        j = nlohmann::json::parse(line);
      } catch (const nlohmann::json::exception& e) {
        throw InputError(std::string("malformed JSON: ") + e.what());
      }
      for (const char* req : {"agent_id", "frame", "x", "y", "velocity", "heading"})
        if (!j.contains(req)) throw SchemaError(origin + ": line " + std::to_string(li + 1) +
                                                " lacks mandatory key '" + req + "'");
      AgentState s;
      try {
        s.agent_id = j["agent_id"].is_string() ? j["agent_id"].get<std::string>() : j["agent_id"].dump();
        s.frame = j["frame"].get<std::int64_t>();
        s.x = j["x"].get<double>();
        s.y = j["y"].get<double>();
        s.velocity = j["velocity"].get<double>();
        s.heading = j["heading"].get<double>();
        if (j.contains("lane_id") && !j["lane_id"].is_null()) s.lane_id = j["lane_id"].get<int>();
        if (j.contains("acceleration") && !j["acceleration"].is_null())
          s.acceleration = j["acceleration"].get<double>();
        if (j.contains("agent_class") && !j["agent_class"].is_null())
          s.agent_class = agent_class_from_string(j["agent_class"].get<std::string>());
      } catch (const nlohmann::json::exception& e) {
        throw InputError(std::string("bad field: ") + e.what());
      } catch (const SchemaError& e) {
        throw InputError(e.what());
      }
      check_state(s);
      out.states.push_back(std::move(s));
      rows.push_back(li + 1);
    } catch (const InputError& e) {
      out.rejected.push_back({li + 1, e.what()});
    }
  }
  finish(out, rows, origin);
  return out;
}

}  // namespace

TrajectoryFormat trajectory_format_from_string(std::string_view s) {
  if (s == "csv" || s == "csv_ngsim_like") return TrajectoryFormat::csv;
  if (s == "jsonl") return TrajectoryFormat::jsonl;
  throw ConfigError("unknown trajectory format '" + std::string(s) + "'");
}

LoadResult parse_trajectories(std::string_view text, TrajectoryFormat format, const std::string& origin) {
  return format == TrajectoryFormat::csv ? parse_csv(text, origin) : parse_jsonl(text, origin);
}

LoadResult load_trajectories(const std::filesystem::path& path, TrajectoryFormat format) {
  if (!std::filesystem::exists(path)) throw IoError("trajectory file not found: " + path.string());
  return parse_trajectories(read_file(path), format, path.string());
}

std::string render_trajectories_csv(const std::vector<AgentState>& states) {
  std::string out = "agent_id,frame,x,y,velocity,heading,lane_id,acceleration,agent_class\n";
  for (const auto& s : states) {
    out += s.agent_id;
    out += ',' + std::to_string(s.frame);
    out += ',' + format_fixed(s.x, 4);
    out += ',' + format_fixed(s.y, 4);
    out += ',' + format_fixed(s.velocity, 4);
    out += ',' + format_fixed(s.heading, 6);
    out += ',' + (s.lane_id ? std::to_string(*s.lane_id) : std::string());
    out += ',' + format_fixed(s.acceleration, 4);
    out += ',' + std::string(to_string(s.agent_class));
    out += '\n';
  }
  return out;
}

std::vector<AgentState> resample(const std::vector<AgentState>& states, double native_hz,
                                 double target_hz) {
  if (native_hz <= 0 || target_hz <= 0) throw ConfigError("sampling rates must be positive");
  if (native_hz == target_hz) return states;
  std::map<std::string, std::vector<const AgentState*>> tracks;
  for (const auto& s : states) tracks[s.agent_id].push_back(&s);
  std::vector<AgentState> out;
  for (auto& [id, track] : tracks) {
    std::sort(track.begin(), track.end(), [](auto* a, auto* b) { return a->frame < b->frame; });
    const double t0 = static_cast<double>(track.front()->frame) / native_hz;
    const double t1 = static_cast<double>(track.back()->frame) / native_hz;
    const auto f0 = static_cast<std::int64_t>(std::ceil(t0 * target_hz - 1e-9));
    const auto f1 = static_cast<std::int64_t>(std::floor(t1 * target_hz + 1e-9));
    std::size_t seg = 0;
    for (std::int64_t f = f0; f <= f1; ++f) {
      const double nf = static_cast<double>(f) / target_hz * native_hz;  // native frame coordinate
      while (seg + 1 < track.size() && static_cast<double>(track[seg + 1]->frame) < nf - 1e-9) ++seg;
      const AgentState& a = *track[seg];
      if (std::abs(static_cast<double>(a.frame) - nf) < 1e-9) {
        AgentState s = a;
        s.frame = f;
        out.push_back(std::move(s));
        continue;
      }
      if (seg + 1 >= track.size()) break;
      const AgentState& b = *track[seg + 1];
      if (b.frame - a.frame != 1 || static_cast<double>(a.frame) > nf) continue;
      const double w = nf - static_cast<double>(a.frame);
      AgentState s = a;
      s.frame = f;
      s.x = a.x + w * (b.x - a.x);
      s.y = a.y + w * (b.y - a.y);
      s.velocity = a.velocity + w * (b.velocity - a.velocity);
      s.acceleration = a.acceleration + w * (b.acceleration - a.acceleration);
      s.heading = wrap_angle(a.heading + w * wrap_angle(b.heading - a.heading));
      s.lane_id = w < 0.5 ? a.lane_id : b.lane_id;
      out.push_back(std::move(s));
    }
  }
  return out;
}

}  // namespace cotdrive::ingest
