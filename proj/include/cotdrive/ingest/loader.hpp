#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "cotdrive/ingest/types.hpp"

namespace cotdrive::ingest {

enum class TrajectoryFormat { csv, jsonl };

TrajectoryFormat trajectory_format_from_string(std::string_view s);

/// A row that could not be parsed; loading continues without it.
struct RejectedRow {
  std::size_t row = 0;  // 1-based line number in the file
  std::string reason;
};

struct LoadResult {
  /// Sorted by (agent_id, frame).
  std::vector<AgentState> states;
  std::vector<RejectedRow> rejected;
};

/// CSV header: agent_id,frame,x,y,velocity,heading[,lane_id][,acceleration][,agent_class]
/// in any column order. JSONL uses the same keys, one object per line.
/// Throws SchemaError for a missing mandatory column and IntegrityError for
/// a repeated (agent_id, frame) pair.
LoadResult load_trajectories(const std::filesystem::path& path, TrajectoryFormat format);

/// Parses from memory; `origin` names the source in error messages.
LoadResult parse_trajectories(std::string_view text, TrajectoryFormat format,
                              const std::string& origin = "<memory>");

/// Writes states as CSV with the canonical header.
std::string render_trajectories_csv(const std::vector<AgentState>& states);

/// Linear interpolation of every agent's track from `native_hz` onto the
/// `target_hz` frame grid. Samples are only interpolated between native frames
/// that are adjacent; gaps stay gaps. Identity when the rates match.
std::vector<AgentState> resample(const std::vector<AgentState>& states, double native_hz,
                                 double target_hz);

}  // namespace cotdrive::ingest
