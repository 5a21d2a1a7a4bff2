#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "cotdrive/ingest/types.hpp"

namespace cotdrive::ingest {

enum class SynthProfile { highway, urban };

std::string_view to_string(SynthProfile p);
SynthProfile synth_profile_from_string(std::string_view s);

struct SynthOptions {
  SynthProfile profile = SynthProfile::highway;
  std::size_t scenes = 100;
  std::uint64_t seed = 0;
  double hz = 5.0;
  double history_seconds = 3.0;
  double future_seconds = 5.0;
  int max_neighbors = 6;
  double position_noise = 0.02;
};

struct SynthLabel {
  std::string scene_ref;
  std::string target_id;
  AgentClass agent_class = AgentClass::vehicle;
  ManeuverLabel maneuver;
};

struct SynthDataset {
  std::vector<AgentState> states;
  /// One entry per scene, in scene order.
  std::vector<SynthLabel> labels;
};

/// Each scene holds one target track spanning exactly history + future frames
/// and several history-only neighbours; scenes occupy disjoint frame ranges and
/// carry a random rigid placement. Deterministic in the options.
SynthDataset generate_synthetic(const SynthOptions& options);

nlohmann::json synth_label_to_json(const SynthLabel& l);
SynthLabel synth_label_from_json(const nlohmann::json& j);

/// Writes tracks.csv, labels.jsonl and manifest.json under `dir`.
void write_synthetic(const std::filesystem::path& dir, const SynthDataset& data, const SynthOptions& options);
std::vector<SynthLabel> read_synth_labels(const std::filesystem::path& path);

}  // namespace cotdrive::ingest
