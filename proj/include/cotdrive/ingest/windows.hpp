#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "cotdrive/ingest/types.hpp"

namespace cotdrive::ingest {

struct SegmentOptions {
  double history_seconds = 3.0;
  double future_seconds = 5.0;
  double hz = 5.0;
  int stride = 1;
  double radius = 60.0;
  int max_neighbors = 16;

  /// t_h * hz + 1
  int history_frames() const;
  /// t_f * hz
  int future_frames() const;
  void validate() const;
};

struct SkipReport {
  /// Agents whose track is shorter than the window span.
  std::size_t short_tracks = 0;
  std::vector<std::string> short_track_ids;
};

struct SegmentResult {
  std::vector<SceneWindow> windows;
  SkipReport skipped;
};

/// Cuts windows for every agent (as target) whose track covers the full span,
/// advancing the anchor by `stride` frames. Input must already be on the
/// `hz` frame grid. Windows are ordered by (target id, anchor frame).
SegmentResult segment_windows(const std::vector<AgentState>& states, const SegmentOptions& options);

struct LabelOptions {
  double lat_threshold = 1.75;
  double speed_ratio_low = 0.8;
  double speed_ratio_high = 1.25;
};

/// Ground-truth maneuver from the target's future in its own anchor heading
/// frame; left means positive lateral offset.
ManeuverLabel label_maneuver(const SceneWindow& window, const LabelOptions& options = {});

/// Signed lateral offset of the future endpoint in the anchor heading frame.
double lateral_offset(const SceneWindow& window);

/// Target at the origin heading along +x. Composes with any existing transform
/// so `denormalize` always returns scene coordinates.
SceneWindow normalize_to_target_frame(const SceneWindow& window);
SceneWindow denormalize(const SceneWindow& window);

struct SplitRatios {
  double train = 0.7;
  double val = 0.1;
  double test = 0.2;
};

struct SplitIndices {
  std::vector<std::size_t> train, val, test;
};

/// Seeded disjoint partition of [0, n); parts are returned in ascending order.
SplitIndices split_dataset(std::size_t n, const SplitRatios& ratios, std::uint64_t seed);

template <typename T>
std::vector<T> select(const std::vector<T>& items, const std::vector<std::size_t>& idx) {
  std::vector<T> out;
  out.reserve(idx.size());
  for (auto i : idx) out.push_back(items.at(i));
  return out;
}

}  // namespace cotdrive::ingest
