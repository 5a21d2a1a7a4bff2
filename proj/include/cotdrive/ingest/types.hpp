#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace cotdrive::ingest {

enum class AgentClass { vehicle, pedestrian, bicycle };

std::string_view to_string(AgentClass c);
AgentClass agent_class_from_string(std::string_view s);

/// One agent at one frame. Positions in meters, heading in (-pi, pi].
struct AgentState {
  std::string agent_id;
  AgentClass agent_class = AgentClass::vehicle;
  std::int64_t frame = 0;
  double x = 0.0;
  double y = 0.0;
  double velocity = 0.0;
  double heading = 0.0;
  std::optional<int> lane_id;
  double acceleration = 0.0;

  bool operator==(const AgentState&) const = default;
};

enum class Lateral { left = 0, straight = 1, right = 2 };
enum class Longitudinal { accelerate = 0, maintain = 1, decelerate = 2 };

inline constexpr int kManeuverCount = 9;

struct ManeuverLabel {
  Lateral lateral = Lateral::straight;
  Longitudinal longitudinal = Longitudinal::maintain;

  int joint_index() const { return 3 * static_cast<int>(lateral) + static_cast<int>(longitudinal); }
  static ManeuverLabel from_index(int joint_index);

  bool operator==(const ManeuverLabel&) const = default;
};

std::string_view to_string(Lateral l);
std::string_view to_string(Longitudinal l);
Lateral lateral_from_string(std::string_view s);
Longitudinal longitudinal_from_string(std::string_view s);
/// e.g. "left/maintain".
std::string maneuver_name(int joint_index);

/// Rigid map from scene coordinates into a target-centred frame where the
/// target sits at the origin heading along +x.
struct FrameTransform {
  double origin_x = 0.0;
  double origin_y = 0.0;
  double heading = 0.0;

  std::array<double, 2> to_local(double x, double y) const;
  std::array<double, 2> to_world(double x, double y) const;
  double heading_to_local(double h) const;
  double heading_to_world(double h) const;

  bool operator==(const FrameTransform&) const = default;
};

/// Wrap an angle into (-pi, pi].
double wrap_angle(double a);

/// An agent's history inside a window. Frames where the agent is absent hold
/// a zero-filled state and valid = 0.
struct AgentHistory {
  std::string agent_id;
  AgentClass agent_class = AgentClass::vehicle;
  std::vector<AgentState> states;
  std::vector<std::uint8_t> valid;

  bool operator==(const AgentHistory&) const = default;
};

/// The unit of training and inference: one target's history with its
/// neighbours, and the target's future.
struct SceneWindow {
  std::string scene_ref;
  std::string target_id;
  std::int64_t anchor_frame = 0;
  double sampling_rate_hz = 5.0;
  /// Index 0 is the target.
  std::vector<AgentHistory> agents;
  std::vector<AgentState> future;
  std::optional<ManeuverLabel> maneuver;
  /// Present once normalized; maps the stored coordinates back to the scene.
  std::optional<FrameTransform> transform;

  const AgentHistory& target() const { return agents.at(0); }
  const AgentState& anchor_state() const { return agents.at(0).states.back(); }
  int history_length() const { return agents.empty() ? 0 : static_cast<int>(agents[0].states.size()); }
  int future_length() const { return static_cast<int>(future.size()); }
  int neighbor_count() const { return agents.empty() ? 0 : static_cast<int>(agents.size()) - 1; }

  bool operator==(const SceneWindow&) const = default;
};

}  // namespace cotdrive::ingest
