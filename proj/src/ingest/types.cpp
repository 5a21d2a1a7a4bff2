#include "cotdrive/ingest/types.hpp"

#include <cmath>
#include <numbers>

#include "cotdrive/core/error.hpp"

namespace cotdrive::ingest {

std::string_view to_string(AgentClass c) {
  switch (c) {
    case AgentClass::vehicle: return "vehicle";
    case AgentClass::pedestrian: return "pedestrian";
    case AgentClass::bicycle: return "bicycle";
  }
  return "vehicle";
}

AgentClass agent_class_from_string(std::string_view s) {
  if (s == "vehicle" || s == "car" || s == "truck") return AgentClass::vehicle;
  if (s == "pedestrian") return AgentClass::pedestrian;
  if (s == "bicycle" || s == "cyclist") return AgentClass::bicycle;
  throw SchemaError("unknown agent_class '" + std::string(s) + "'");
}

ManeuverLabel ManeuverLabel::from_index(int joint_index) {
  if (joint_index < 0 || joint_index >= kManeuverCount)
    throw ArgumentError("maneuver index out of range: " + std::to_string(joint_index));
  return {static_cast<Lateral>(joint_index / 3), static_cast<Longitudinal>(joint_index % 3)};
}

std::string_view to_string(Lateral l) {
  switch (l) {
    case Lateral::left: return "left";
    case Lateral::straight: return "straight";
    case Lateral::right: return "right";
  }
  return "straight";
}

std::string_view to_string(Longitudinal l) {
  switch (l) {
    case Longitudinal::accelerate: return "accelerate";
    case Longitudinal::maintain: return "maintain";
    case Longitudinal::decelerate: return "decelerate";
  }
  return "maintain";
}

Lateral lateral_from_string(std::string_view s) {
  if (s == "left") return Lateral::left;
  if (s == "straight") return Lateral::straight;
  if (s == "right") return Lateral::right;
  throw SchemaError("unknown lateral maneuver '" + std::string(s) + "'");
}

Longitudinal longitudinal_from_string(std::string_view s) {
  if (s == "accelerate") return Longitudinal::accelerate;
  if (s == "maintain") return Longitudinal::maintain;
  if (s == "decelerate") return Longitudinal::decelerate;
  throw SchemaError("unknown longitudinal maneuver '" + std::string(s) + "'");
}

std::string maneuver_name(int joint_index) {
  const auto m = ManeuverLabel::from_index(joint_index);
  return std::string(to_string(m.lateral)) + "/" + std::string(to_string(m.longitudinal));
}

double wrap_angle(double a) {
  constexpr double pi = std::numbers::pi;
  a = std::fmod(a, 2.0 * pi);
  if (a <= -pi) a += 2.0 * pi;
  if (a > pi) a -= 2.0 * pi;
  return a;
}

std::array<double, 2> FrameTransform::to_local(double x, double y) const {
  const double c = std::cos(heading), s = std::sin(heading);
  const double dx = x - origin_x, dy = y - origin_y;
  return {c * dx + s * dy, -s * dx + c * dy};
}

std::array<double, 2> FrameTransform::to_world(double x, double y) const {
  const double c = std::cos(heading), s = std::sin(heading);
  return {origin_x + c * x - s * y, origin_y + s * x + c * y};
}

double FrameTransform::heading_to_local(double h) const { return wrap_angle(h - heading); }
double FrameTransform::heading_to_world(double h) const { return wrap_angle(h + heading); }

}  // namespace cotdrive::ingest
