#include <algorithm>
#include <cmath>
#include <map>

#include "cotdrive/annotate/teacher.hpp"
#include "cotdrive/core/rng.hpp"
#include "cotdrive/core/text.hpp"
#include "cotdrive/ingest/windows.hpp"

namespace cotdrive::annotate {

namespace {

std::string fmt2(double v) { return format_fixed(v, 2); }

struct Stats {
  std::map<ingest::AgentClass, int> counts;
  double mean_speed = 0.0;
  double nearest = -1.0;
  std::string nearest_class;
  int within_30 = 0;
  int vulnerable_near = 0;
};

Stats stats_of(const ingest::SceneWindow& w) {
  Stats s;
  const auto& t = w.anchor_state();
  for (std::size_t i = 0; i < w.agents.size(); ++i) {
    const auto& a = w.agents[i];
    const auto& st = a.states.back();
    ++s.counts[a.agent_class];
    s.mean_speed += st.velocity;
    if (i == 0) continue;
    const double d = std::hypot(st.x - t.x, st.y - t.y);
    if (s.nearest < 0 || d < s.nearest) {
      s.nearest = d;
      s.nearest_class = std::string(ingest::to_string(a.agent_class));
    }
    if (d <= 30.0) ++s.within_30;
    if (d <= 15.0 && a.agent_class != ingest::AgentClass::vehicle) ++s.vulnerable_near;
  }
  s.mean_speed /= static_cast<double>(w.agents.size());
  return s;
}

std::string lateral_phrase(ingest::Lateral l) {
  switch (l) {
    case ingest::Lateral::left: return "make a left lane change";
    case ingest::Lateral::right: return "make a right lane change";
    case ingest::Lateral::straight: return "keep lane";
  }
  return {};
}

std::string longitudinal_phrase(ingest::Longitudinal l) {
  switch (l) {
    case ingest::Longitudinal::accelerate: return "accelerate";
    case ingest::Longitudinal::maintain: return "maintain speed";
    case ingest::Longitudinal::decelerate: return "decelerate";
  }
  return {};
}

}  // namespace

MockTeacher::MockTeacher(ingest::SceneWindow window, std::uint64_t seed)
    : window_(window.transform ? std::move(window) : ingest::normalize_to_target_frame(window)), seed_(seed) {}

std::unique_ptr<TeacherClient> mock_teacher(const ingest::SceneWindow& window, std::uint64_t seed) {
  return std::make_unique<MockTeacher>(window, seed);
}

std::string MockTeacher::send(const std::vector<ChatMessage>& transcript) {
  const auto users = std::count_if(transcript.begin(), transcript.end(),
                                   [](const ChatMessage& m) { return m.role == "user"; });
  const auto idx = std::clamp<long>(static_cast<long>(users) - 1, 0, 3);
  return response(kSteps[static_cast<std::size_t>(idx)]);
}

std::string MockTeacher::response(Step step) const {
  const auto& w = window_;
  const Stats s = stats_of(w);
  const auto& t = w.anchor_state();
  const std::string cls(ingest::to_string(w.target().agent_class));
  Rng rng(seed_ ^ fnv1a64(w.scene_ref) ^ (static_cast<std::uint64_t>(step) * 0x9e3779b97f4a7c15ULL));

  switch (step) {
    case Step::background_statistics: {
      const char* density = s.within_30 >= 4 ? "dense" : (s.within_30 >= 2 ? "moderate" : "light");
      std::string counts;
      for (const auto& [c, n] : s.counts) {
        if (!counts.empty()) counts += ", ";
        counts += std::to_string(n) + " " + std::string(ingest::to_string(c)) + (n == 1 ? "" : "s");
      }
      static const char* openers[] = {"Scene overview:", "Background:", "Current situation:"};
      return std::string(openers[rng.below(3)]) + " " + density + " traffic with " +
             std::to_string(w.agents.size()) + (w.agents.size() == 1 ? " agent" : " agents") + " (" + counts +
             "). Mean speed " + fmt2(s.mean_speed) + " m/s. The target " + cls + " moves at " +
             fmt2(t.velocity) + " m/s with acceleration " + fmt2(t.acceleration) + " m/s^2.";
    }
    case Step::interaction_analysis: {
      if (w.agents.size() == 1)
        return "The target " + cls + " is alone in the observed area, so there are no interactions to consider.";
      return "The target " + cls + " shares the scene with " + std::to_string(w.agents.size() - 1) +
             " other agents; " + std::to_string(s.within_30) + " of them are within 30 m. The nearest is a " +
             s.nearest_class + " at " + fmt2(s.nearest) + " m, which is the key interaction for the next maneuver.";
    }
    case Step::risk_assessment: {
      double urgency = 0.0;
      if (s.nearest >= 0) urgency = std::min(1.0, 10.0 / std::max(s.nearest, 1.0));
      urgency = std::min(1.0, urgency + 0.15 * s.vulnerable_near);
      const char* level = urgency >= 0.6 ? "high" : (urgency >= 0.3 ? "moderate" : "low");
      std::string out = "Urgency score " + fmt2(urgency) + " (" + level + ").";
      if (s.vulnerable_near > 0)
        out += " " + std::to_string(s.vulnerable_near) + " vulnerable road users are within 15 m of the target.";
      else if (w.agents.size() == 1)
        out += " No other agents are present, so the collision risk is minimal.";
      else
        out += " The closest " + s.nearest_class + " at " + fmt2(s.nearest) + " m sets the main risk.";
      return out;
    }
    case Step::prediction: {
      const ingest::ManeuverLabel m = w.maneuver ? *w.maneuver : ingest::label_maneuver(w);
      const int seconds = static_cast<int>(std::lround(w.future_length() / w.sampling_rate_hz));
      const auto& prev = w.target().states.size() >= 2 ? w.target().states[w.target().states.size() - 2] : t;
      const double vx = (t.x - prev.x) * w.sampling_rate_hz, vy = (t.y - prev.y) * w.sampling_rate_hz;
      std::string coords;
      for (int k = 1; k <= seconds; ++k) {
        if (k > 1) coords += ", ";
        coords += "(" + fmt2(t.x + vx * k) + ", " + fmt2(t.y + vy * k) + ")";
      }
      return "The target " + cls + " will " + lateral_phrase(m.lateral) + " and " +
             longitudinal_phrase(m.longitudinal) + ". Predicted maneuver: " +
             std::string(ingest::to_string(m.lateral)) + "/" + std::string(ingest::to_string(m.longitudinal)) +
             ". Predicted coordinates: [" + coords + "]. Summary: the target " + cls + " at " +
             fmt2(t.velocity) + " m/s will " + lateral_phrase(m.lateral) + " and " +
             longitudinal_phrase(m.longitudinal) + " given the surrounding traffic.";
    }
  }
  return {};
}

}  // namespace cotdrive::annotate
