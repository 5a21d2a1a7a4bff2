#pragma once

#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "cotdrive/core/rng.hpp"
#include "cotdrive/ingest/types.hpp"

namespace cotdrive::testutil {

inline ingest::AgentState make_state(const std::string& id, std::int64_t frame, double x, double y,
                                     double v = 0.0, double heading = 0.0) {
  ingest::AgentState s;
  s.agent_id = id;
  s.frame = frame;
  s.x = x;
  s.y = y;
  s.velocity = v;
  s.heading = heading;
  return s;
}

/// Straight constant-velocity track along `heading`.
inline std::vector<ingest::AgentState> straight_track(const std::string& id, std::int64_t first, int count,
                                                      double x0, double y0, double v, double heading,
                                                      double hz = 5.0) {
  std::vector<ingest::AgentState> out;
  for (int k = 0; k < count; ++k) {
    const double d = v * k / hz;
    out.push_back(make_state(id, first + k, x0 + d * std::cos(heading), y0 + d * std::sin(heading), v, heading));
  }
  return out;
}

/// Random window in scene coordinates: target plus `neighbours` agents with a
/// random validity mask (always valid at the anchor).
inline ingest::SceneWindow random_window(Rng& rng, int H, int F, int neighbours, double hz = 5.0) {
  ingest::SceneWindow w;
  w.target_id = "t";
  w.anchor_frame = 1000;
  w.sampling_rate_hz = hz;
  w.scene_ref = "rand@" + std::to_string(rng.next_u64() % 100000);
  const double ox = rng.uniform(-200, 200), oy = rng.uniform(-200, 200);
  const double h0 = rng.uniform(-std::numbers::pi, std::numbers::pi);
  auto track = [&](const std::string& id, double x, double y, double heading, double v, int count,
                   std::int64_t first) {
    std::vector<ingest::AgentState> s;
    double px = x, py = y, hh = heading;
    for (int k = 0; k < count; ++k) {
      auto st = make_state(id, first + k, px, py, v, ingest::wrap_angle(hh));
      st.acceleration = rng.normal(0.0, 0.5);
      s.push_back(st);
      hh += rng.normal(0.0, 0.02);
      px += v / hz * std::cos(hh) + rng.normal(0.0, 0.05);
      py += v / hz * std::sin(hh) + rng.normal(0.0, 0.05);
      v = std::max(0.0, v + rng.normal(0.0, 0.3));
    }
    return s;
  };
  auto all = track("t", ox, oy, h0, rng.uniform(0.0, 20.0), H + F, w.anchor_frame - H + 1);
  ingest::AgentHistory target;
  target.agent_id = "t";
  target.states.assign(all.begin(), all.begin() + H);
  target.valid.assign(static_cast<std::size_t>(H), 1);
  w.agents.push_back(target);
  w.future.assign(all.begin() + H, all.end());
  for (int n = 0; n < neighbours; ++n) {
    ingest::AgentHistory a;
    a.agent_id = "n" + std::to_string(n);
    a.agent_class = static_cast<ingest::AgentClass>(rng.below(3));
    a.states = track(a.agent_id, ox + rng.uniform(-40, 40), oy + rng.uniform(-40, 40),
                     rng.uniform(-3.0, 3.0), rng.uniform(0.0, 15.0), H, w.anchor_frame - H + 1);
    for (auto& s : a.states) s.agent_class = a.agent_class;
    a.valid.assign(static_cast<std::size_t>(H), 1);
    for (int k = 0; k < H - 1; ++k)
      if (rng.bernoulli(0.15)) {
        a.valid[static_cast<std::size_t>(k)] = 0;
        auto& s = a.states[static_cast<std::size_t>(k)];
        s.x = s.y = s.velocity = s.heading = s.acceleration = 0.0;
      }
    w.agents.push_back(std::move(a));
  }
  return w;
}

}  // namespace cotdrive::testutil
