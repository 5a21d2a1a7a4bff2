#include "cotdrive/ingest/synthetic.hpp"

#include <cmath>
#include <numbers>

#include "cotdrive/core/error.hpp"
#include "cotdrive/core/rng.hpp"
#include "cotdrive/core/text.hpp"
#include "cotdrive/ingest/loader.hpp"

namespace cotdrive::ingest {

namespace {

constexpr double kLaneWidth = 3.5;
constexpr double kPi = std::numbers::pi;

struct Placement {
  double ox, oy, rot;

  void apply(AgentState& s) const {
    const double c = std::cos(rot), sn = std::sin(rot);
    const double x = c * s.x - sn * s.y + ox;
    const double y = sn * s.x + c * s.y + oy;
    s.x = x;
    s.y = y;
    s.heading = wrap_angle(s.heading + rot);
  }
};

/// Speed at time t (s, anchor = 0) for a longitudinal maneuver starting at `onset`.
struct SpeedProfile {
  double v0 = 10.0;
  double rate = 0.0;  // signed m/s^2
  double onset = 0.0;

  double at(double t) const {
    const double v = v0 + rate * std::max(0.0, t - onset);
    return std::max(0.0, v);
  }
};

Longitudinal pick_longitudinal(Rng& rng) { return static_cast<Longitudinal>(rng.below(3)); }

SpeedProfile make_speed(Rng& rng, double v0, Longitudinal lon) {
  SpeedProfile p;
  p.v0 = v0;
  p.onset = -rng.uniform(0.0, 0.6);
  switch (lon) {
    case Longitudinal::accelerate: p.rate = v0 * rng.uniform(0.14, 0.2); break;
    case Longitudinal::decelerate: p.rate = -v0 * rng.uniform(0.11, 0.16); break;
    case Longitudinal::maintain: p.rate = 0.0; break;
  }
  return p;
}

/// Integrates a track on a fine sub-grid given speed and heading as functions of time.
template <typename HeadingFn>
std::vector<AgentState> integrate(const std::string& id, AgentClass cls, std::int64_t first_frame, int count,
                                  double t0, double hz, const SpeedProfile& speed, HeadingFn heading_at,
                                  double x0, double y0) {
  std::vector<AgentState> out;
  const int sub = 20;
  const double dt = 1.0 / (hz * sub);
  double x = x0, y = y0;
  for (int k = 0; k < count; ++k) {
    const double t = t0 + k / hz;
    AgentState s;
    s.agent_id = id;
    s.agent_class = cls;
    s.frame = first_frame + k;
    s.x = x;
    s.y = y;
    s.velocity = speed.at(t);
    s.heading = wrap_angle(heading_at(t));
    s.acceleration = (speed.at(t + 0.5 * dt) - speed.at(t - 0.5 * dt)) / dt;
    out.push_back(s);
    for (int j = 0; j < sub; ++j) {
      const double tm = t + (j + 0.5) * dt;
      const double v = speed.at(tm), h = heading_at(tm);
      x += v * std::cos(h) * dt;
      y += v * std::sin(h) * dt;
    }
  }
  return out;
}

struct SceneBuilder {
  const SynthOptions& opt;
  Rng& rng;
  int H, F;
  std::int64_t base;
  std::string ref;

  double t_of(int k) const { return (k - (H - 1)) / opt.hz; }

  void noise(std::vector<AgentState>& track) const {
    for (auto& s : track) {
      s.x += rng.normal(0.0, opt.position_noise);
      s.y += rng.normal(0.0, opt.position_noise);
    }
  }

  /// Lane change with a logistic lateral profile centred `centre` s after the anchor.
  std::vector<AgentState> highway_target(const std::string& id, ManeuverLabel m, int lane) {
    const double v0 = rng.uniform(8.0, 20.0);
    const SpeedProfile speed = make_speed(rng, v0, m.longitudinal);
    const double dir = m.lateral == Lateral::left ? 1.0 : (m.lateral == Lateral::right ? -1.0 : 0.0);
    // The change starts after the anchor so the anchor heading stays along the lane.
    const double centre = rng.uniform(2.0, 2.5);
    const double k = rng.uniform(2.4, 3.0);
    auto lateral = [&](double t) { return dir * kLaneWidth / (1.0 + std::exp(-k * (t - centre))); };
    auto lateral_rate = [&](double t) {
      const double e = std::exp(-k * (t - centre));
      return dir * kLaneWidth * k * e / ((1.0 + e) * (1.0 + e));
    };
    // Lateral motion is prescribed directly; longitudinal by integrating speed.
    std::vector<AgentState> out;
    double x = 0.0;
    const double y0 = lane * kLaneWidth;
    const int sub = 20;
    const double dt = 1.0 / (opt.hz * sub);
    for (int i = 0; i < H + F; ++i) {
      const double t = t_of(i);
      AgentState s;
      s.agent_id = id;
      s.agent_class = AgentClass::vehicle;
      s.frame = base + i;
      s.x = x;
      s.y = y0 + lateral(t);
      const double vx = speed.at(t);
      const double vy = vx > 0.05 ? lateral_rate(t) : 0.0;
      s.velocity = std::hypot(vx, vy);
      s.heading = std::atan2(vy, std::max(vx, 1e-9));
      s.acceleration = (speed.at(t + 0.5 * dt) - speed.at(t - 0.5 * dt)) / dt;
      s.lane_id = lane + static_cast<int>(std::lround(lateral(t) / kLaneWidth));
      out.push_back(s);
      for (int j = 0; j < sub; ++j) x += speed.at(t + (j + 0.5) * dt) * dt;
    }
    return out;
  }

  /// Urban turn: heading sweeps +-pi/2 over `duration` seconds.
  std::vector<AgentState> urban_target(const std::string& id, AgentClass cls, ManeuverLabel m) {
    double lo = 5.0, hi = 12.0;
    if (cls == AgentClass::pedestrian) lo = 1.0, hi = 2.0;
    if (cls == AgentClass::bicycle) lo = 3.0, hi = 6.0;
    const double v0 = rng.uniform(lo, hi);
    const SpeedProfile speed = make_speed(rng, v0, m.longitudinal);
    const double dir = m.lateral == Lateral::left ? 1.0 : (m.lateral == Lateral::right ? -1.0 : 0.0);
    const double start = rng.uniform(0.0, 0.4);
    const double duration = rng.uniform(1.5, 2.5);
    auto heading = [=](double t) {
      const double u = std::clamp((t - start) / duration, 0.0, 1.0);
      return dir * 0.5 * kPi * u;
    };
    return integrate(id, cls, base, H + F, t_of(0), opt.hz, speed, heading, 0.0, 0.0);
  }

  std::vector<AgentState> neighbour(const std::string& id, AgentClass cls, double x0, double y0,
                                    double heading, double v) {
    SpeedProfile speed;
    speed.v0 = v;
    // Some neighbours enter the scene mid-history; all are present at the anchor.
    int first = 0;
    if (rng.bernoulli(0.2)) first = static_cast<int>(rng.below(static_cast<std::uint64_t>(H)));
    const double t0 = t_of(first);
    const double xs = x0 + v * std::cos(heading) * t0;
    const double ys = y0 + v * std::sin(heading) * t0;
    return integrate(id, cls, base + first, H - first, t0, opt.hz, speed, [=](double) { return heading; }, xs, ys);
  }
};

std::string scene_id(SynthProfile p, std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%c%06zu", p == SynthProfile::highway ? 'h' : 'u', i);
  return buf;
}

}  // namespace

std::string_view to_string(SynthProfile p) { return p == SynthProfile::highway ? "highway" : "urban"; }

SynthProfile synth_profile_from_string(std::string_view s) {
  if (s == "highway") return SynthProfile::highway;
  if (s == "urban") return SynthProfile::urban;
  throw ConfigError("unknown synthetic profile '" + std::string(s) + "'");
}

SynthDataset generate_synthetic(const SynthOptions& opt) {
  if (opt.scenes == 0) throw ArgumentError("synth: n must be positive");
  if (opt.hz <= 0 || opt.history_seconds <= 0 || opt.future_seconds <= 0)
    throw ArgumentError("synth: horizons and rate must be positive");
  const int H = static_cast<int>(std::lround(opt.history_seconds * opt.hz)) + 1;
  const int F = static_cast<int>(std::lround(opt.future_seconds * opt.hz));
  const std::int64_t span = H + F + 8;

  SynthDataset data;
  Rng master(opt.seed);
  for (std::size_t i = 0; i < opt.scenes; ++i) {
    Rng rng = master.fork(i);
    const std::string ref = scene_id(opt.profile, i);
    SceneBuilder b{opt, rng, H, F, static_cast<std::int64_t>(i) * span, ref};

    ManeuverLabel m{static_cast<Lateral>(rng.below(3)), pick_longitudinal(rng)};
    AgentClass cls = AgentClass::vehicle;
    std::vector<AgentState> target;
    std::vector<std::vector<AgentState>> others;
    const int n_nb = static_cast<int>(rng.below(static_cast<std::uint64_t>(opt.max_neighbors) + 1));

    if (opt.profile == SynthProfile::highway) {
      const int lane = static_cast<int>(rng.below(3));
      target = b.highway_target(ref, m, lane);
      const auto& anchor = target[static_cast<std::size_t>(H - 1)];
      for (int k = 0; k < n_nb; ++k) {
        const int nl = static_cast<int>(rng.below(4)) - 1 + lane - 1;
        double dx = rng.uniform(8.0, 50.0) * (rng.bernoulli(0.5) ? 1.0 : -1.0);
        if (nl == lane && std::abs(dx) < 12.0) dx = std::copysign(12.0, dx);
        others.push_back(b.neighbour(ref + "n" + std::to_string(k), AgentClass::vehicle, anchor.x + dx,
                                     nl * kLaneWidth, 0.0, rng.uniform(8.0, 20.0)));
      }
    } else {
      const double u = rng.uniform();
      cls = u < 0.5 ? AgentClass::vehicle : (u < 0.75 ? AgentClass::pedestrian : AgentClass::bicycle);
      target = b.urban_target(ref, cls, m);
      const auto& anchor = target[static_cast<std::size_t>(H - 1)];
      for (int k = 0; k < n_nb; ++k) {
        const double w = rng.uniform();
        const AgentClass nc = w < 0.4 ? AgentClass::vehicle : (w < 0.7 ? AgentClass::pedestrian : AgentClass::bicycle);
        const double v = nc == AgentClass::pedestrian ? rng.uniform(0.5, 2.0)
                         : nc == AgentClass::bicycle  ? rng.uniform(3.0, 6.0)
                                                      : rng.uniform(0.0, 12.0);
        const double r = rng.uniform(4.0, 40.0), a = rng.uniform(-kPi, kPi);
        const double h = std::round(rng.uniform(-2.0, 2.0)) * 0.5 * kPi;
        others.push_back(b.neighbour(ref + "n" + std::to_string(k), nc, anchor.x + r * std::cos(a),
                                     anchor.y + r * std::sin(a), h, v));
      }
    }

    const Placement place{rng.uniform(-500.0, 500.0), rng.uniform(-500.0, 500.0), rng.uniform(-kPi, kPi)};
    b.noise(target);
    for (auto& s : target) place.apply(s);
    data.states.insert(data.states.end(), target.begin(), target.end());
    for (auto& track : others) {
      b.noise(track);
      for (auto& s : track) place.apply(s);
      data.states.insert(data.states.end(), track.begin(), track.end());
    }
    data.labels.push_back({ref, ref, cls, m});
  }
  return data;
}

nlohmann::json synth_label_to_json(const SynthLabel& l) {
  return {{"scene_ref", l.scene_ref},
          {"target_id", l.target_id},
          {"agent_class", std::string(to_string(l.agent_class))},
          {"lateral", std::string(to_string(l.maneuver.lateral))},
          {"longitudinal", std::string(to_string(l.maneuver.longitudinal))},
          {"joint_index", l.maneuver.joint_index()}};
}

SynthLabel synth_label_from_json(const nlohmann::json& j) {
  SynthLabel l;
  l.scene_ref = j.at("scene_ref").get<std::string>();
  l.target_id = j.at("target_id").get<std::string>();
  l.agent_class = agent_class_from_string(j.at("agent_class").get<std::string>());
  l.maneuver = ManeuverLabel{lateral_from_string(j.at("lateral").get<std::string>()),
                             longitudinal_from_string(j.at("longitudinal").get<std::string>())};
  return l;
}

void write_synthetic(const std::filesystem::path& dir, const SynthDataset& data, const SynthOptions& options) {
  std::filesystem::create_directories(dir);
  write_file(dir / "tracks.csv", render_trajectories_csv(data.states));
  std::string labels;
  for (const auto& l : data.labels) labels += synth_label_to_json(l).dump() + "\n";
  write_file(dir / "labels.jsonl", labels);
  nlohmann::json manifest = {{"profile", std::string(to_string(options.profile))},
                             {"scenes", options.scenes},
                             {"seed", options.seed},
                             {"hz", options.hz},
                             {"history_seconds", options.history_seconds},
                             {"future_seconds", options.future_seconds},
                             {"rows", data.states.size()},
                             {"files", {"tracks.csv", "labels.jsonl"}}};
  write_file(dir / "manifest.json", manifest.dump(2) + "\n");
}

std::vector<SynthLabel> read_synth_labels(const std::filesystem::path& path) {
  std::vector<SynthLabel> out;
  std::size_t n = 0;
  for (const auto& line : split(read_file(path), '\n')) {
    ++n;
    if (trim(line).empty()) continue;
    try {
      out.push_back(synth_label_from_json(nlohmann::json::parse(line)));
    } catch (const std::exception& e) {
      throw ParseError(path.string() + ":" + std::to_string(n) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace cotdrive::ingest
