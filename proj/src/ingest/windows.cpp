#include "cotdrive/ingest/windows.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <unordered_map>

#include "cotdrive/core/error.hpp"
#include "cotdrive/core/rng.hpp"

namespace cotdrive::ingest {

namespace {

int frames_of(double seconds, double hz) {
  const double f = seconds * hz;
  const double r = std::round(f);
  if (std::abs(f - r) > 1e-6)
    throw ConfigError("horizon " + std::to_string(seconds) + " s is not a whole number of frames at " +
                      std::to_string(hz) + " Hz");
  return static_cast<int>(r);
}

AgentState absent_state(const std::string& id, AgentClass cls, std::int64_t frame) {
  AgentState s;
  s.agent_id = id;
  s.agent_class = cls;
  s.frame = frame;
  return s;
}

}  // namespace

int SegmentOptions::history_frames() const { return frames_of(history_seconds, hz) + 1; }
int SegmentOptions::future_frames() const { return frames_of(future_seconds, hz); }

void SegmentOptions::validate() const {
  if (history_seconds <= 0 || future_seconds <= 0) throw ConfigError("t_h and t_f must be positive");
  if (hz <= 0) throw ConfigError("sampling rate must be positive");
  if (stride <= 0) throw ConfigError("stride must be positive");
  if (radius <= 0) throw ConfigError("radius must be positive");
  if (max_neighbors < 0) throw ConfigError("max_neighbors must be non-negative");
  (void)history_frames();
  (void)future_frames();
}

SegmentResult segment_windows(const std::vector<AgentState>& states, const SegmentOptions& options) {
  options.validate();
  const int H = options.history_frames();
  const int F = options.future_frames();

  std::map<std::string, std::vector<const AgentState*>> tracks;
  for (const auto& s : states) tracks[s.agent_id].push_back(&s);
  std::unordered_map<std::int64_t, std::vector<const AgentState*>> by_frame;
  for (const auto& s : states) by_frame[s.frame].push_back(&s);
  for (auto& [id, t] : tracks)
    std::sort(t.begin(), t.end(), [](auto* a, auto* b) { return a->frame < b->frame; });

  SegmentResult result;
  for (const auto& [id, track] : tracks) {
    if (static_cast<int>(track.size()) < H + F) {
      ++result.skipped.short_tracks;
      result.skipped.short_track_ids.push_back(id);
      continue;
    }
    // run[i]: number of consecutive frames ending at track[i].
    std::vector<int> run(track.size(), 1);
    for (std::size_t i = 1; i < track.size(); ++i)
      if (track[i]->frame == track[i - 1]->frame + 1) run[i] = run[i - 1] + 1;
    std::unordered_map<std::int64_t, std::size_t> pos;
    for (std::size_t i = 0; i < track.size(); ++i) pos[track[i]->frame] = i;

    const std::int64_t first = track.front()->frame;
    const std::int64_t last = track.back()->frame;
    for (std::int64_t anchor = first + H - 1; anchor + F <= last; anchor += options.stride) {
      auto end_it = pos.find(anchor + F);
      if (end_it == pos.end() || run[end_it->second] < H + F) continue;
      const std::size_t a_idx = pos.at(anchor);
      const AgentState& tgt = *track[a_idx];

      SceneWindow w;
      w.target_id = id;
      w.anchor_frame = anchor;
      w.sampling_rate_hz = options.hz;
      w.scene_ref = id + "@" + std::to_string(anchor);

      AgentHistory th;
      th.agent_id = id;
      th.agent_class = tgt.agent_class;
      for (int k = H - 1; k >= 0; --k) {
        th.states.push_back(*track[a_idx - static_cast<std::size_t>(k)]);
        th.valid.push_back(1);
      }
      w.agents.push_back(std::move(th));
      for (int k = 1; k <= F; ++k) w.future.push_back(*track[a_idx + static_cast<std::size_t>(k)]);

      std::vector<std::pair<double, const AgentState*>> near;
      for (const AgentState* s : by_frame[anchor]) {
        if (s->agent_id == id) continue;
        const double d = std::hypot(s->x - tgt.x, s->y - tgt.y);
        if (d <= options.radius) near.emplace_back(d, s);
      }
      std::sort(near.begin(), near.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first < b.first;
        return a.second->agent_id < b.second->agent_id;
      });
      if (static_cast<int>(near.size()) > options.max_neighbors)
        near.resize(static_cast<std::size_t>(options.max_neighbors));
      for (const auto& [d, s] : near) {
        AgentHistory nh;
        nh.agent_id = s->agent_id;
        nh.agent_class = s->agent_class;
        const auto& ntrack = tracks.at(s->agent_id);
        std::unordered_map<std::int64_t, const AgentState*> nf;
        for (auto* st : ntrack)
          if (st->frame > anchor - H && st->frame <= anchor) nf[st->frame] = st;
        for (std::int64_t f = anchor - H + 1; f <= anchor; ++f) {
          auto it = nf.find(f);
          if (it != nf.end()) {
            nh.states.push_back(*it->second);
            nh.valid.push_back(1);
          } else {
            nh.states.push_back(absent_state(s->agent_id, s->agent_class, f));
            nh.valid.push_back(0);
          }
        }
        w.agents.push_back(std::move(nh));
      }
      result.windows.push_back(std::move(w));
    }
  }
  return result;
}

double lateral_offset(const SceneWindow& window) {
  if (window.future.empty()) throw ArgumentError("label_maneuver: window has no future");
  const AgentState& a = window.anchor_state();
  const AgentState& e = window.future.back();
  const double dx = e.x - a.x, dy = e.y - a.y;
  return -std::sin(a.heading) * dx + std::cos(a.heading) * dy;
}

ManeuverLabel label_maneuver(const SceneWindow& window, const LabelOptions& options) {
  if (window.future.empty()) throw ArgumentError("label_maneuver: window has no future");
  ManeuverLabel label;
  const double lat = lateral_offset(window);
  const auto& a = window.anchor_state();
  const auto& e = window.future.back();
  const bool lane_changed = a.lane_id && e.lane_id && *a.lane_id != *e.lane_id;
  if (lat > options.lat_threshold || (lane_changed && lat > 0.0))
    label.lateral = Lateral::left;
  else if (lat < -options.lat_threshold || (lane_changed && lat < 0.0))
    label.lateral = Lateral::right;
  else
    label.lateral = Lateral::straight;

  double hist = 0.0, fut = 0.0;
  for (const auto& s : window.target().states) hist += s.velocity;
  for (const auto& s : window.future) fut += s.velocity;
  hist /= static_cast<double>(window.target().states.size());
  fut /= static_cast<double>(window.future.size());
  if (hist <= 0.0) {
    label.longitudinal = fut > 0.0 ? Longitudinal::accelerate : Longitudinal::maintain;
  } else {
    const double r = fut / hist;
    if (r > options.speed_ratio_high)
      label.longitudinal = Longitudinal::accelerate;
    else if (r < options.speed_ratio_low)
      label.longitudinal = Longitudinal::decelerate;
    else
      label.longitudinal = Longitudinal::maintain;
  }
  return label;
}

namespace {

void apply(SceneWindow& w, const FrameTransform& t, bool forward) {
  auto map_state = [&](AgentState& s) {
    const auto p = forward ? t.to_local(s.x, s.y) : t.to_world(s.x, s.y);
    s.x = p[0];
    s.y = p[1];
    s.heading = forward ? t.heading_to_local(s.heading) : t.heading_to_world(s.heading);
  };
  for (auto& agent : w.agents)
    for (std::size_t i = 0; i < agent.states.size(); ++i)
      if (agent.valid[i]) map_state(agent.states[i]);
  for (auto& s : w.future) map_state(s);
}

}  // namespace

SceneWindow normalize_to_target_frame(const SceneWindow& window) {
  SceneWindow raw = window.transform ? denormalize(window) : window;
  const AgentState& a = raw.anchor_state();
  FrameTransform t{a.x, a.y, a.heading};
  apply(raw, t, true);
  raw.transform = t;
  return raw;
}

SceneWindow denormalize(const SceneWindow& window) {
  if (!window.transform) return window;
  SceneWindow out = window;
  apply(out, *window.transform, false);
  out.transform.reset();
  return out;
}

SplitIndices split_dataset(std::size_t n, const SplitRatios& ratios, std::uint64_t seed) {
  if (ratios.train < 0 || ratios.val < 0 || ratios.test < 0 ||
      std::abs(ratios.train + ratios.val + ratios.test - 1.0) > 1e-9)
    throw ConfigError("split ratios must be non-negative and sum to 1");
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  Rng rng(seed);
  rng.shuffle(idx);
  // Largest-remainder allocation keeps every part within one element of its share.
  const double share[3] = {ratios.train * static_cast<double>(n), ratios.val * static_cast<double>(n),
                           ratios.test * static_cast<double>(n)};
  std::size_t count[3];
  std::size_t assigned = 0;
  for (int i = 0; i < 3; ++i) {
    count[i] = static_cast<std::size_t>(std::floor(share[i] + 1e-9));
    assigned += count[i];
  }
  int order[3] = {0, 1, 2};
  std::stable_sort(order, order + 3, [&](int a, int b) {
    return share[a] - static_cast<double>(count[a]) > share[b] - static_cast<double>(count[b]);
  });
  for (int k = 0; assigned < n; ++k, ++assigned) ++count[order[k % 3]];
  const std::size_t n_train = count[0], n_val = count[1];
  SplitIndices s;
  s.train.assign(idx.begin(), idx.begin() + static_cast<long>(n_train));
  s.val.assign(idx.begin() + static_cast<long>(n_train), idx.begin() + static_cast<long>(n_train + n_val));
  s.test.assign(idx.begin() + static_cast<long>(n_train + n_val), idx.end());
  std::sort(s.train.begin(), s.train.end());
  std::sort(s.val.begin(), s.val.end());
  std::sort(s.test.begin(), s.test.end());
  return s;
}

}  // namespace cotdrive::ingest
