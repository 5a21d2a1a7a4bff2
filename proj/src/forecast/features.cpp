#include "cotdrive/forecast/features.hpp"

#include <cctype>
#include <cmath>

#include "cotdrive/core/error.hpp"
#include "cotdrive/core/rng.hpp"
#include "cotdrive/ingest/windows.hpp"

namespace cotdrive::forecast {

HashedWordEmbedder::HashedWordEmbedder(int dim, int active) : dim_(dim), active_(active) {
  if (dim <= 0 || active <= 0 || active > dim) throw ConfigError("hashed embedder: need 0 < active <= dim");
}

std::vector<std::string> words_of(const std::string& text) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isalpha(c)) {
      cur.push_back(static_cast<char>(std::tolower(c)));
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

nn::Matrix HashedWordEmbedder::embed(const std::string& text) const {
  const auto words = words_of(text);
  nn::Matrix m = nn::Matrix::Zero(static_cast<Eigen::Index>(words.size()), dim_);
  for (std::size_t i = 0; i < words.size(); ++i) {
    std::uint64_t h = fnv1a64(words[i]);
    for (int k = 0; k < active_; ++k) {
      h = splitmix64(h);
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(h % static_cast<std::uint64_t>(dim_))) = 1.0;
    }
  }
  return m;
}

Eigen::RowVectorXd max_pool(const nn::Matrix& tokens, int width, bool* empty) {
  if (tokens.rows() == 0) {
    if (empty) *empty = true;
    return Eigen::RowVectorXd::Zero(width);
  }
  if (tokens.cols() != width) throw ShapeError("max_pool: token width mismatch");
  if (empty) *empty = false;
  return tokens.colwise().maxCoeff();
}

nn::Matrix constant_velocity_path(const ingest::SceneWindow& w, int future_steps) {
  const auto& states = w.target().states;
  const auto& last = states.back();
  const auto& prev = states.size() >= 2 ? states[states.size() - 2] : last;
  const double vx = last.x - prev.x, vy = last.y - prev.y;
  nn::Matrix out(future_steps, 2);
  for (int k = 0; k < future_steps; ++k) {
    out(k, 0) = last.x + vx * (k + 1);
    out(k, 1) = last.y + vy * (k + 1);
  }
  return out;
}

EncodedWindow encode_window(const ingest::SceneWindow& window, const std::string& annotation,
                            const student::TokenEmbedder& text_encoder, int future_steps,
                            const FeatureScales& scales) {
  if (window.agents.empty()) throw InputError("forecast: window " + window.scene_ref + " has no agents");
  const ingest::SceneWindow w = window.transform ? window : ingest::normalize_to_target_frame(window);
  EncodedWindow e;
  e.scene_ref = w.scene_ref;
  e.target_class = w.target().agent_class;
  e.history = w.history_length();
  e.agents = static_cast<int>(w.agents.size());
  e.agent_features = nn::Matrix::Zero(e.history * e.agents, kStateFeatures);
  e.valid.assign(static_cast<std::size_t>(e.history * e.agents), 0);
  for (int a = 0; a < e.agents; ++a) {
    const auto& ag = w.agents[static_cast<std::size_t>(a)];
    if (static_cast<int>(ag.states.size()) != e.history)
      throw ShapeError("forecast: agent " + ag.agent_id + " history length differs from the target's");
    for (int t = 0; t < e.history; ++t) {
      const std::size_t row = static_cast<std::size_t>(t * e.agents + a);
      if (!ag.valid[static_cast<std::size_t>(t)]) continue;
      const auto& s = ag.states[static_cast<std::size_t>(t)];
      const double f[kStateFeatures] = {s.x / scales.position,
                                        s.y / scales.position,
                                        s.velocity * std::cos(s.heading) / scales.speed,
                                        s.velocity * std::sin(s.heading) / scales.speed,
                                        std::cos(s.heading),
                                        std::sin(s.heading),
                                        s.acceleration / scales.acceleration,
                                        ag.agent_class == ingest::AgentClass::vehicle ? 1.0 : 0.0,
                                        ag.agent_class == ingest::AgentClass::pedestrian ? 1.0 : 0.0,
                                        ag.agent_class == ingest::AgentClass::bicycle ? 1.0 : 0.0,
                                        1.0};
      for (int c = 0; c < kStateFeatures; ++c) {
        if (!std::isfinite(f[c]))
          throw InputError("forecast: non-finite state for agent " + ag.agent_id + " in " + w.scene_ref);
        e.agent_features(static_cast<Eigen::Index>(row), c) = f[c];
      }
      e.valid[row] = 1;
    }
  }
  bool empty = false;
  const nn::Matrix tokens = text_encoder.embed(annotation);
  e.semantic = max_pool(tokens, text_encoder.width(), &empty);
  if (empty) e.warnings.push_back("empty annotation: semantic features are zero");
  e.anchor = constant_velocity_path(w, future_steps);
  if (w.future_length() > 0) {
    if (w.future_length() != future_steps)
      throw ShapeError("forecast: window " + w.scene_ref + " future length " + std::to_string(w.future_length()) +
                       " != " + std::to_string(future_steps));
    e.truth.resize(future_steps, 2);
    for (int k = 0; k < future_steps; ++k) {
      e.truth(k, 0) = w.future[static_cast<std::size_t>(k)].x;
      e.truth(k, 1) = w.future[static_cast<std::size_t>(k)].y;
    }
  }
  if (w.maneuver) e.maneuver = w.maneuver->joint_index();
  return e;
}

}  // namespace cotdrive::forecast
