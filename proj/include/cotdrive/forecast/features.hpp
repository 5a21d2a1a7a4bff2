#pragma once

#include <array>
#include <memory>
#include <string>
#include <vector>

#include "cotdrive/ingest/types.hpp"
#include "cotdrive/nn/tensor.hpp"
#include "cotdrive/student/bertscore.hpp"

namespace cotdrive::forecast {

/// Per agent and frame: position, velocity components, heading cosine and
/// sine, acceleration, class one-hot and the validity flag.
inline constexpr int kStateFeatures = 11;

/// Fixed divisors applied to raw kinematics before they enter the network.
struct FeatureScales {
  double position = 20.0;
  double speed = 10.0;
  double acceleration = 2.0;

  bool operator==(const FeatureScales&) const = default;
};

/// Non-contextual bag-of-words encoder: each lower-cased alphabetic word
/// lights up `active` hashed coordinates of a `dim`-wide indicator vector.
/// Numbers are skipped; the kinematic inputs already carry them.
class HashedWordEmbedder final : public student::TokenEmbedder {
 public:
  explicit HashedWordEmbedder(int dim = 256, int active = 4);
  nn::Matrix embed(const std::string& text) const override;
  int width() const override { return dim_; }

 private:
  int dim_, active_;
};

/// Lower-cased runs of letters.
std::vector<std::string> words_of(const std::string& text);

/// Element-wise max over token rows; an empty token set gives zeros and
/// sets `*empty` when provided.
Eigen::RowVectorXd max_pool(const nn::Matrix& tokens, int width, bool* empty = nullptr);

/// Everything the network needs from one window, precomputed once.
struct EncodedWindow {
  std::string scene_ref;
  ingest::AgentClass target_class = ingest::AgentClass::vehicle;
  int history = 0;
  int agents = 0;
  /// history*agents rows, frame-major then agent; target is agent 0.
  nn::Matrix agent_features;
  std::vector<std::uint8_t> valid;
  /// Max-pooled annotation vector.
  Eigen::RowVectorXd semantic;
  /// Constant-velocity extrapolation of the target, one row per future step.
  nn::Matrix anchor;
  /// Ground-truth future positions (target frame); empty when unknown.
  nn::Matrix truth;
  int maneuver = -1;
  std::vector<std::string> warnings;
};

/// Constant-velocity extrapolation from the last two history positions.
nn::Matrix constant_velocity_path(const ingest::SceneWindow& normalized, int future_steps);

/// Normalizes the window if needed. `annotation` feeds the text encoder.
EncodedWindow encode_window(const ingest::SceneWindow& window, const std::string& annotation,
                            const student::TokenEmbedder& text_encoder, int future_steps,
                            const FeatureScales& scales = {});

}  // namespace cotdrive::forecast
