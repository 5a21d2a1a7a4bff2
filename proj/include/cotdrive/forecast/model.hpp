#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "json.hpp"

#include "cotdrive/forecast/features.hpp"
#include "cotdrive/forecast/types.hpp"
#include "cotdrive/kernels/gaussian.hpp"
#include "cotdrive/nn/layers.hpp"

namespace cotdrive::forecast {

struct ForecastConfig {
  int hidden = 64;
  int heads = 8;
  int interaction_layers = 3;
  /// Shared query/key channel width of the cross-modal attention.
  int key_dim = 64;
  /// Members per family (recurrent, temporal-convolution, self-attention).
  int members_per_family = 2;
  int member_width = 32;
  int member_heads = 4;
  int maneuver_embedding = 16;
  int history_frames = 16;
  int future_frames = 25;
  /// Width of the pooled text vector (the text encoder's output width).
  int text_width = 256;
  double alpha = 0.5;
  /// Divide the ensemble cross-entropy by the member count.
  bool average_ensemble_entropy = true;
  kernels::NllForm nll_form = kernels::NllForm::standard;
  /// Average the trajectory NLL over future steps in the training loss
  /// (otherwise summed, which lets it swamp the maneuver term).
  bool nll_step_mean = true;
  /// Means are residuals on the constant-velocity path when set.
  bool cv_anchor = true;
  /// Feed the ensemble statistics to the decoder as constants, so the
  /// trajectory loss does not push on the maneuver probabilities.
  bool detach_ensemble_stats = true;
  double residual_scale = 10.0;
  double probability_floor = 1e-12;
  FeatureScales scales;

  int ensemble_size() const { return 3 * members_per_family; }
  void validate() const;
  nlohmann::json to_json() const;
  static ForecastConfig from_json(const nlohmann::json& j);
  bool operator==(const ForecastConfig&) const = default;
};

/// Graph values for a batch; rows of sequence features are sample-major.
struct ForecastGraph {
  int batch = 0;
  nn::Var semantic;     // B x hidden
  nn::Var temporal;     // B*H x hidden, last row per sample is the final state
  nn::Var multimodal;   // B*H x hidden
  nn::Var spatial;      // B*H x hidden
  nn::Var cross;        // B x hidden
  nn::Var future;       // B*F x hidden
  std::vector<nn::Var> member_probs;  // Q of B x 9
  nn::Var mean_probs;   // B x 9
  nn::Var avg_ce;       // B x 1
};

struct LossParts {
  nn::Var total;
  double nll = 0.0;
  double ce = 0.0;
};

class ForecastNet {
 public:
  ForecastNet(const ForecastConfig& config, std::uint64_t seed);

  const ForecastConfig& config() const { return config_; }
  nn::ParameterStore& parameters() { return params_; }
  const nn::ParameterStore& parameters() const { return params_; }

  /// Encoders, cross-modal attention and ensemble for a batch.
  ForecastGraph encode(const std::vector<const EncodedWindow*>& batch) const;

  /// Gaussian parameters for (sample, maneuver) pairs, step-major:
  /// row t*R + r holds step t of pair r. Columns: mu_x, mu_y, sigma_x, sigma_y, rho.
  nn::Var decode(const ForecastGraph& graph, const std::vector<const EncodedWindow*>& batch,
                 const std::vector<int>& sample, const std::vector<int>& maneuver) const;

  /// Weighted trajectory NLL of the ground-truth maneuver plus the maneuver
  /// cross-entropy of the ensemble mean, both averaged over the batch.
  LossParts stage2_loss(const std::vector<const EncodedWindow*>& batch) const;

  /// Full inference for a batch of windows; pure.
  std::vector<ForecastOutput> predict(const std::vector<const EncodedWindow*>& batch) const;
  ForecastOutput predict(const EncodedWindow& window) const;

  // Stand-alone encoder stages, used by tests and inspection tools.
  nn::Var semantic_features(const nn::Matrix& pooled) const;
  nn::Var temporal_features(const std::vector<const EncodedWindow*>& batch) const;
  nn::Var multimodal_features(const nn::Var& semantic, const nn::Var& temporal, int history) const;
  nn::Var interaction_features(const std::vector<const EncodedWindow*>& batch) const;

 private:
  nn::Var member_logits(int q, const nn::Var& seq, int batch) const;

  ForecastConfig config_;
  nn::ParameterStore params_;
  nn::Linear sem_proj_;
  nn::Linear temp_in_;
  nn::Lstm temp_lstm_;
  nn::Linear fuse1_, fuse2_;
  nn::Linear inter_in_, inter_out_;
  std::vector<nn::SelfAttention> inter_attn_;
  std::vector<nn::LayerNorm> inter_norm_;
  nn::Linear wq_, wk_, wv_;
  nn::Var time_w_, time_b_;
  // Ensemble members.
  std::vector<nn::Lstm> m_lstm_;
  std::vector<std::vector<nn::Linear>> m_tcn_;
  std::vector<nn::Linear> m_att_in_;
  std::vector<nn::SelfAttention> m_att_;
  std::vector<nn::Linear> m_head_;
  // Decoder.
  nn::Embedding man_emb_;
  nn::Linear dec_cond_;
  nn::Lstm dec_lstm_;
  nn::Linear dec_mlp_, dec_out_;
};

/// softmax(Q K^T / sqrt(d_k)) V with a single head; rows of `query` attend
/// over all rows of `key`/`value`.
nn::Matrix cross_modal_attend(const nn::Matrix& query, const nn::Matrix& key, const nn::Matrix& value);

void save_forecast(const std::filesystem::path& path, const ForecastNet& net, const nlohmann::json& metadata = {});
std::unique_ptr<ForecastNet> load_forecast(const std::filesystem::path& path, nlohmann::json* metadata = nullptr);

}  // namespace cotdrive::forecast
