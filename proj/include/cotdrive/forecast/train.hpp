#pragma once

#include <memory>
#include <vector>

#include "json.hpp"

#include "cotdrive/forecast/model.hpp"
#include "cotdrive/nn/checkpoint.hpp"
#include "cotdrive/nn/optim.hpp"

namespace cotdrive::forecast {

struct ForecastTrainConfig {
  int epochs = 16;
  int batch_size = 64;
  double lr_max = 1e-3;
  double lr_min = 1e-5;
  /// Length of one cosine cycle, in epochs.
  int restart_epochs = 8;
  double clip_norm = 5.0;
  double weight_decay = 0.0;
  std::uint64_t seed = 0;

  void validate() const;
  nlohmann::json to_json() const;
  static ForecastTrainConfig from_json(const nlohmann::json& j);
  bool operator==(const ForecastTrainConfig&) const = default;
};

struct LossSummary {
  double total = 0.0;
  double nll = 0.0;
  double ce = 0.0;
};

struct EpochRecord {
  int epoch = 0;  // 1-based
  LossSummary train;
  LossSummary val;
  double lr_end = 0.0;
};

/// Sample-weighted mean stage-2 loss over `data`, no tape.
LossSummary evaluate_loss(const ForecastNet& net, const std::vector<EncodedWindow>& data, int batch_size = 64);

/// Batched inference over a dataset.
std::vector<ForecastOutput> predict_all(const ForecastNet& net, const std::vector<EncodedWindow>& data,
                                        int batch_size = 64);

/// Epoch-at-a-time stage-2 optimization with Adam and cosine warm restarts.
/// Keeps the best weights by validation loss; its whole state round-trips
/// through a checkpoint so a run can resume at the next epoch.
class ForecastTrainer {
 public:
  ForecastTrainer(ForecastNet& net, ForecastTrainConfig config);

  /// Validation loss before any update; recorded once.
  const LossSummary& initial_val() const { return initial_val_; }
  void set_initial_val(const LossSummary& v) { initial_val_ = v; has_initial_ = true; }
  bool has_initial() const { return has_initial_; }

  /// Runs the next epoch. Throws DivergenceError (after restoring the weights
  /// from the start of the epoch) when the loss or a parameter turns
  /// non-finite.
  EpochRecord run_epoch(const std::vector<EncodedWindow>& train, const std::vector<EncodedWindow>& val);

  bool finished() const { return epoch_ >= config_.epochs; }
  int epochs_done() const { return epoch_; }
  const std::vector<EpochRecord>& history() const { return history_; }
  int best_epoch() const { return best_epoch_; }
  double best_val() const { return best_val_; }
  /// Copy the best weights into the network.
  void load_best();

  /// Full training state: weights, optimizer moments, best weights, history.
  nn::CheckpointData snapshot(const nlohmann::json& metadata = {}) const;
  /// Restores a snapshot taken with the same model and training config.
  void restore(const nn::CheckpointData& data);

 private:
  ForecastNet& net_;
  ForecastTrainConfig config_;
  nn::Adam adam_;
  int epoch_ = 0;
  std::vector<EpochRecord> history_;
  std::vector<std::pair<std::string, nn::Matrix>> best_;
  double best_val_;
  int best_epoch_ = 0;
  LossSummary initial_val_;
  bool has_initial_ = false;
};

nlohmann::json epoch_to_json(const EpochRecord& r);
EpochRecord epoch_from_json(const nlohmann::json& j);

}  // namespace cotdrive::forecast
