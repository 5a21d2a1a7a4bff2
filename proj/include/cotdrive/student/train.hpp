#pragma once

#include <functional>
#include <vector>

#include "json.hpp"

#include "cotdrive/student/model.hpp"
#include "cotdrive/student/sequence.hpp"

namespace cotdrive::student {

struct StudentTrainConfig {
  /// From-scratch default; fine-tuning a pretrained student would use 2e-5.
  double learning_rate = 3e-4;
  int batch_size = 8;
  int epochs = 10;
  double weight_decay = 0.01;
  double clip_norm = 1.0;
  std::uint64_t seed = 0;
  bool mask_prompt = false;

  void validate() const;
  nlohmann::json to_json() const;
};

struct StudentTrainReport {
  /// Mean batch loss over each epoch.
  std::vector<double> train_loss;
  /// Held-out loss after each epoch (empty without a validation set).
  std::vector<double> val_loss;
  int best_epoch = -1;
  double initial_loss = 0.0;
};

/// Mean over sequences of per-sequence mean token NLL, without recording a tape.
double evaluate_stage1(const StudentModel& model, const std::vector<TokenSequence>& data, bool mask_prompt,
                       int batch_size = 8);

/// Minimizes the stage-1 loss with Adam. On return the model holds the best
/// weights by validation loss (by training loss when `val` is empty).
/// `on_improved` runs whenever a new best is reached. A non-finite loss
/// restores the last finite weights, then throws DivergenceError.
StudentTrainReport train_student(StudentModel& model, const std::vector<TokenSequence>& train,
                                 const std::vector<TokenSequence>& val, const StudentTrainConfig& config,
                                 const std::function<void(int epoch)>& on_improved = {});

}  // namespace cotdrive::student
