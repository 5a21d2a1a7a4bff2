#include "cotdrive/student/train.hpp"

#include <cmath>
#include <limits>

#include "cotdrive/core/error.hpp"
#include "cotdrive/nn/optim.hpp"

namespace cotdrive::student {

void StudentTrainConfig::validate() const {
  if (!(learning_rate > 0) || batch_size <= 0 || epochs <= 0 || weight_decay < 0 || clip_norm < 0)
    throw ConfigError("student training hyperparameters must be positive");
}

nlohmann::json StudentTrainConfig::to_json() const {
  return {{"learning_rate", learning_rate}, {"batch_size", batch_size}, {"epochs", epochs},
          {"weight_decay", weight_decay},   {"clip_norm", clip_norm},   {"seed", seed},
          {"mask_prompt", mask_prompt}};
}

double evaluate_stage1(const StudentModel& model, const std::vector<TokenSequence>& data, bool mask_prompt,
                       int batch_size) {
  if (data.empty()) throw ArgumentError("evaluate_stage1: no sequences");
  nn::NoGradGuard guard;
  double total = 0.0;
  for (std::size_t start = 0; start < data.size(); start += static_cast<std::size_t>(batch_size)) {
    std::vector<const TokenSequence*> batch;
    for (std::size_t i = start; i < std::min(data.size(), start + static_cast<std::size_t>(batch_size)); ++i)
      batch.push_back(&data[i]);
    total += model.stage1_loss(batch, mask_prompt).scalar() * static_cast<double>(batch.size());
  }
  return total / static_cast<double>(data.size());
}

StudentTrainReport train_student(StudentModel& model, const std::vector<TokenSequence>& train,
                                 const std::vector<TokenSequence>& val, const StudentTrainConfig& config,
                                 const std::function<void(int)>& on_improved) {
  config.validate();
  if (train.empty()) throw ArgumentError("train_student: empty corpus");
  nn::ParameterStore& params = model.parameters();
  nn::Adam adam(params, nn::AdamOptions{0.9, 0.999, 1e-8, config.weight_decay});

  StudentTrainReport report;
  report.initial_loss = evaluate_stage1(model, train, config.mask_prompt, config.batch_size);
  auto last_finite = params.values();
  auto best = last_finite;
  double best_score = std::numeric_limits<double>::infinity();

  const Rng base(config.seed);
  std::vector<std::size_t> order(train.size());
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng rng = base.fork(static_cast<std::uint64_t>(epoch));
    rng.shuffle(order);
    double sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(config.batch_size)) {
      std::vector<const TokenSequence*> batch;
      for (std::size_t i = start; i < std::min(order.size(), start + static_cast<std::size_t>(config.batch_size)); ++i)
        batch.push_back(&train[order[i]]);
      params.zero_grad();
      nn::Var loss = model.stage1_loss(batch, config.mask_prompt);
      const double value = loss.scalar();
      if (!std::isfinite(value)) {
        params.load(last_finite);
        throw DivergenceError("student loss became non-finite at epoch " + std::to_string(epoch + 1) +
                              "; restored the last finite weights");
      }
      nn::backward(loss);
      if (config.clip_norm > 0) nn::clip_grad_norm(params, config.clip_norm);
      adam.step(config.learning_rate);
      sum += value;
      ++batches;
    }
    report.train_loss.push_back(sum / static_cast<double>(batches));
    for (const auto& [name, var] : params.entries())
      if (!var.value().allFinite()) {
        params.load(last_finite);
        throw DivergenceError("parameter " + name + " became non-finite at epoch " + std::to_string(epoch + 1) +
                              "; restored the last finite weights");
      }
    last_finite = params.values();
    double score = report.train_loss.back();
    if (!val.empty()) {
      report.val_loss.push_back(evaluate_stage1(model, val, config.mask_prompt, config.batch_size));
      score = report.val_loss.back();
    }
    if (score < best_score) {
      best_score = score;
      best = last_finite;
      report.best_epoch = epoch;
      if (on_improved) on_improved(epoch);
    }
  }
  params.load(best);
  return report;
}

}  // namespace cotdrive::student
