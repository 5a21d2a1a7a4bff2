#pragma once

#include <string>
#include <utility>
#include <vector>

#include "cotdrive/nn/layers.hpp"

namespace cotdrive::nn {

struct AdamOptions {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  /// Decoupled (AdamW-style) weight decay; 0 gives plain Adam.
  double weight_decay = 0.0;
};

class Adam {
 public:
  Adam(const ParameterStore& store, AdamOptions options = {});

  /// One update with learning rate `lr` using the gradients currently held by
  /// the store's parameters. Parameters without a gradient are left alone.
  void step(double lr);

  long steps() const { return steps_; }

  /// Moment buffers as named matrices ("m/<param>", "v/<param>") for checkpoints.
  std::vector<std::pair<std::string, Matrix>> state() const;
  void load_state(const std::vector<std::pair<std::string, Matrix>>& state, long steps);

 private:
  const ParameterStore* store_;
  AdamOptions options_;
  std::vector<Matrix> m_, v_;
  long steps_ = 0;
};

/// Global L2 norm of all parameter gradients.
double grad_norm(const ParameterStore& store);
/// Scales gradients so their global norm is at most `max_norm`; returns the pre-clip norm.
double clip_grad_norm(const ParameterStore& store, double max_norm);

/// Cosine annealing with warm restarts: within each period of `period`
/// steps the rate falls from `lr_max` to `lr_min`, then jumps back.
struct CosineWarmRestarts {
  double lr_max = 1e-3;
  double lr_min = 1e-5;
  long period = 1;
  double rate(long step) const;
};

}  // namespace cotdrive::nn
