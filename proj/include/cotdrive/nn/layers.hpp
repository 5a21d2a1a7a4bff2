#pragma once

#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "cotdrive/core/rng.hpp"
#include "cotdrive/nn/tensor.hpp"

namespace cotdrive::nn {

/// Named, ordered collection of trainable tensors. Layers keep handles that
/// share nodes with the store, so loading values in place updates every layer.
class ParameterStore {
 public:
  Var add(const std::string& name, Matrix init);
  const Var& get(const std::string& name) const;
  bool contains(const std::string& name) const;

  const std::vector<std::pair<std::string, Var>>& entries() const { return entries_; }
  std::size_t scalar_count() const;
  void zero_grad();

  /// Replace values by name; every stored parameter must be provided with the
  /// same shape.
  void load(const std::vector<std::pair<std::string, Matrix>>& values);
  /// Copy of every value, in store order.
  std::vector<std::pair<std::string, Matrix>> values() const;

 private:
  std::vector<std::pair<std::string, Var>> entries_;
};

Matrix xavier_uniform(Eigen::Index rows, Eigen::Index cols, Rng& rng, double gain = 1.0);

class Linear {
 public:
  Linear() = default;
  Linear(ParameterStore& store, const std::string& name, int in, int out, Rng& rng,
         double gain = 1.0);
  Var operator()(const Var& x) const { return linear(x, weight_, bias_); }
  const Var& weight() const { return weight_; }
  const Var& bias() const { return bias_; }

 private:
  Var weight_, bias_;
};

class LayerNorm {
 public:
  LayerNorm() = default;
  LayerNorm(ParameterStore& store, const std::string& name, int width);
  Var operator()(const Var& x) const { return layer_norm(x, gamma_, beta_); }

 private:
  Var gamma_, beta_;
};

/// Single-layer LSTM over a batch of equal-length sequences.
class Lstm {
 public:
  Lstm() = default;
  Lstm(ParameterStore& store, const std::string& name, int in, int hidden, Rng& rng);

  /// `inputs[t]` is B x in. Returns the hidden state after every step.
  std::vector<Var> run(const std::vector<Var>& inputs) const;
  /// As `run`, with an extra B x 4h pre-activation added at every step
  /// (for inputs that are constant over time).
  std::vector<Var> run(const std::vector<Var>& inputs, const Var& constant_gates) const;
  int hidden() const { return hidden_; }
  const Var& input_weight() const { return w_in_; }

 private:
  Var w_in_, w_hh_, bias_;
  int hidden_ = 0;
};

/// Multi-head self-attention with a fused QKV projection and output projection.
class SelfAttention {
 public:
  SelfAttention() = default;
  SelfAttention(ParameterStore& store, const std::string& name, int width, int heads, Rng& rng);
  Var operator()(const Var& x, std::shared_ptr<const kernels::AttentionLayout> layout) const;
  int heads() const { return heads_; }

 private:
  Linear qkv_, out_;
  int width_ = 0, heads_ = 1;
};

class Embedding {
 public:
  Embedding() = default;
  Embedding(ParameterStore& store, const std::string& name, int count, int width, Rng& rng,
            double stddev = 0.02);
  Var operator()(std::span<const int> ids) const { return gather_rows(table_, ids); }
  const Var& table() const { return table_; }

 private:
  Var table_;
};

}  // namespace cotdrive::nn
