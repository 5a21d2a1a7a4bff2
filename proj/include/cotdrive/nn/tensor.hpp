#pragma once

#include <functional>
#include <memory>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "cotdrive/kernels/attention.hpp"
#include "cotdrive/kernels/gaussian.hpp"

namespace cotdrive::nn {

using Matrix = kernels::RowMatrix;

/// One vertex of the reverse-mode tape. Values are dense row-major matrices;
/// `backward` pushes this node's gradient into its inputs.
struct Node {
  Matrix value;
  Matrix grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> inputs;
  std::function<void(Node&)> backward;

  Matrix& grad_buffer();
};

/// Handle to a tape node. Copies share the node.
class Var {
 public:
  Var() = default;
  explicit Var(Matrix value, bool requires_grad = false);

  const Matrix& value() const { return node_->value; }
  Matrix& mutable_value() { return node_->value; }
  /// Gradient after `backward`; zero-sized if none reached this node.
  const Matrix& grad() const { return node_->grad; }
  void zero_grad() { node_->grad.resize(0, 0); }

  Eigen::Index rows() const { return node_->value.rows(); }
  Eigen::Index cols() const { return node_->value.cols(); }
  bool requires_grad() const { return node_ && node_->requires_grad; }
  bool defined() const { return static_cast<bool>(node_); }
  double scalar() const;

  const std::shared_ptr<Node>& node() const { return node_; }
  static Var from_node(std::shared_ptr<Node> node);

 private:
  std::shared_ptr<Node> node_;
};

/// Disables tape recording on this thread for its lifetime.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_enabled();

/// Accumulates d(root)/d(node) into every reachable node that requires grad.
/// `root` must be 1x1.
void backward(const Var& root);

Var constant(Matrix value);
Var scalar_constant(double value);

// Linear algebra.
Var matmul(const Var& a, const Var& b);
/// x W + b with b a 1 x n row broadcast over rows of x.
Var linear(const Var& x, const Var& weight, const Var& bias);

// Elementwise.
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double s);
Var add_scalar(const Var& a, double s);
/// Adds a 1 x n row to every row of `a`.
Var add_row(const Var& a, const Var& row);
/// Multiplies each row i of `a` by column entry c(i, 0).
Var mul_col(const Var& a, const Var& col);
Var elu(const Var& a);
Var gelu(const Var& a);
Var tanh(const Var& a);
Var sigmoid(const Var& a);
Var softplus(const Var& a);
Var exp(const Var& a);
/// log(max(a, floor)); the gradient is zero where the floor is active.
Var log_floor(const Var& a, double floor);

// Shape manipulation.
Var concat_cols(std::span<const Var> parts);
Var concat_rows(std::span<const Var> parts);
Var slice_cols(const Var& a, Eigen::Index start, Eigen::Index count);
Var slice_rows(const Var& a, Eigen::Index start, Eigen::Index count);
/// Row i of the result is row index[i] of `a`, or zeros when index[i] < 0.
Var gather_rows(const Var& a, std::span<const int> index);
/// Row i of the result is the entry a(i, index[i]).
Var pick(const Var& a, std::span<const int> index);

// Reductions.
Var sum(const Var& a);
Var mean(const Var& a);
Var row_sum(const Var& a);
/// Mean of each contiguous row segment [offsets[g], offsets[g+1]).
Var segment_mean(const Var& a, std::span<const int> offsets);

// Normalization.
Var softmax_rows(const Var& a);
Var log_softmax_rows(const Var& a);
Var layer_norm(const Var& x, const Var& gamma, const Var& beta, double eps = 1e-5);

/// Grouped multi-head scaled dot-product attention (see kernels::AttentionLayout).
Var attention(const Var& q, const Var& k, const Var& v,
              std::shared_ptr<const kernels::AttentionLayout> layout);

/// Per group of `in_len` consecutive rows: y_g = W x_g + b, W: out_len x in_len,
/// b: out_len x 1 broadcast over columns. Mixes the time axis of a sequence.
Var time_mix(const Var& x, const Var& weight, const Var& bias, int in_len);

/// Per-row negative log-density; columns of `params` are
/// (mu_x, mu_y, sigma_x, sigma_y, rho), `truth` is N x 2. Returns N x 1.
Var bivariate_nll(const Var& params, const Matrix& truth, kernels::NllForm form);

/// Per-row -log softmax(logits)[target]; returns N x 1.
Var token_nll(const Var& logits, std::span<const int> targets);

}  // namespace cotdrive::nn
