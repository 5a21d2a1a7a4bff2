#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace cotdrive::kernels {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Row partitioning for grouped (block-diagonal) scaled dot-product attention.
/// Group g owns query rows [q_offsets[g], q_offsets[g+1]) and key/value rows
/// [k_offsets[g], k_offsets[g+1]).
struct AttentionLayout {
  std::vector<int> q_offsets;
  std::vector<int> k_offsets;
  int heads = 1;
  /// Query i of a group only sees keys j <= i of the same group.
  bool causal = false;
  /// Optional per-key validity (size = total key rows). Empty means all valid.
  std::vector<std::uint8_t> key_valid;
  /// When every key of a query is masked, attend to the key with the query's
  /// own in-group index instead of producing zeros. Only meaningful for
  /// self-attention layouts.
  bool self_fallback = false;

  int groups() const { return static_cast<int>(q_offsets.size()) - 1; }

  /// Uniform layout: `groups` groups of `q_len` queries and `k_len` keys.
  static AttentionLayout uniform(int groups, int q_len, int k_len, int heads = 1);
  /// Validate against operand shapes; throws ShapeError.
  void check(int q_rows, int k_rows) const;
  /// Offsets into the flat probability buffer, one entry per (group, head) + 1.
  std::vector<std::size_t> prob_offsets() const;
};

/// Output of the forward pass; `probs` is kept for the backward pass.
struct AttentionResult {
  RowMatrix out;
  std::vector<double> probs;
};

/// out = softmax(Q K^T / sqrt(d_head)) V per group and head.
AttentionResult attention_forward(const RowMatrix& q, const RowMatrix& k, const RowMatrix& v,
                                  const AttentionLayout& layout);

void attention_backward(const RowMatrix& q, const RowMatrix& k, const RowMatrix& v,
                        const AttentionLayout& layout, std::span<const double> probs,
                        const RowMatrix& grad_out, RowMatrix* grad_q, RowMatrix* grad_k,
                        RowMatrix* grad_v);

/// Straightforward scalar loops, single threaded. Kept as the reference the
/// parallel kernels are tested and benchmarked against.
namespace serial {
AttentionResult attention_forward(const RowMatrix& q, const RowMatrix& k, const RowMatrix& v,
                                  const AttentionLayout& layout);
void attention_backward(const RowMatrix& q, const RowMatrix& k, const RowMatrix& v,
                        const AttentionLayout& layout, std::span<const double> probs,
                        const RowMatrix& grad_out, RowMatrix* grad_q, RowMatrix* grad_k,
                        RowMatrix* grad_v);
}  // namespace serial

}  // namespace cotdrive::kernels
