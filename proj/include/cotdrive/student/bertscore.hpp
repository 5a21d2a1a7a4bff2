#pragma once

#include <memory>
#include <string>

#include "cotdrive/nn/tensor.hpp"
#include "cotdrive/student/model.hpp"

namespace cotdrive::student {

/// Maps text to one embedding row per token.
class TokenEmbedder {
 public:
  virtual ~TokenEmbedder() = default;
  virtual nn::Matrix embed(const std::string& text) const = 0;
  virtual int width() const = 0;
};

/// The student's own frozen input-embedding table.
class StudentEmbedder final : public TokenEmbedder {
 public:
  explicit StudentEmbedder(Student student) : student_(std::move(student)) {}
  nn::Matrix embed(const std::string& text) const override;
  int width() const override { return student_.model->spec().width; }

 private:
  Student student_;
};

struct BertScore {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

/// Greedy-matching score over token embeddings: precision averages each
/// candidate token's best cosine against the reference, recall the reverse.
/// Throws ScoringError when either side has no tokens.
BertScore bert_score(const nn::Matrix& candidate, const nn::Matrix& reference);
BertScore bert_score(const std::string& candidate, const std::string& reference, const TokenEmbedder& embedder);

}  // namespace cotdrive::student
