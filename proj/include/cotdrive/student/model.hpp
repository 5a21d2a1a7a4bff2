#pragma once

#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "cotdrive/nn/layers.hpp"
#include "cotdrive/student/sequence.hpp"
#include "cotdrive/student/tokenizer.hpp"

namespace cotdrive::student {

struct StudentSpec {
  int vocab_size = 8192;
  int layers = 4;
  int width = 256;
  int heads = 8;
  int max_length = kDefaultMaxLength;
  int mlp_ratio = 4;

  void validate() const;
  nlohmann::json to_json() const;
  static StudentSpec from_json(const nlohmann::json& j);
  bool operator==(const StudentSpec&) const = default;
};

/// Decoder-only pre-norm transformer. A begin marker is prepended internally
/// so every token of a sequence, the first included, is predicted.
class StudentModel {
 public:
  StudentModel(const StudentSpec& spec, std::uint64_t seed);

  const StudentSpec& spec() const { return spec_; }
  nn::ParameterStore& parameters() { return params_; }
  const nn::ParameterStore& parameters() const { return params_; }

  /// Logits for a batch; rows are the positions of each sequence in order.
  nn::Var forward(const std::vector<const std::vector<int>*>& sequences) const;

  /// Mean over sequences of the per-sequence mean token NLL. With
  /// `mask_prompt` only answer tokens (index >= boundary) count.
  nn::Var stage1_loss(const std::vector<const TokenSequence*>& batch, bool mask_prompt = false) const;

  /// Frozen input-embedding rows for `ids`.
  nn::Matrix embed(std::span<const int> ids) const;

  /// Greedy continuation of `prefix` using cached keys/values; stops at the
  /// end marker or after `max_new_tokens`.
  std::vector<int> generate(std::span<const int> prefix, int max_new_tokens) const;

  /// Next-token logits for every position of `tokens`, computed through the
  /// incremental cache. Same result as `forward` up to rounding.
  nn::Matrix cached_logits(std::span<const int> tokens) const;

 private:
  nn::Var block(const nn::Var& x, int layer, std::shared_ptr<const kernels::AttentionLayout> layout) const;

  StudentSpec spec_;
  nn::ParameterStore params_;
  nn::Embedding tok_, pos_;
  std::vector<nn::LayerNorm> ln1_, ln2_;
  std::vector<nn::SelfAttention> attn_;
  std::vector<nn::Linear> fc1_, fc2_;
  nn::LayerNorm ln_f_;
  nn::Linear head_;
};

/// A trained student with its tokenizer; immutable after load.
struct Student {
  Tokenizer tokenizer;
  std::shared_ptr<StudentModel> model;

  std::string generate_annotation(const std::string& scene_text, int max_new_tokens) const;
};

void save_student(const std::filesystem::path& path, const Student& student, const nlohmann::json& metadata = {});
Student load_student(const std::filesystem::path& path);

}  // namespace cotdrive::student
