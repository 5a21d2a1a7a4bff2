#pragma once

#include <map>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"

namespace cotdrive::student {

/// Byte-level tokenizer with optional byte-pair merges. Ids 0 and 1 are the
/// begin/end markers, 2..257 the raw bytes, and 258+ learned merges. With no
/// merges it is a plain character (byte) tokenizer.
class Tokenizer {
 public:
  static constexpr int kBos = 0;
  static constexpr int kEos = 1;
  static constexpr int kByteBase = 2;
  static constexpr int kBaseVocab = kByteBase + 256;

  Tokenizer();

  /// Learns merges on word pieces of `texts` until `vocab_size` ids exist or no
  /// pair occurs twice. Deterministic: ties go to the smaller pair.
  static Tokenizer train_bpe(std::span<const std::string> texts, int vocab_size);

  std::vector<int> encode(std::string_view text) const;
  /// Marker ids decode to nothing.
  std::string decode(std::span<const int> ids) const;

  int vocab_size() const { return static_cast<int>(pieces_.size()); }
  std::size_t merge_count() const { return merges_.size(); }
  const std::string& piece(int id) const { return pieces_.at(static_cast<std::size_t>(id)); }

  nlohmann::json to_json() const;
  static Tokenizer from_json(const nlohmann::json& j);

  bool operator==(const Tokenizer& o) const { return merges_ == o.merges_; }

 private:
  void add_merge(int a, int b);
  std::vector<int> encode_word(std::string_view word) const;

  std::vector<std::pair<int, int>> merges_;
  std::map<std::pair<int, int>, int> rank_;
  std::vector<std::string> pieces_;
};

/// Splits text into the word pieces BPE merges never cross: an optional single
/// leading space plus a letter run, a single digit or a single other byte.
std::vector<std::string_view> pretokenize(std::string_view text);

}  // namespace cotdrive::student
