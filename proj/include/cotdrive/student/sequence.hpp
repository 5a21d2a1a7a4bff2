#pragma once

#include <string>
#include <vector>

#include "cotdrive/student/tokenizer.hpp"

namespace cotdrive::student {

inline constexpr int kDefaultMaxLength = 1024;

/// Prompt tokens followed by answer tokens; `boundary` is where the answer starts.
struct TokenSequence {
  std::vector<int> tokens;
  int boundary = 0;
  std::string id;

  int length() const { return static_cast<int>(tokens.size()); }
  bool operator==(const TokenSequence&) const = default;
};

/// tokenize(prompt) ++ tokenize(answer) [++ end marker]. Over-long inputs lose
/// prompt tokens from the left; an answer that alone exceeds `max_length`
/// raises SampleRejected carrying `id`.
TokenSequence merge_prompt_answer(const std::string& prompt, const std::string& answer, const Tokenizer& tokenizer,
                                  int max_length = kDefaultMaxLength, bool append_eos = false,
                                  const std::string& id = {});

/// The flattened prompt the student sees for a scene.
std::string student_prompt(const std::string& scene_text);

}  // namespace cotdrive::student
