#include "cotdrive/student/sequence.hpp"

#include "cotdrive/core/error.hpp"

namespace cotdrive::student {

TokenSequence merge_prompt_answer(const std::string& prompt, const std::string& answer, const Tokenizer& tokenizer,
                                  int max_length, bool append_eos, const std::string& id) {
  if (max_length <= 0) throw ConfigError("max_length must be positive");
  auto p = tokenizer.encode(prompt);
  auto a = tokenizer.encode(answer);
  if (append_eos) a.push_back(Tokenizer::kEos);
  if (static_cast<int>(a.size()) > max_length)
    throw SampleRejected("sample " + (id.empty() ? std::string("<unnamed>") : id) + ": answer has " +
                         std::to_string(a.size()) + " tokens, limit " + std::to_string(max_length));
  const int keep = std::min(static_cast<int>(p.size()), max_length - static_cast<int>(a.size()));
  TokenSequence s;
  s.id = id;
  s.tokens.assign(p.end() - keep, p.end());
  s.boundary = keep;
  s.tokens.insert(s.tokens.end(), a.begin(), a.end());
  return s;
}

std::string student_prompt(const std::string& scene_text) { return scene_text + "Annotation:"; }

}  // namespace cotdrive::student
