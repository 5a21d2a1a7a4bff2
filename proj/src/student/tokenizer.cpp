#include "cotdrive/student/tokenizer.hpp"

#include <algorithm>
#include <unordered_map>

#include "cotdrive/core/error.hpp"

namespace cotdrive::student {

namespace {

bool is_letter(unsigned char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_' || c >= 0x80;
}
bool is_space(unsigned char c) { return c == ' ' || c == '\n' || c == '\t' || c == '\r'; }

struct PairHash {
  std::size_t operator()(const std::pair<int, int>& p) const {
    return std::hash<long long>()((static_cast<long long>(p.first) << 32) ^ static_cast<unsigned>(p.second));
  }
};

}  // namespace

std::vector<std::string_view> pretokenize(std::string_view text) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < text.size()) {
    const std::size_t start = i;
    auto c = static_cast<unsigned char>(text[i]);
    if (c == ' ' && i + 1 < text.size() && !is_space(static_cast<unsigned char>(text[i + 1]))) {
      ++i;
      c = static_cast<unsigned char>(text[i]);
    }
    if (is_letter(c)) {
      while (i < text.size() && is_letter(static_cast<unsigned char>(text[i]))) ++i;
    } else {
      ++i;
    }
    out.push_back(text.substr(start, i - start));
  }
  return out;
}

Tokenizer::Tokenizer() {
  pieces_.push_back("");
  pieces_.push_back("");
  for (int b = 0; b < 256; ++b) pieces_.push_back(std::string(1, static_cast<char>(b)));
}

void Tokenizer::add_merge(int a, int b) {
  rank_[{a, b}] = static_cast<int>(merges_.size());
  merges_.emplace_back(a, b);
  pieces_.push_back(pieces_[static_cast<std::size_t>(a)] + pieces_[static_cast<std::size_t>(b)]);
}

Tokenizer Tokenizer::train_bpe(std::span<const std::string> texts, int vocab_size) {
  Tokenizer tok;
  std::map<std::string, long> counts;
  for (const auto& t : texts)
    for (auto w : pretokenize(t)) ++counts[std::string(w)];
  std::vector<std::vector<int>> words;
  std::vector<long> freq;
  for (const auto& [w, n] : counts) {
    std::vector<int> sym;
    for (unsigned char c : w) sym.push_back(kByteBase + c);
    words.push_back(std::move(sym));
    freq.push_back(n);
  }
  while (tok.vocab_size() < vocab_size) {
    std::unordered_map<std::pair<int, int>, long, PairHash> pc;
    for (std::size_t i = 0; i < words.size(); ++i)
      for (std::size_t k = 0; k + 1 < words[i].size(); ++k) pc[{words[i][k], words[i][k + 1]}] += freq[i];
    std::pair<int, int> best{-1, -1};
    long best_n = 1;
    for (const auto& [p, n] : pc)
      if (n > best_n || (n == best_n && best.first >= 0 && p < best)) {
        best = p;
        best_n = n;
      }
    if (best.first < 0) break;
    const int id = tok.vocab_size();
    tok.add_merge(best.first, best.second);
    for (auto& w : words) {
      std::vector<int> merged;
      merged.reserve(w.size());
      for (std::size_t k = 0; k < w.size(); ++k) {
        if (k + 1 < w.size() && w[k] == best.first && w[k + 1] == best.second) {
          merged.push_back(id);
          ++k;
        } else {
          merged.push_back(w[k]);
        }
      }
      w = std::move(merged);
    }
  }
  return tok;
}

std::vector<int> Tokenizer::encode_word(std::string_view word) const {
  std::vector<int> sym;
  for (unsigned char c : word) sym.push_back(kByteBase + c);
  while (sym.size() > 1) {
    int best_rank = -1;
    std::size_t at = 0;
    for (std::size_t k = 0; k + 1 < sym.size(); ++k) {
      auto it = rank_.find({sym[k], sym[k + 1]});
      if (it != rank_.end() && (best_rank < 0 || it->second < best_rank)) {
        best_rank = it->second;
        at = k;
      }
    }
    if (best_rank < 0) break;
    sym[at] = kBaseVocab + best_rank;
    sym.erase(sym.begin() + static_cast<long>(at) + 1);
  }
  return sym;
}

std::vector<int> Tokenizer::encode(std::string_view text) const {
  std::vector<int> out;
  for (auto w : pretokenize(text)) {
    auto ids = encode_word(w);
    out.insert(out.end(), ids.begin(), ids.end());
  }
  return out;
}

std::string Tokenizer::decode(std::span<const int> ids) const {
  std::string out;
  for (int id : ids) {
    if (id < 0 || id >= vocab_size()) throw ArgumentError("token id " + std::to_string(id) + " outside vocabulary");
    out += pieces_[static_cast<std::size_t>(id)];
  }
  return out;
}

nlohmann::json Tokenizer::to_json() const {
  nlohmann::json m = nlohmann::json::array();
  for (const auto& [a, b] : merges_) m.push_back({a, b});
  return {{"type", "byte_bpe"}, {"merges", std::move(m)}};
}

Tokenizer Tokenizer::from_json(const nlohmann::json& j) {
  if (j.value("type", std::string()) != "byte_bpe") throw SchemaError("unknown tokenizer type");
  Tokenizer t;
  for (const auto& m : j.at("merges")) {
    const int a = m.at(0).get<int>(), b = m.at(1).get<int>();
    if (a < kByteBase || b < kByteBase || a >= t.vocab_size() || b >= t.vocab_size())
      throw SchemaError("tokenizer merge refers to an unknown id");
    t.add_merge(a, b);
  }
  return t;
}

}  // namespace cotdrive::student
