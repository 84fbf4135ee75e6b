#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace pivotnmt {

using TokenId = std::uint32_t;

// EOS-terminated sequence of token ids.
using Sentence = std::vector<TokenId>;

// One aligned pair; which language is on which side depends on the corpus.
struct SentencePair {
  Sentence left;
  Sentence right;

  friend bool operator==(const SentencePair&, const SentencePair&) = default;
};

// Token <-> id bijection. Ids 0..3 are reserved for BOS, EOS, UNK and PAD;
// ordinary words follow in insertion order.
class Vocabulary {
 public:
  static constexpr TokenId kBos = 0;
  static constexpr TokenId kEos = 1;
  static constexpr TokenId kUnk = 2;
  static constexpr TokenId kPad = 3;
  static constexpr std::size_t kReserved = 4;

  Vocabulary();
  explicit Vocabulary(std::span<const std::string> words);

  static bool is_reserved(TokenId id) { return id < kReserved; }
  static bool is_reserved_token(std::string_view token);

  std::size_t size() const { return tokens_.size(); }
  std::size_t word_count() const { return tokens_.size() - kReserved; }

  // UNK for unknown tokens.
  TokenId id(std::string_view token) const;
  std::optional<TokenId> find(std::string_view token) const;
  const std::string& token(TokenId id) const;
  std::span<const std::string> tokens() const { return tokens_; }
  std::span<const std::string> words() const { return std::span(tokens_).subspan(kReserved); }

  // FNV-1a over the token list; identifies a vocabulary in checkpoints.
  std::uint64_t hash() const;

  // Whitespace tokens -> ids with EOS appended.
  Sentence encode(std::span<const std::string> tokens) const;
  Sentence encode(std::string_view line) const;
  // Ids -> tokens, dropping the trailing EOS.
  std::vector<std::string> decode(std::span<const TokenId> ids) const;
  std::string decode_line(std::span<const TokenId> ids) const;

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) { return a.tokens_ == b.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> index_;
};

// Throws std::invalid_argument unless s is non-empty, EOS-terminated, has no
// interior EOS, and every id is below the vocabulary size.
void validate_sentence(const Vocabulary& vocab, std::span<const TokenId> s, std::string_view what);

std::vector<std::string> split_whitespace(std::string_view line);

}  // namespace pivotnmt
