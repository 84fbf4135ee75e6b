#include "pivotnmt/vocabulary.hpp"

#include <array>
#include <sstream>
#include <stdexcept>

namespace pivotnmt {

namespace {
const std::array<std::string, Vocabulary::kReserved> kReservedTokens = {"<s>", "</s>", "<unk>", "<pad>"};
}

Vocabulary::Vocabulary() : tokens_(kReservedTokens.begin(), kReservedTokens.end()) {
  for (TokenId i = 0; i < kReserved; ++i) index_.emplace(tokens_[i], i);
}

Vocabulary::Vocabulary(std::span<const std::string> words) : Vocabulary() {
  for (const std::string& w : words) {
    if (w.empty()) throw std::invalid_argument("vocabulary: empty token");
    if (is_reserved_token(w)) throw std::invalid_argument("vocabulary: reserved token '" + w + "' listed as a word");
    if (!index_.emplace(w, static_cast<TokenId>(tokens_.size())).second)
      throw std::invalid_argument("vocabulary: duplicate token '" + w + "'");
    tokens_.push_back(w);
  }
}

bool Vocabulary::is_reserved_token(std::string_view token) {
  for (const auto& r : kReservedTokens)
    if (r == token) return true;
  return false;
}

TokenId Vocabulary::id(std::string_view token) const { return find(token).value_or(kUnk); }

std::optional<TokenId> Vocabulary::find(std::string_view token) const {
  auto it = index_.find(std::string(token));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

const std::string& Vocabulary::token(TokenId id) const {
  if (id >= tokens_.size()) throw std::out_of_range("vocabulary: id " + std::to_string(id) + " out of range");
  return tokens_[id];
}

std::uint64_t Vocabulary::hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](unsigned char c) {
    h ^= c;
    h *= 0x100000001b3ULL;
  };
  for (const std::string& t : tokens_) {
    for (unsigned char c : t) mix(c);
    mix(0);
  }
  return h;
}

Sentence Vocabulary::encode(std::span<const std::string> tokens) const {
  Sentence s;
  s.reserve(tokens.size() + 1);
  for (const std::string& t : tokens) s.push_back(id(t));
  s.push_back(kEos);
  return s;
}

Sentence Vocabulary::encode(std::string_view line) const {
  const auto tokens = split_whitespace(line);
  return encode(tokens);
}

std::vector<std::string> Vocabulary::decode(std::span<const TokenId> ids) const {
  std::vector<std::string> out;
  for (TokenId id : ids) {
    if (id == kEos) break;
    out.push_back(token(id));
  }
  return out;
}

std::string Vocabulary::decode_line(std::span<const TokenId> ids) const {
  std::string line;
  for (const std::string& t : decode(ids)) {
    if (!line.empty()) line += ' ';
    line += t;
  }
  return line;
}

void validate_sentence(const Vocabulary& vocab, std::span<const TokenId> s, std::string_view what) {
  const std::string name(what);
  if (s.empty()) throw std::invalid_argument(name + ": empty sentence");
  if (s.back() != Vocabulary::kEos) throw std::invalid_argument(name + ": sentence is not EOS-terminated");
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] >= vocab.size())
      throw std::invalid_argument(name + ": id " + std::to_string(s[i]) + " at position " + std::to_string(i) +
                                  " is outside a vocabulary of size " + std::to_string(vocab.size()));
    if (s[i] == Vocabulary::kEos && i + 1 != s.size())
      throw std::invalid_argument(name + ": EOS before the end of the sentence");
  }
}

std::vector<std::string> split_whitespace(std::string_view line) {
  std::vector<std::string> out;
  std::istringstream is{std::string(line)};
  std::string tok;
  while (is >> tok) out.push_back(tok);
  return out;
}

}  // namespace pivotnmt
