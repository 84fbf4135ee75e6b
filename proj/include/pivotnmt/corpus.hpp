#pragma once

#include <compare>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pivotnmt/vocabulary.hpp"

namespace pivotnmt {

using Tokens = std::vector<std::string>;

struct TextPair {
  Tokens left;
  Tokens right;

  friend auto operator<=>(const TextPair&, const TextPair&) = default;
};

struct TextTriple {
  Tokens source;
  Tokens pivot;
  Tokens target;

  friend auto operator<=>(const TextTriple&, const TextTriple&) = default;
};

struct TextCorpus {
  std::vector<TextPair> pairs;
  std::size_t dropped = 0;  // pairs removed while loading
};

// Id-encoded corpus plus the vocabularies used to encode it.
struct ParallelCorpus {
  std::shared_ptr<const Vocabulary> left_vocab;
  std::shared_ptr<const Vocabulary> right_vocab;
  std::vector<SentencePair> pairs;

  std::size_t size() const { return pairs.size(); }
  bool empty() const { return pairs.empty(); }
};

std::vector<Tokens> left_side(std::span<const TextPair> pairs);
std::vector<Tokens> right_side(std::span<const TextPair> pairs);

// Keeps the max_size most frequent tokens, ties broken lexicographically.
// Throws std::invalid_argument when max_size is 0.
Vocabulary build_vocab(std::span<const Tokens> sentences, std::size_t max_size);

// Encodes both sides with EOS appended; unknown words become UNK.
ParallelCorpus encode_corpus(std::span<const TextPair> pairs, std::shared_ptr<const Vocabulary> left,
                             std::shared_ptr<const Vocabulary> right);

// One sentence per line, tokens separated by single spaces.
void write_text_lines(const std::filesystem::path& path, std::span<const Tokens> sentences);
std::vector<Tokens> read_text_lines(const std::filesystem::path& path);
void write_text_corpus(const std::filesystem::path& left, const std::filesystem::path& right,
                       std::span<const TextPair> pairs);

inline constexpr std::size_t kDefaultMaxSentenceLength = 50;

// Line-aligned parallel files. Pairs with an empty side or a side longer
// than max_len tokens are dropped and counted. Throws std::invalid_argument
// on unequal line counts and std::runtime_error on unreadable files.
TextCorpus load_text_corpus(const std::filesystem::path& left, const std::filesystem::path& right,
                            std::size_t max_len = kDefaultMaxSentenceLength);

std::vector<TextTriple> load_triples(const std::filesystem::path& source, const std::filesystem::path& pivot,
                                     const std::filesystem::path& target);
void write_triples(const std::filesystem::path& source, const std::filesystem::path& pivot,
                   const std::filesystem::path& target, std::span<const TextTriple> triples);

struct OverlapSplit {
  std::vector<TextPair> xz;  // source-pivot pairs kept
  std::vector<TextPair> zy;  // pivot-target pairs kept
  std::vector<TextPair> dropped_xz;
  std::vector<TextPair> dropped_zy;
  std::size_t overlapped_pivots = 0;  // distinct pivot sentences found in both corpora
  std::size_t pivots_to_xz = 0;
  std::size_t pivots_to_zy = 0;
};

// Pivot sentences occurring on both pivot sides (xz right, zy left) are
// ordered by first occurrence in xz and split in two halves; the first half
// (one larger for an odd count) stays only in xz, the second only in zy.
// Every pair carrying a pivot sentence is kept or dropped with it, and all
// other pairs are kept in their original order.
OverlapSplit split_overlap(std::span<const TextPair> xz, std::span<const TextPair> zy);

// The first `size` pairs of a seeded shuffle, so samples of increasing size
// under one seed are nested. Throws std::invalid_argument if size exceeds
// the corpus.
std::vector<TextPair> subsample_bridge(std::span<const TextPair> pairs, std::size_t size, std::uint64_t seed);

enum class MappingKind { kIdentity, kSubstitution, kReorder, kComposition };

std::string to_string(MappingKind kind);
MappingKind parse_mapping_kind(std::string_view name);

struct SynthTaskSpec {
  std::size_t source_vocab = 20;
  std::size_t pivot_vocab = 20;
  std::size_t target_vocab = 20;
  std::size_t min_len = 3;
  std::size_t max_len = 8;
  MappingKind source_to_pivot = MappingKind::kComposition;
  MappingKind pivot_to_target = MappingKind::kComposition;
  std::size_t window = 3;  // reordering reverses each block of this many tokens
  std::uint64_t seed = 1;
  std::size_t xz_size = 2000;
  std::size_t zy_size = 2000;
  std::size_t bridge_size = 200;
  std::size_t dev_size = 200;
  std::size_t test_size = 200;
  // Zipf exponent of the word distribution for sentences feeding the
  // pivot-target corpus; 0 draws them uniformly like every other split.
  double zy_skew = 0.0;
};

std::string synth_spec_to_json(const SynthTaskSpec& spec);
// Missing fields keep their defaults; unknown fields are rejected.
SynthTaskSpec synth_spec_from_json(std::string_view text);

// The deterministic word mappings of a task.
class SynthMapping {
 public:
  // Throws std::invalid_argument if the vocabulary sizes cannot support the
  // mapping kinds or the window is 0.
  explicit SynthMapping(const SynthTaskSpec& spec);

  Tokens source_to_pivot(const Tokens& source) const;
  Tokens pivot_to_target(const Tokens& pivot) const;
  // Inverse of the source-to-pivot word substitution (identity if none).
  Tokens unsubstitute_pivot(const Tokens& pivot) const;

  static std::string word(std::size_t index) { return "w" + std::to_string(index); }

 private:
  SynthTaskSpec spec_;
  std::vector<std::size_t> f_;  // source word -> pivot word
  std::vector<std::size_t> g_;  // pivot word -> target word
};

struct SynthData {
  std::vector<TextPair> xz;
  std::vector<TextPair> zy;
  std::vector<TextPair> xy;
  std::vector<TextTriple> dev;
  std::vector<TextTriple> test;
};

// All splits use disjoint sets of distinct source sentences.
SynthData generate_synth(const SynthTaskSpec& spec);

}  // namespace pivotnmt
