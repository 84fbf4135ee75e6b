#pragma once

#include <span>
#include <vector>

#include "pivotnmt/model.hpp"

namespace pivotnmt {

struct Hypothesis {
  Sentence tokens;  // ends with EOS when terminated
  double log_prob = 0.0;
  bool terminated = false;
};

struct BeamOptions {
  std::size_t beam = 4;
  std::size_t max_len = 50;  // counts the EOS token
  // Ranks finished hypotheses by log_prob / length instead of log_prob.
  // Off by default so scores stay equal to sentence_log_prob.
  bool length_normalize = false;
};

// Tokens a decoder may emit: everything except BOS and PAD.
bool decodable(TokenId id);

// Beam search over the target vocabulary. Finished hypotheses stay in the
// pool and compete with live ones for the `beam` slots. The returned list is
// sorted by descending score, ties broken by lexicographic token order, and
// is empty when nothing terminates within max_len.
std::vector<Hypothesis> beam_search(const ParameterSet& params, std::span<const TokenId> x,
                                    const BeamOptions& options);

// First k hypotheses of a beam search of width max(k, beam); beam = 0 means k.
std::vector<Hypothesis> top_k_pivots(const ParameterSet& params, std::span<const TokenId> x, std::size_t k,
                                     std::size_t max_len, std::size_t beam = 0);

struct PivotTranslation {
  Hypothesis pivot;   // ids in the source-to-pivot target vocabulary
  Hypothesis target;  // ids in the pivot-to-target target vocabulary
};

// Two-step decoding: 1-best pivot, then 1-best target given that pivot.
PivotTranslation translate_pivoted(const ParameterSet& source_to_pivot, const ParameterSet& pivot_to_target,
                                   std::span<const TokenId> x, const BeamOptions& options);

// Maps ids between vocabularies by surface token; reserved ids are kept and
// words missing from `to` become UNK.
Sentence remap_sentence(const Vocabulary& from, const Vocabulary& to, std::span<const TokenId> s);

// Throws std::invalid_argument when the pivot vocabularies of the two models
// share no word, i.e. the cascade cannot pass any pivot token through.
void check_vocab_chain(const ParameterSet& source_to_pivot, const ParameterSet& pivot_to_target);

}  // namespace pivotnmt
