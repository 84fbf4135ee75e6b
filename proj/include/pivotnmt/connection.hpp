#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pivotnmt/checkpoint.hpp"
#include "pivotnmt/decoding.hpp"
#include "pivotnmt/model.hpp"

namespace pivotnmt {

struct SharedPivotEntry {
  std::string word;
  TokenId xz_id = 0;  // id in the source-to-pivot target vocabulary
  TokenId zy_id = 0;  // id in the pivot-to-target source vocabulary

  friend bool operator==(const SharedPivotEntry&, const SharedPivotEntry&) = default;
};

// Pivot words known to both models, sorted by surface form.
struct SharedPivotVocab {
  std::vector<SharedPivotEntry> entries;

  std::size_t size() const { return entries.size(); }
  bool empty() const { return entries.empty(); }
};

// Intersection of the two pivot vocabularies by surface token. Reserved
// tokens are left out unless include_reserved is set.
SharedPivotVocab build_shared_vocab(const Vocabulary& pivot_of_xz, const Vocabulary& pivot_of_zy,
                                    bool include_reserved = false);

// Makes every shared pivot row of `zy` point at the matching row of `xz`, so
// both models read and update one storage location. Tied rows get the tag
// "pivot:<word>". Throws std::invalid_argument when embedding sizes differ.
TieRecord enforce_hard_tie(ParameterSet& xz, ParameterSet& zy, const SharedPivotVocab& shared);

// True iff every shared word has bitwise-identical rows in both models.
bool evaluate_hard(const ParameterSet& xz, const ParameterSet& zy, const SharedPivotVocab& shared);

struct ConnectionResult {
  double value = 0.0;
  GradientMap grads;  // derivative of value with respect to the parameters
};

// -sum over shared words of the Euclidean distance between the two rows.
Var soft_penalty(Graph& g, const ParameterSet& xz, const ParameterSet& zy, const SharedPivotVocab& shared);
ConnectionResult soft_penalty(const ParameterSet& xz, const ParameterSet& zy, const SharedPivotVocab& shared);

// log sum_i P(z_i | x; xz) P(y | z_i; zy) for a fixed pivot list. Pivots are
// in the xz target vocabulary and are remapped by surface form for zy.
Var bridge_log_likelihood(Graph& g, const ParameterSet& xz, const ParameterSet& zy, std::span<const TokenId> x,
                          std::span<const TokenId> y, std::span<const Sentence> pivots);

struct BridgePosterior {
  std::vector<Hypothesis> pivots;
  std::vector<double> weights;  // normalized over the pivot list
  double log_likelihood = 0.0;
};

struct LikelihoodResult {
  double value = 0.0;  // mean log-likelihood over the pairs that were scored
  GradientMap grads;
  std::vector<BridgePosterior> posteriors;  // one per scored pair
  std::size_t skipped = 0;
};

struct LikelihoodOptions {
  std::size_t k = 10;
  std::size_t beam = 0;  // 0 means k
  std::size_t max_len = 50;
};

// Top-k pivots of each pair are searched under the current xz parameters and
// then held fixed; gradients flow through both models' scores only. Pairs
// where no pivot terminates are skipped; if every pair is skipped a
// std::runtime_error is thrown.
LikelihoodResult likelihood_connection(const ParameterSet& xz, const ParameterSet& zy,
                                       std::span<const SentencePair> bridge, const LikelihoodOptions& options);

enum class ConnectionKind { kNone, kHard, kSoft, kLikelihood };

std::string to_string(ConnectionKind kind);
// Accepts "none", "hard", "soft" and "likelihood".
ConnectionKind parse_connection_kind(std::string_view name);

struct ConnectionMode {
  ConnectionKind kind = ConnectionKind::kNone;
  std::size_t k = 10;
  std::size_t bridge_batch = 8;
  std::size_t beam = 0;  // 0 means k
  std::size_t max_len = 50;
  bool include_reserved = false;
};

// Dispatches on mode.kind. None and hard return a zero value and no
// gradients. Likelihood mode rejects an empty bridge batch with
// std::invalid_argument.
ConnectionResult connection_value_and_grads(const ConnectionMode& mode, const ParameterSet& xz,
                                            const ParameterSet& zy, const SharedPivotVocab& shared,
                                            std::span<const SentencePair> bridge_batch);

}  // namespace pivotnmt
