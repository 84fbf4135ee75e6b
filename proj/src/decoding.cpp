#include "pivotnmt/decoding.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace pivotnmt {

bool decodable(TokenId id) { return id != Vocabulary::kBos && id != Vocabulary::kPad; }

namespace {

struct BeamItem {
  Sentence tokens;
  double score = 0.0;
  bool done = false;
  Var state;
};

double rank_score(const BeamItem& item, bool normalize) {
  if (!normalize || item.tokens.empty()) return item.score;
  return item.score / static_cast<double>(item.tokens.size());
}

}  // namespace

std::vector<Hypothesis> beam_search(const ParameterSet& params, std::span<const TokenId> x,
                                    const BeamOptions& options) {
  if (options.beam < 1) throw std::invalid_argument("beam_search: beam must be >= 1");
  if (options.max_len < 1) throw std::invalid_argument("beam_search: max_len must be >= 1");

  Graph g;
  const Encoding enc = encode(g, params, x);
  const std::size_t vocab = params.target_vocab->size();
  const bool normalize = options.length_normalize;

  auto better = [normalize](const BeamItem& a, const BeamItem& b) {
    const double sa = rank_score(a, normalize);
    const double sb = rank_score(b, normalize);
    if (sa != sb) return sa > sb;
    return a.tokens < b.tokens;
  };

  std::vector<BeamItem> pool;
  pool.push_back({{}, 0.0, false, enc.initial_state});

  for (std::size_t step = 1; step <= options.max_len; ++step) {
    std::vector<BeamItem> next;
    for (const BeamItem& item : pool)
      if (item.done) next.push_back(item);
    for (const BeamItem& item : pool) {
      if (item.done) continue;
      const TokenId prev = item.tokens.empty() ? Vocabulary::kBos : item.tokens.back();
      const DecoderStep st = decoder_step(g, params, item.state, prev, enc);
      const auto lp = log_softmax(st.logits.value().values());
      for (TokenId tok = 0; tok < vocab; ++tok) {
        if (!decodable(tok)) continue;
        const bool eos = tok == Vocabulary::kEos;
        if (step == options.max_len && !eos) continue;
        BeamItem cand{item.tokens, item.score + lp[tok], eos, st.state};
        cand.tokens.push_back(tok);
        next.push_back(std::move(cand));
      }
    }
    std::sort(next.begin(), next.end(), better);
    if (next.size() > options.beam) next.resize(options.beam);
    pool = std::move(next);

    const bool any_live = std::any_of(pool.begin(), pool.end(), [](const BeamItem& i) { return !i.done; });
    if (!any_live) break;
  }

  std::vector<Hypothesis> out;
  for (BeamItem& item : pool) {
    if (!item.done) continue;
    out.push_back({std::move(item.tokens), item.score, true});
  }
  return out;
}

std::vector<Hypothesis> top_k_pivots(const ParameterSet& params, std::span<const TokenId> x, std::size_t k,
                                     std::size_t max_len, std::size_t beam) {
  if (k < 1) throw std::invalid_argument("top_k_pivots: k must be >= 1");
  BeamOptions options;
  options.beam = std::max(k, beam);
  options.max_len = max_len;
  auto hyps = beam_search(params, x, options);
  if (hyps.size() > k) hyps.resize(k);
  return hyps;
}

Sentence remap_sentence(const Vocabulary& from, const Vocabulary& to, std::span<const TokenId> s) {
  Sentence out;
  out.reserve(s.size());
  for (TokenId id : s) out.push_back(Vocabulary::is_reserved(id) ? id : to.id(from.token(id)));
  return out;
}

void check_vocab_chain(const ParameterSet& source_to_pivot, const ParameterSet& pivot_to_target) {
  const Vocabulary& produced = *source_to_pivot.target_vocab;
  const Vocabulary& consumed = *pivot_to_target.source_vocab;
  for (const std::string& w : produced.words())
    if (consumed.find(w)) return;
  throw std::invalid_argument("pivot vocabularies do not chain: no word of the source-to-pivot output vocabulary "
                              "is known to the pivot-to-target model");
}

PivotTranslation translate_pivoted(const ParameterSet& source_to_pivot, const ParameterSet& pivot_to_target,
                                   std::span<const TokenId> x, const BeamOptions& options) {
  check_vocab_chain(source_to_pivot, pivot_to_target);
  auto pivots = beam_search(source_to_pivot, x, options);
  if (pivots.empty()) throw std::runtime_error("source-to-pivot step: no hypothesis terminated within max_len");
  const Sentence pivot_input =
      remap_sentence(*source_to_pivot.target_vocab, *pivot_to_target.source_vocab, pivots.front().tokens);
  auto targets = beam_search(pivot_to_target, pivot_input, options);
  if (targets.empty()) throw std::runtime_error("pivot-to-target step: no hypothesis terminated within max_len");
  return {std::move(pivots.front()), std::move(targets.front())};
}

}  // namespace pivotnmt
