#include "pivotnmt/eval.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>

#include "json.hpp"
#include "pivotnmt/checkpoint.hpp"

namespace pivotnmt {

namespace {

Tokens fold_case(const Tokens& s) {
  Tokens out = s;
  for (std::string& t : out)
    for (char& c : t) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::map<std::vector<std::string>, std::size_t> ngram_counts(const Tokens& s, std::size_t n) {
  std::map<std::vector<std::string>, std::size_t> counts;
  for (std::size_t i = 0; i + n <= s.size(); ++i)
    ++counts[std::vector<std::string>(s.begin() + static_cast<std::ptrdiff_t>(i),
                                      s.begin() + static_cast<std::ptrdiff_t>(i + n))];
  return counts;
}

}  // namespace

BleuReport bleu(std::span<const Tokens> hypotheses, std::span<const Tokens> references, bool case_insensitive) {
  if (hypotheses.empty()) throw std::invalid_argument("bleu: empty hypothesis set");
  if (hypotheses.size() != references.size())
    throw std::invalid_argument("bleu: " + std::to_string(hypotheses.size()) + " hypotheses but " +
                                std::to_string(references.size()) + " references");
  BleuReport r;
  for (std::size_t i = 0; i < hypotheses.size(); ++i) {
    const Tokens hyp = case_insensitive ? fold_case(hypotheses[i]) : hypotheses[i];
    const Tokens ref = case_insensitive ? fold_case(references[i]) : references[i];
    r.hypothesis_length += hyp.size();
    r.reference_length += ref.size();
    for (std::size_t n = 1; n <= 4; ++n) {
      const auto h = ngram_counts(hyp, n);
      const auto g = ngram_counts(ref, n);
      for (const auto& [gram, count] : h) {
        r.totals[n - 1] += count;
        if (auto it = g.find(gram); it != g.end()) r.matches[n - 1] += std::min(count, it->second);
      }
    }
  }
  bool any_zero = false;
  double log_sum = 0.0;
  for (std::size_t n = 0; n < 4; ++n) {
    r.precisions[n] = r.totals[n] ? static_cast<double>(r.matches[n]) / static_cast<double>(r.totals[n]) : 0.0;
    if (r.precisions[n] == 0.0) any_zero = true;
    else log_sum += std::log(r.precisions[n]);
  }
  const double c = static_cast<double>(r.hypothesis_length);
  const double ref = static_cast<double>(r.reference_length);
  if (r.hypothesis_length == 0) r.brevity_penalty = 0.0;
  else if (c < ref) r.brevity_penalty = std::exp(1.0 - ref / c);
  r.score = any_zero ? 0.0 : 100.0 * r.brevity_penalty * std::exp(log_sum / 4.0);
  return r;
}

std::string bleu_to_json(const BleuReport& r) {
  nlohmann::ordered_json j;
  j["bleu"] = r.score;
  j["precisions"] = r.precisions;
  j["brevity_penalty"] = r.brevity_penalty;
  j["hypothesis_length"] = r.hypothesis_length;
  j["reference_length"] = r.reference_length;
  return j.dump();
}

double eval_accuracy(std::span<const Tokens> hypotheses, std::span<const Tokens> references) {
  if (hypotheses.size() != references.size())
    throw std::invalid_argument("eval_accuracy: " + std::to_string(hypotheses.size()) + " hypotheses but " +
                                std::to_string(references.size()) + " references");
  if (hypotheses.empty()) return 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < hypotheses.size(); ++i) hits += hypotheses[i] == references[i];
  return static_cast<double>(hits) / static_cast<double>(hypotheses.size());
}

std::size_t enumeration_size(std::size_t alphabet, std::size_t max_len) {
  constexpr std::size_t kMax = std::numeric_limits<std::size_t>::max();
  std::size_t total = 0, layer = 1;  // layer = alphabet^(length - 1)
  for (std::size_t len = 1; len <= max_len; ++len) {
    if (total > kMax - layer) return kMax;
    total += layer;
    if (alphabet && layer > kMax / alphabet) {
      layer = kMax;
    } else {
      layer *= alphabet;
    }
  }
  return total;
}

namespace {

struct MarginalSearch {
  const ParameterSet& xz;
  const ParameterSet& zy;
  std::span<const TokenId> y;
  std::size_t max_len;
  const Encoding& source;
  std::vector<double> terms;
  Sentence prefix;

  void visit(const Tensor& state, TokenId prev, double log_prefix) {
    Graph g;
    const Encoding enc = import_encoding(g, source);
    const Var s = prefix.empty() ? enc.initial_state : g.input(state);
    const DecoderStep step = decoder_step(g, xz, s, prev, enc);
    const auto lp = log_softmax(step.logits.value().values());
    const Tensor next_state = step.state.value();
    for (TokenId tok = 0; tok < lp.size(); ++tok) {
      if (!decodable(tok)) continue;
      if (tok == Vocabulary::kEos) {
        prefix.push_back(tok);
        const Sentence z_in = remap_sentence(*xz.target_vocab, *zy.source_vocab, prefix);
        terms.push_back(log_prefix + lp[tok] + sentence_log_prob(zy, z_in, y));
        prefix.pop_back();
      } else if (prefix.size() + 1 < max_len) {
        prefix.push_back(tok);
        visit(next_state, tok, log_prefix + lp[tok]);
        prefix.pop_back();
      }
    }
  }
};

}  // namespace

double exact_marginal(const ParameterSet& xz, const ParameterSet& zy, std::span<const TokenId> x,
                      std::span<const TokenId> y, std::size_t max_len, std::size_t guard) {
  if (max_len < 1) throw std::invalid_argument("exact_marginal: max_len must be >= 1");
  std::size_t alphabet = 0;
  for (TokenId t = 0; t < xz.target_vocab->size(); ++t)
    if (decodable(t) && t != Vocabulary::kEos) ++alphabet;
  const std::size_t needed = enumeration_size(alphabet, max_len);
  if (needed > guard)
    throw std::invalid_argument("exact_marginal: enumeration needs " + std::to_string(needed) +
                                " pivot sequences, above the limit of " + std::to_string(guard));
  validate_sentence(*zy.target_vocab, y, "target");

  Graph g;
  const Encoding source = encode(g, xz, x);
  MarginalSearch search{xz, zy, y, max_len, source, {}, {}};
  search.terms.reserve(needed);
  search.visit(source.initial_state.value(), Vocabulary::kBos, 0.0);

  const double peak = *std::max_element(search.terms.begin(), search.terms.end());
  double total = 0.0;
  for (double t : search.terms) total += std::exp(t - peak);
  return peak + std::log(total);
}

CostPoint test_cost(const ParameterSet& xz, const ParameterSet& zy, std::span<const TextTriple> triples,
                    std::size_t iteration) {
  if (triples.empty()) throw std::invalid_argument("test_cost: no test triples");
  CostPoint p;
  p.iteration = iteration;
  for (std::size_t i = 0; i < triples.size(); ++i) {
    const TextTriple& t = triples[i];
    if (t.pivot.empty()) throw std::invalid_argument("test triple " + std::to_string(i) + " has no gold pivot");
    if (t.source.empty() || t.target.empty())
      throw std::invalid_argument("test triple " + std::to_string(i) + " has an empty side");
    p.xz_cost -= sentence_log_prob(xz, xz.source_vocab->encode(t.source), xz.target_vocab->encode(t.pivot));
    p.zy_cost -= sentence_log_prob(zy, zy.source_vocab->encode(t.pivot), zy.target_vocab->encode(t.target));
  }
  const double n = static_cast<double>(triples.size());
  p.xz_cost /= n;
  p.zy_cost /= n;
  p.cost = p.xz_cost + p.zy_cost;
  return p;
}

std::vector<CostPoint> test_cost_curve(std::span<const std::filesystem::path> manifests,
                                       std::span<const TextTriple> triples) {
  std::vector<CostPoint> out;
  out.reserve(manifests.size());
  for (const auto& path : manifests) {
    const Manifest m = load_manifest(path);
    const PivotModels models = load_pivot_models(path);
    out.push_back(test_cost(models.source_to_pivot, models.pivot_to_target, triples, m.iteration));
  }
  return out;
}

std::string cost_point_to_json(const CostPoint& p) {
  nlohmann::ordered_json j;
  j["iteration"] = p.iteration;
  j["test_cost"] = p.cost;
  j["xz_cost"] = p.xz_cost;
  j["zy_cost"] = p.zy_cost;
  return j.dump();
}

PivotedOutput translate_sources(const ParameterSet& xz, const ParameterSet& zy, std::span<const Tokens> sources,
                                const BeamOptions& options) {
  PivotedOutput out;
  for (const Tokens& s : sources) {
    const PivotTranslation t = translate_pivoted(xz, zy, xz.source_vocab->encode(s), options);
    out.pivots.push_back(xz.target_vocab->decode(t.pivot.tokens));
    out.targets.push_back(zy.target_vocab->decode(t.target.tokens));
    out.pivot_log_probs.push_back(t.pivot.log_prob);
    out.target_log_probs.push_back(t.target.log_prob);
  }
  return out;
}

PivotedScores evaluate_pivoted(const ParameterSet& xz, const ParameterSet& zy, std::span<const TextTriple> triples,
                               const BeamOptions& options, bool case_insensitive) {
  std::vector<Tokens> sources, pivots, targets;
  for (const TextTriple& t : triples) {
    sources.push_back(t.source);
    pivots.push_back(t.pivot);
    targets.push_back(t.target);
  }
  const PivotedOutput out = translate_sources(xz, zy, sources, options);
  PivotedScores s;
  s.target_bleu = bleu(out.targets, targets, case_insensitive);
  s.pivot_bleu = bleu(out.pivots, pivots, case_insensitive);
  s.target_accuracy = eval_accuracy(out.targets, targets);
  s.pivot_accuracy = eval_accuracy(out.pivots, pivots);
  return s;
}

}  // namespace pivotnmt
