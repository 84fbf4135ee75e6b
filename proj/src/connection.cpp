#include "pivotnmt/connection.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace pivotnmt {

SharedPivotVocab build_shared_vocab(const Vocabulary& pivot_of_xz, const Vocabulary& pivot_of_zy,
                                    bool include_reserved) {
  SharedPivotVocab shared;
  const auto tokens = pivot_of_xz.tokens();
  for (TokenId id = 0; id < tokens.size(); ++id) {
    if (!include_reserved && Vocabulary::is_reserved(id)) continue;
    if (auto other = pivot_of_zy.find(tokens[id])) shared.entries.push_back({tokens[id], id, *other});
  }
  std::sort(shared.entries.begin(), shared.entries.end(),
            [](const SharedPivotEntry& a, const SharedPivotEntry& b) { return a.word < b.word; });
  return shared;
}

TieRecord enforce_hard_tie(ParameterSet& xz, ParameterSet& zy, const SharedPivotVocab& shared) {
  if (xz.dims.embed != zy.dims.embed)
    throw std::invalid_argument("enforce_hard_tie: embedding sizes differ (" + std::to_string(xz.dims.embed) +
                                " vs " + std::to_string(zy.dims.embed) + ")");
  TieRecord record;
  for (const SharedPivotEntry& e : shared.entries) {
    ParameterPtr& row = xz.target_embed.rows.at(e.xz_id);
    row->tie_tag = "pivot:" + e.word;
    zy.source_embed.rows.at(e.zy_id) = row;
    record.words.push_back({e.word, e.xz_id, e.zy_id});
  }
  return record;
}

bool evaluate_hard(const ParameterSet& xz, const ParameterSet& zy, const SharedPivotVocab& shared) {
  for (const SharedPivotEntry& e : shared.entries) {
    const Parameter& a = xz.target_embed.row(e.xz_id);
    const Parameter& b = zy.source_embed.row(e.zy_id);
    if (&a == &b) continue;
    if (!(a.value == b.value)) return false;
  }
  return true;
}

Var soft_penalty(Graph& g, const ParameterSet& xz, const ParameterSet& zy, const SharedPivotVocab& shared) {
  if (xz.dims.embed != zy.dims.embed) throw std::invalid_argument("soft_penalty: embedding sizes differ");
  std::vector<Var> distances;
  distances.reserve(shared.size());
  for (const SharedPivotEntry& e : shared.entries) {
    Var a = g.parameter(xz.target_embed.row(e.xz_id));
    Var b = g.parameter(zy.source_embed.row(e.zy_id));
    distances.push_back(norm(sub(a, b)));
  }
  if (distances.empty()) return g.input(Tensor::scalar(0.0));
  return negate(add_n(distances));
}

ConnectionResult soft_penalty(const ParameterSet& xz, const ParameterSet& zy, const SharedPivotVocab& shared) {
  ConnectionResult out;
  if (shared.empty()) return out;
  Graph g;
  Var r = soft_penalty(g, xz, zy, shared);
  out.value = r.item();
  g.backward(r);
  g.collect(out.grads);
  return out;
}

namespace {

struct BridgeGraph {
  Var root;
  std::vector<Var> terms;  // log P(z_i | x) + log P(y | z_i), each of shape [1]
};

BridgeGraph build_bridge(Graph& g, const ParameterSet& xz, const ParameterSet& zy, std::span<const TokenId> x,
                         std::span<const TokenId> y, std::span<const Sentence> pivots) {
  if (pivots.empty()) throw std::invalid_argument("bridge_log_likelihood: empty pivot list");
  const Encoding source = encode(g, xz, x);
  BridgeGraph out;
  out.terms.reserve(pivots.size());
  for (const Sentence& z : pivots) {
    Var to_pivot = sentence_nll(g, xz, source, z);
    const Sentence z_in = remap_sentence(*xz.target_vocab, *zy.source_vocab, z);
    const Encoding pivot = encode(g, zy, z_in);
    Var to_target = sentence_nll(g, zy, pivot, y);
    out.terms.push_back(reshape(negate(add(to_pivot, to_target)), Shape{1}));
  }
  out.root = logsumexp(concat(out.terms));
  return out;
}

}  // namespace

Var bridge_log_likelihood(Graph& g, const ParameterSet& xz, const ParameterSet& zy, std::span<const TokenId> x,
                          std::span<const TokenId> y, std::span<const Sentence> pivots) {
  return build_bridge(g, xz, zy, x, y, pivots).root;
}

LikelihoodResult likelihood_connection(const ParameterSet& xz, const ParameterSet& zy,
                                       std::span<const SentencePair> bridge, const LikelihoodOptions& options) {
  if (bridge.empty()) throw std::invalid_argument("likelihood_connection: empty bridge batch");
  if (options.k < 1) throw std::invalid_argument("likelihood_connection: k must be >= 1");

  LikelihoodResult out;
  std::vector<GradientMap> per_pair;
  double total = 0.0;
  for (std::size_t i = 0; i < bridge.size(); ++i) {
    const SentencePair& pair = bridge[i];
    BridgePosterior post;
    post.pivots = top_k_pivots(xz, pair.left, options.k, options.max_len, options.beam);
    if (post.pivots.empty()) {
      ++out.skipped;
      continue;
    }
    std::vector<Sentence> pivots;
    for (const Hypothesis& h : post.pivots) pivots.push_back(h.tokens);

    Graph g;
    BridgeGraph bridge_graph;
    try {
      bridge_graph = build_bridge(g, xz, zy, pair.left, pair.right, pivots);
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument("bridge pair " + std::to_string(i) + ": " + e.what());
    }
    post.log_likelihood = bridge_graph.root.item();
    g.backward(bridge_graph.root);
    // Each pivot's share of the partial sum; backward already applies these
    // weights to the two models' score gradients.
    for (const Var& t : bridge_graph.terms) post.weights.push_back(std::exp(t.item() - post.log_likelihood));

    total += post.log_likelihood;
    GradientMap grads;
    g.collect(grads);
    per_pair.push_back(std::move(grads));
    out.posteriors.push_back(std::move(post));
  }
  if (out.posteriors.empty())
    throw std::runtime_error("likelihood_connection: all " + std::to_string(bridge.size()) +
                             " bridge pairs were skipped (no pivot terminated)");
  const double inv = 1.0 / static_cast<double>(out.posteriors.size());
  out.value = total * inv;
  for (const GradientMap& m : per_pair) out.grads.merge(m, inv);
  return out;
}

std::string to_string(ConnectionKind kind) {
  switch (kind) {
    case ConnectionKind::kNone: return "none";
    case ConnectionKind::kHard: return "hard";
    case ConnectionKind::kSoft: return "soft";
    case ConnectionKind::kLikelihood: return "likelihood";
  }
  return "none";
}

ConnectionKind parse_connection_kind(std::string_view name) {
  if (name == "none") return ConnectionKind::kNone;
  if (name == "hard") return ConnectionKind::kHard;
  if (name == "soft") return ConnectionKind::kSoft;
  if (name == "likelihood") return ConnectionKind::kLikelihood;
  throw std::invalid_argument("unknown connection mode '" + std::string(name) +
                              "' (expected none, hard, soft or likelihood)");
}

ConnectionResult connection_value_and_grads(const ConnectionMode& mode, const ParameterSet& xz,
                                            const ParameterSet& zy, const SharedPivotVocab& shared,
                                            std::span<const SentencePair> bridge_batch) {
  switch (mode.kind) {
    case ConnectionKind::kNone:
    case ConnectionKind::kHard:
      return {};
    case ConnectionKind::kSoft:
      return soft_penalty(xz, zy, shared);
    case ConnectionKind::kLikelihood: {
      if (bridge_batch.empty())
        throw std::invalid_argument("likelihood connection needs a bridging corpus, but none was supplied");
      LikelihoodResult r = likelihood_connection(xz, zy, bridge_batch, {mode.k, mode.beam, mode.max_len});
      return {r.value, std::move(r.grads)};
    }
  }
  return {};
}

}  // namespace pivotnmt
