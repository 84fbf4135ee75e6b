#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "pivotnmt/graph.hpp"
#include "pivotnmt/vocabulary.hpp"

namespace pivotnmt {

struct ModelDims {
  std::size_t embed = 16;
  std::size_t hidden = 16;
};

// GRU weights, gate order (update, reset, candidate).
struct GruWeights {
  ParameterPtr input;             // in x 3h
  ParameterPtr gates_hidden;      // h x 2h
  ParameterPtr candidate_hidden;  // h x h
  ParameterPtr bias;              // 3h
};

// One Parameter per row so individual rows can be shared between models.
struct EmbeddingTable {
  std::vector<ParameterPtr> rows;

  std::size_t size() const { return rows.size(); }
  const Parameter& row(TokenId id) const { return *rows.at(id); }
};

// All tensors of one attention-based encoder-decoder.
struct ParameterSet {
  ModelDims dims;
  std::shared_ptr<const Vocabulary> source_vocab;
  std::shared_ptr<const Vocabulary> target_vocab;

  EmbeddingTable source_embed;
  EmbeddingTable target_embed;
  GruWeights encoder_forward;
  GruWeights encoder_backward;
  GruWeights decoder;  // input is [previous embedding; context]
  ParameterPtr init_weight;           // h x h, from the first backward state
  ParameterPtr init_bias;             // h
  ParameterPtr attention_state;       // h x h
  ParameterPtr attention_annotation;  // 2h x h
  ParameterPtr attention_score;       // h
  ParameterPtr readout_weight;        // (h + 2h + d) x h
  ParameterPtr readout_bias;          // h
  ParameterPtr output_weight;         // h x |V_target|
  ParameterPtr output_bias;           // |V_target|

  // Canonical order: embeddings first (source rows, target rows), then the
  // dense tensors. Serialization, initialization and reductions use it.
  std::vector<ParameterPtr> all() const;
  std::vector<Parameter*> raw() const;
  // Position-derived names matching all(), e.g. "source_embed/5".
  std::vector<std::string> slot_names() const;
  std::size_t scalar_count() const;

  // Deep copy; the copy shares no storage with this set.
  ParameterSet clone() const;
};

// Deep copy of two sets that keeps storage shared between them shared.
std::pair<ParameterSet, ParameterSet> clone_pair(const ParameterSet& a, const ParameterSet& b);

// Zero-valued set with the layout implied by the vocabularies and dims.
ParameterSet allocate_params(const Vocabulary& source, const Vocabulary& target, std::size_t embed_dim,
                             std::size_t hidden_dim);

// Uniform [-0.08, 0.08] from a seeded mt19937_64, filled in canonical order.
ParameterSet init_params(const Vocabulary& source, const Vocabulary& target, std::size_t embed_dim,
                         std::size_t hidden_dim, std::uint64_t seed);

// Sets every parameter value to zero.
void zero_params(ParameterSet& params);

struct Encoding {
  Var annotations;      // n x 2h
  Var projected;        // n x h, annotations times attention_annotation
  Var initial_state;    // h
  std::size_t length = 0;
};

struct DecoderStep {
  Var state;
  Var logits;
};

// Bidirectional GRU encoder; x must be valid under the source vocabulary.
Encoding encode(Graph& g, const ParameterSet& params, std::span<const TokenId> x);

// Copies the values of an encoding (possibly from another graph) into g as
// constant leaves. Used by inference code that keeps per-step graphs small.
Encoding import_encoding(Graph& g, const Encoding& src);

// Attention, GRU update and readout for one target position.
DecoderStep decoder_step(Graph& g, const ParameterSet& params, Var state, TokenId prev, const Encoding& enc);

struct StepDistribution {
  Var state;
  std::vector<double> probs;
};

StepDistribution step_distribution(Graph& g, const ParameterSet& params, Var state, TokenId prev,
                                   const Encoding& enc);

// Teacher-forced -log P(y | x) as a graph node (sum of per-step cross-entropies).
Var sentence_nll(Graph& g, const ParameterSet& params, const Encoding& enc, std::span<const TokenId> y);

double sentence_log_prob(const ParameterSet& params, std::span<const TokenId> x, std::span<const TokenId> y);

struct BatchLoss {
  double loss = 0.0;  // mean negative log-likelihood
  GradientMap grads;
  std::size_t target_tokens = 0;
};

// Each pair gets its own graph; per-pair gradients are summed in batch order
// and scaled by 1/|batch|.
BatchLoss batch_loss_and_grads(const ParameterSet& params, std::span<const SentencePair> batch);

// Mean negative log-likelihood without gradients.
double mean_nll(const ParameterSet& params, std::span<const SentencePair> pairs);

}  // namespace pivotnmt
