#include "pivotnmt/model.hpp"

#include <cmath>
#include <random>
#include <stdexcept>
#include <string>
#include <unordered_map>

namespace pivotnmt {

namespace {

constexpr double kInitRange = 0.08;

ParameterPtr make_param(std::string name, Shape shape) {
  auto p = std::make_shared<Parameter>();
  p->name = std::move(name);
  p->value = Tensor(shape);
  return p;
}

GruWeights make_gru(const std::string& prefix, std::size_t in, std::size_t h) {
  return GruWeights{make_param(prefix + "/input", Shape{in, 3 * h}),
                    make_param(prefix + "/gates_hidden", Shape{h, 2 * h}),
                    make_param(prefix + "/candidate_hidden", Shape{h, h}), make_param(prefix + "/bias", Shape{3 * h})};
}

EmbeddingTable make_table(const std::string& prefix, std::size_t rows, std::size_t d) {
  EmbeddingTable t;
  t.rows.reserve(rows);
  for (std::size_t i = 0; i < rows; ++i) t.rows.push_back(make_param(prefix + "/" + std::to_string(i), Shape{d}));
  return t;
}

Var gru_step(Graph& g, const GruWeights& w, Var x, Var h, std::size_t hidden) {
  Var xw = add(matmul(x, g.parameter(*w.input)), g.parameter(*w.bias));
  Var hw = matmul(h, g.parameter(*w.gates_hidden));
  Var update = sigmoid(add(slice(xw, 0, hidden), slice(hw, 0, hidden)));
  Var reset = sigmoid(add(slice(xw, hidden, 2 * hidden), slice(hw, hidden, 2 * hidden)));
  Var candidate =
      tanh(add(slice(xw, 2 * hidden, 3 * hidden), matmul(mul(reset, h), g.parameter(*w.candidate_hidden))));
  // h + z * (candidate - h) == (1 - z) * h + z * candidate
  return add(h, mul(update, sub(candidate, h)));
}

void check_ids(const Vocabulary& vocab, std::span<const TokenId> s, const char* what) {
  validate_sentence(vocab, s, what);
}

}  // namespace

std::vector<ParameterPtr> ParameterSet::all() const {
  std::vector<ParameterPtr> out;
  out.reserve(source_embed.size() + target_embed.size() + 20);
  out.insert(out.end(), source_embed.rows.begin(), source_embed.rows.end());
  out.insert(out.end(), target_embed.rows.begin(), target_embed.rows.end());
  for (const GruWeights* w : {&encoder_forward, &encoder_backward, &decoder}) {
    out.push_back(w->input);
    out.push_back(w->gates_hidden);
    out.push_back(w->candidate_hidden);
    out.push_back(w->bias);
  }
  for (const ParameterPtr& p : {init_weight, init_bias, attention_state, attention_annotation, attention_score,
                                readout_weight, readout_bias, output_weight, output_bias})
    out.push_back(p);
  return out;
}

std::vector<Parameter*> ParameterSet::raw() const {
  std::vector<Parameter*> out;
  for (const auto& p : all()) out.push_back(p.get());
  return out;
}

std::vector<std::string> ParameterSet::slot_names() const {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < source_embed.size(); ++i) out.push_back("source_embed/" + std::to_string(i));
  for (std::size_t i = 0; i < target_embed.size(); ++i) out.push_back("target_embed/" + std::to_string(i));
  for (const char* prefix : {"encoder_forward", "encoder_backward", "decoder"})
    for (const char* part : {"input", "gates_hidden", "candidate_hidden", "bias"})
      out.push_back(std::string(prefix) + "/" + part);
  for (const char* name : {"init_weight", "init_bias", "attention_state", "attention_annotation", "attention_score",
                           "readout_weight", "readout_bias", "output_weight", "output_bias"})
    out.emplace_back(name);
  return out;
}

std::size_t ParameterSet::scalar_count() const {
  std::size_t n = 0;
  for (const auto& p : all()) n += p->value.size();
  return n;
}

namespace {

// Rebuilds every ParameterPtr in `set` through `remap`, which returns the copy
// of a given storage (creating it on first sight).
template <typename Remap>
void remap_all(ParameterSet& set, Remap&& remap) {
  for (auto& r : set.source_embed.rows) r = remap(r);
  for (auto& r : set.target_embed.rows) r = remap(r);
  for (GruWeights* w : {&set.encoder_forward, &set.encoder_backward, &set.decoder}) {
    w->input = remap(w->input);
    w->gates_hidden = remap(w->gates_hidden);
    w->candidate_hidden = remap(w->candidate_hidden);
    w->bias = remap(w->bias);
  }
  for (ParameterPtr* p : {&set.init_weight, &set.init_bias, &set.attention_state, &set.attention_annotation,
                          &set.attention_score, &set.readout_weight, &set.readout_bias, &set.output_weight,
                          &set.output_bias})
    *p = remap(*p);
}

}  // namespace

ParameterSet ParameterSet::clone() const {
  ParameterSet copy = *this;
  std::unordered_map<const Parameter*, ParameterPtr> seen;
  remap_all(copy, [&seen](const ParameterPtr& p) {
    auto [it, inserted] = seen.try_emplace(p.get());
    if (inserted) it->second = std::make_shared<Parameter>(*p);
    return it->second;
  });
  return copy;
}

std::pair<ParameterSet, ParameterSet> clone_pair(const ParameterSet& a, const ParameterSet& b) {
  std::unordered_map<const Parameter*, ParameterPtr> seen;
  auto remap = [&seen](const ParameterPtr& p) {
    auto [it, inserted] = seen.try_emplace(p.get());
    if (inserted) it->second = std::make_shared<Parameter>(*p);
    return it->second;
  };
  ParameterSet ca = a;
  ParameterSet cb = b;
  remap_all(ca, remap);
  remap_all(cb, remap);
  return {std::move(ca), std::move(cb)};
}

ParameterSet allocate_params(const Vocabulary& source, const Vocabulary& target, std::size_t embed_dim,
                             std::size_t hidden_dim) {
  if (embed_dim < 1 || hidden_dim < 1) throw std::invalid_argument("init_params: dimensions must be >= 1");
  if (source.word_count() == 0) throw std::invalid_argument("init_params: empty source vocabulary");
  if (target.word_count() == 0) throw std::invalid_argument("init_params: empty target vocabulary");

  const std::size_t d = embed_dim, h = hidden_dim;
  ParameterSet p;
  p.dims = {d, h};
  p.source_vocab = std::make_shared<const Vocabulary>(source);
  p.target_vocab = std::make_shared<const Vocabulary>(target);
  p.source_embed = make_table("source_embed", source.size(), d);
  p.target_embed = make_table("target_embed", target.size(), d);
  p.encoder_forward = make_gru("encoder_forward", d, h);
  p.encoder_backward = make_gru("encoder_backward", d, h);
  p.decoder = make_gru("decoder", d + 2 * h, h);
  p.init_weight = make_param("init_weight", Shape{h, h});
  p.init_bias = make_param("init_bias", Shape{h});
  p.attention_state = make_param("attention_state", Shape{h, h});
  p.attention_annotation = make_param("attention_annotation", Shape{2 * h, h});
  p.attention_score = make_param("attention_score", Shape{h});
  p.readout_weight = make_param("readout_weight", Shape{h + 2 * h + d, h});
  p.readout_bias = make_param("readout_bias", Shape{h});
  p.output_weight = make_param("output_weight", Shape{h, target.size()});
  p.output_bias = make_param("output_bias", Shape{target.size()});
  return p;
}

ParameterSet init_params(const Vocabulary& source, const Vocabulary& target, std::size_t embed_dim,
                         std::size_t hidden_dim, std::uint64_t seed) {
  ParameterSet p = allocate_params(source, target, embed_dim, hidden_dim);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-kInitRange, kInitRange);
  for (const auto& param : p.all())
    for (double& v : param->value.values()) v = dist(rng);
  return p;
}

void zero_params(ParameterSet& params) {
  for (const auto& p : params.all()) p->value.fill(0.0);
}

Encoding encode(Graph& g, const ParameterSet& params, std::span<const TokenId> x) {
  check_ids(*params.source_vocab, x, "encode");
  const std::size_t h = params.dims.hidden;
  const std::size_t n = x.size();

  std::vector<Var> embedded;
  embedded.reserve(n);
  for (TokenId id : x) embedded.push_back(g.parameter(params.source_embed.row(id)));

  const Var zero = g.input(Tensor(Shape{h}));
  std::vector<Var> forward(n), backward(n);
  Var state = zero;
  for (std::size_t i = 0; i < n; ++i) forward[i] = state = gru_step(g, params.encoder_forward, embedded[i], state, h);
  state = zero;
  for (std::size_t i = n; i-- > 0;) backward[i] = state = gru_step(g, params.encoder_backward, embedded[i], state, h);

  std::vector<Var> rows;
  rows.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Var parts[2] = {forward[i], backward[i]};
    rows.push_back(concat(parts));
  }

  Encoding enc;
  enc.length = n;
  enc.annotations = stack(rows);
  enc.projected = matmul(enc.annotations, g.parameter(*params.attention_annotation));
  enc.initial_state =
      tanh(add(matmul(backward[0], g.parameter(*params.init_weight)), g.parameter(*params.init_bias)));
  return enc;
}

Encoding import_encoding(Graph& g, const Encoding& src) {
  Encoding enc;
  enc.length = src.length;
  enc.annotations = g.input(src.annotations.value());
  enc.projected = g.input(src.projected.value());
  enc.initial_state = g.input(src.initial_state.value());
  return enc;
}

DecoderStep decoder_step(Graph& g, const ParameterSet& params, Var state, TokenId prev, const Encoding& enc) {
  const std::size_t h = params.dims.hidden;
  if (!(state.shape() == Shape{h}))
    throw ShapeError("decoder_step: state has shape " + state.shape().str() + ", expected " + Shape{h}.str());
  if (prev >= params.target_vocab->size())
    throw std::invalid_argument("decoder_step: previous token " + std::to_string(prev) + " outside target vocabulary");

  const Var embedded = g.parameter(params.target_embed.row(prev));

  const Var hidden = tanh(add_row(enc.projected, matmul(state, g.parameter(*params.attention_state))));
  const Var weights = softmax(matmul(hidden, g.parameter(*params.attention_score)));
  const Var context = matmul(weights, enc.annotations);

  const Var input_parts[2] = {embedded, context};
  const Var next = gru_step(g, params.decoder, concat(input_parts), state, h);

  const Var readout_parts[3] = {next, context, embedded};
  const Var readout =
      tanh(add(matmul(concat(readout_parts), g.parameter(*params.readout_weight)), g.parameter(*params.readout_bias)));
  const Var logits = add(matmul(readout, g.parameter(*params.output_weight)), g.parameter(*params.output_bias));
  return {next, logits};
}

StepDistribution step_distribution(Graph& g, const ParameterSet& params, Var state, TokenId prev,
                                   const Encoding& enc) {
  DecoderStep step = decoder_step(g, params, state, prev, enc);
  const auto lp = log_softmax(step.logits.value().values());
  StepDistribution out{step.state, std::vector<double>(lp.size())};
  for (std::size_t i = 0; i < lp.size(); ++i) out.probs[i] = std::exp(lp[i]);
  return out;
}

Var sentence_nll(Graph& g, const ParameterSet& params, const Encoding& enc, std::span<const TokenId> y) {
  check_ids(*params.target_vocab, y, "sentence_nll");
  std::vector<Var> terms;
  terms.reserve(y.size());
  Var state = enc.initial_state;
  TokenId prev = Vocabulary::kBos;
  for (TokenId gold : y) {
    DecoderStep step = decoder_step(g, params, state, prev, enc);
    terms.push_back(cross_entropy(step.logits, gold));
    state = step.state;
    prev = gold;
  }
  return add_n(terms);
}

double sentence_log_prob(const ParameterSet& params, std::span<const TokenId> x, std::span<const TokenId> y) {
  Graph g;
  const Encoding enc = encode(g, params, x);
  return -sentence_nll(g, params, enc, y).item();
}

BatchLoss batch_loss_and_grads(const ParameterSet& params, std::span<const SentencePair> batch) {
  if (batch.empty()) throw std::invalid_argument("batch_loss_and_grads: empty batch");
  BatchLoss out;
  const double inv = 1.0 / static_cast<double>(batch.size());
  double total = 0.0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    Graph g;
    Var nll;
    try {
      const Encoding enc = encode(g, params, batch[i].left);
      nll = sentence_nll(g, params, enc, batch[i].right);
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument("batch pair " + std::to_string(i) + ": " + e.what());
    }
    g.backward(nll);
    g.collect(out.grads, inv);
    total += nll.item();
    out.target_tokens += batch[i].right.size();
  }
  out.loss = total * inv;
  return out;
}

double mean_nll(const ParameterSet& params, std::span<const SentencePair> pairs) {
  if (pairs.empty()) return 0.0;
  double total = 0.0;
  for (const auto& p : pairs) total -= sentence_log_prob(params, p.left, p.right);
  return total / static_cast<double>(pairs.size());
}

}  // namespace pivotnmt
