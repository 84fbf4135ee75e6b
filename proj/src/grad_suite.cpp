#include "pivotnmt/grad_suite.hpp"

#include <functional>
#include <random>
#include <unordered_set>

#include "pivotnmt/connection.hpp"
#include "pivotnmt/decoding.hpp"
#include "pivotnmt/gradient_check.hpp"
#include "pivotnmt/model.hpp"

namespace pivotnmt {

namespace {

constexpr double kStep = 1e-5;

Tensor random_tensor(Shape shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> dist(lo, hi);
  Tensor t(shape);
  for (double& v : t.values()) v = dist(rng);
  return t;
}

// Fixed non-uniform weighting so every output entry gets a distinct gradient.
Var weighted_sum(Var v) {
  Graph& g = *v.graph();
  Tensor w(v.shape());
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = 0.5 + 0.25 * static_cast<double>(i % 5);
  return sum(mul(v, g.input(w)));
}

using Unary = std::function<Var(Var)>;
using Nary = std::function<Var(std::span<const Var>)>;

Vocabulary words(const std::string& prefix, std::size_t n) {
  std::vector<std::string> list;
  for (std::size_t i = 0; i < n; ++i) list.push_back(prefix + std::to_string(i));
  return Vocabulary(list);
}

Sentence sentence(std::initializer_list<TokenId> ids) {
  Sentence s(ids);
  s.push_back(Vocabulary::kEos);
  return s;
}

std::vector<Parameter*> unique_params(const ParameterSet& a, const ParameterSet& b) {
  std::vector<Parameter*> out;
  std::unordered_set<Parameter*> seen;
  for (const ParameterSet* set : {&a, &b})
    for (Parameter* p : set->raw())
      if (seen.insert(p).second) out.push_back(p);
  return out;
}

}  // namespace

std::vector<GradSuiteRow> run_gradient_suite(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<GradSuiteRow> rows;

  auto record = [&](const std::string& name, const std::string& group, double tol, const GradCheckResult& r) {
    rows.push_back({name, group, tol, r.max_relative_error, r.entries_checked, r.max_relative_error < tol});
  };
  auto leaf_check = [&](const std::string& name, const std::string& group, double tol, const Nary& f,
                        std::vector<Tensor> leaves) {
    record(name, group, tol,
           gradient_check([&](Graph&, std::span<const Var> v) { return f(v); }, leaves, kStep));
  };
  auto unary = [&](const std::string& name, const std::string& group, double tol, const Unary& f, Tensor x) {
    leaf_check(name, group, tol, [&](std::span<const Var> v) { return f(v[0]); }, {std::move(x)});
  };
  const double ew = kElementwiseTolerance;
  const double hv = kHeavyTolerance;

  leaf_check("matmul matrix-matrix", "heavy", hv, [](auto v) { return weighted_sum(matmul(v[0], v[1])); },
             {random_tensor(Shape{3, 4}, rng), random_tensor(Shape{4, 2}, rng)});
  leaf_check("matmul vector-matrix", "heavy", hv, [](auto v) { return weighted_sum(matmul(v[0], v[1])); },
             {random_tensor(Shape{4}, rng), random_tensor(Shape{4, 3}, rng)});
  leaf_check("matmul matrix-vector", "heavy", hv, [](auto v) { return weighted_sum(matmul(v[0], v[1])); },
             {random_tensor(Shape{3, 4}, rng), random_tensor(Shape{4}, rng)});
  leaf_check("add", "elementwise", ew, [](auto v) { return weighted_sum(add(v[0], v[1])); },
             {random_tensor(Shape{2, 3}, rng), random_tensor(Shape{2, 3}, rng)});
  leaf_check("sub", "elementwise", ew, [](auto v) { return weighted_sum(sub(v[0], v[1])); },
             {random_tensor(Shape{2, 3}, rng), random_tensor(Shape{2, 3}, rng)});
  leaf_check("elementwise-mul", "elementwise", ew, [](auto v) { return weighted_sum(mul(v[0], v[1])); },
             {random_tensor(Shape{2, 3}, rng), random_tensor(Shape{2, 3}, rng)});
  leaf_check("add-row", "elementwise", ew, [](auto v) { return weighted_sum(add_row(v[0], v[1])); },
             {random_tensor(Shape{2, 3}, rng), random_tensor(Shape{3}, rng)});
  unary("scale", "elementwise", ew, [](Var x) { return weighted_sum(scale(x, -2.5)); }, random_tensor(Shape{5}, rng));
  unary("tanh", "elementwise", ew, [](Var x) { return weighted_sum(tanh(x)); }, random_tensor(Shape{5}, rng));
  unary("sigmoid", "elementwise", ew, [](Var x) { return weighted_sum(sigmoid(x)); }, random_tensor(Shape{5}, rng));
  unary("log", "elementwise", ew, [](Var x) { return weighted_sum(log(x)); }, random_tensor(Shape{5}, rng, 0.5, 2.0));
  unary("negate", "elementwise", ew, [](Var x) { return weighted_sum(negate(x)); }, random_tensor(Shape{5}, rng));
  unary("sum", "elementwise", ew, [](Var x) { return sum(x); }, random_tensor(Shape{2, 3}, rng));
  unary("euclidean-norm", "elementwise", ew, [](Var x) { return norm(x); }, random_tensor(Shape{4}, rng));
  leaf_check("concat", "elementwise", ew, [](auto v) { return weighted_sum(concat(v)); },
             {random_tensor(Shape{3}, rng), random_tensor(Shape{2}, rng)});
  leaf_check("stack", "elementwise", ew, [](auto v) { return weighted_sum(stack(v)); },
             {random_tensor(Shape{3}, rng), random_tensor(Shape{3}, rng)});
  leaf_check("add-n", "elementwise", ew, [](auto v) { return weighted_sum(add_n(v)); },
             {random_tensor(Shape{3}, rng), random_tensor(Shape{3}, rng), random_tensor(Shape{3}, rng)});
  unary("slice", "elementwise", ew, [](Var x) { return weighted_sum(slice(x, 1, 4)); }, random_tensor(Shape{5}, rng));
  unary("reshape", "elementwise", ew, [](Var x) { return weighted_sum(reshape(x, Shape{3, 2})); },
        random_tensor(Shape{6}, rng));
  unary("embedding-lookup rows", "elementwise", ew,
        [](Var t) {
          const std::size_t ids[3] = {2, 0, 2};
          return weighted_sum(embedding_lookup(t, ids));
        },
        random_tensor(Shape{4, 3}, rng));
  unary("embedding-lookup row", "elementwise", ew, [](Var t) { return weighted_sum(embedding_lookup(t, 1)); },
        random_tensor(Shape{4, 3}, rng));
  unary("softmax vector", "heavy", hv, [](Var x) { return weighted_sum(softmax(x)); }, random_tensor(Shape{6}, rng));
  unary("softmax matrix", "heavy", hv, [](Var x) { return weighted_sum(softmax(x)); },
        random_tensor(Shape{3, 4}, rng));
  unary("cross-entropy-with-index", "heavy", hv, [](Var x) { return cross_entropy(x, 2); },
        random_tensor(Shape{6}, rng));
  unary("logsumexp", "heavy", hv, [](Var x) { return logsumexp(x); }, random_tensor(Shape{6}, rng));

  // Full models: source vocab 5, pivot vocab 4, target vocab 5, d = h = 4.
  const auto src = std::make_shared<const Vocabulary>(words("s", 5));
  const auto piv = std::make_shared<const Vocabulary>(words("p", 4));
  const auto tgt = std::make_shared<const Vocabulary>(words("t", 5));
  ParameterSet xz = init_params(*src, *piv, 4, 4, seed + 1);
  ParameterSet zy = init_params(*piv, *tgt, 4, 4, seed + 2);
  // Larger weights than the default init so that gradients are not tiny.
  for (ParameterSet* set : {&xz, &zy}) {
    std::uniform_real_distribution<double> dist(-0.5, 0.5);
    for (Parameter* p : set->raw())
      for (double& v : p->value.values()) v = dist(rng);
  }
  const Sentence x = sentence({4, 6, 5, 8});
  const Sentence z = sentence({5, 7, 4});
  const Sentence y = sentence({8, 4, 6});

  record("sentence likelihood (all parameters)", "sentence", kSentenceTolerance,
         gradient_check_parameters(
             [&](Graph& g) { return sentence_nll(g, xz, encode(g, xz, x), z); }, xz.raw(), kStep));

  const SharedPivotVocab shared = build_shared_vocab(*xz.target_vocab, *zy.source_vocab);
  record("soft penalty", "soft", kSoftPenaltyTolerance,
         gradient_check_parameters([&](Graph& g) { return soft_penalty(g, xz, zy, shared); },
                                   unique_params(xz, zy), kStep));

  const auto hyps = top_k_pivots(xz, x, 3, 5);
  std::vector<Sentence> pivots;
  for (const auto& h : hyps) pivots.push_back(h.tokens);
  record("likelihood connection (fixed top-3)", "likelihood", kLikelihoodTolerance,
         gradient_check_parameters([&](Graph& g) { return bridge_log_likelihood(g, xz, zy, x, y, pivots); },
                                   unique_params(xz, zy), kStep));

  auto [txz, tzy] = clone_pair(xz, zy);
  enforce_hard_tie(txz, tzy, shared);
  record("likelihood connection, hard-tied (fixed top-3)", "likelihood", kLikelihoodTolerance,
         gradient_check_parameters([&](Graph& g) { return bridge_log_likelihood(g, txz, tzy, x, y, pivots); },
                                   unique_params(txz, tzy), kStep));
  return rows;
}

}  // namespace pivotnmt
