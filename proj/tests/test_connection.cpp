#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "doctest.h"
#include "pivotnmt/connection.hpp"
#include "pivotnmt/eval.hpp"
#include "pivotnmt/gradient_check.hpp"
#include "test_support.hpp"

using namespace pivotnmt;
using testsupport::make_vocab;
using testsupport::random_sentence;

namespace {

Vocabulary vocab_of(std::vector<std::string> words) { return Vocabulary(words); }

std::vector<Parameter*> union_params(const ParameterSet& a, const ParameterSet& b) {
  std::vector<Parameter*> out;
  std::set<Parameter*> seen;
  for (const ParameterSet* s : {&a, &b})
    for (Parameter* p : s->raw())
      if (seen.insert(p).second) out.push_back(p);
  return out;
}

void scale_all(ParameterSet& p, double factor) {
  for (Parameter* q : p.raw())
    for (double& v : q->value.values()) v *= factor;
}

void apply_random_update(const ParameterSet& p, std::mt19937_64& rng) {
  std::normal_distribution<double> noise(0.0, 0.01);
  for (Parameter* q : p.raw())
    for (double& v : q->value.values()) v -= noise(rng);
}

}  // namespace

TEST_CASE("shared vocabulary is the exact intersection") {
  CHECK(build_shared_vocab(vocab_of({"a", "b"}), vocab_of({"c", "d"})).empty());
  CHECK(build_shared_vocab(make_vocab(6), make_vocab(6)).size() == 6);

  const SharedPivotVocab s = build_shared_vocab(vocab_of({"a", "b", "c"}), vocab_of({"b", "c", "d"}));
  REQUIRE(s.size() == 2);
  CHECK(s.entries[0] == SharedPivotEntry{"b", 5, 4});
  CHECK(s.entries[1] == SharedPivotEntry{"c", 6, 5});

  CHECK(build_shared_vocab(vocab_of({"a"}), vocab_of({"a"}), true).size() == 5);
}

TEST_CASE("shared vocabulary matches a brute-force intersection on random vocabularies") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<std::string> a, b;
    for (int i = 0; i < 30; ++i) {
      const std::string w = "t" + std::to_string(i);
      if (rng() % 2) a.push_back(w);
      if (rng() % 3 == 0) b.push_back(w);
    }
    std::shuffle(a.begin(), a.end(), rng);
    std::shuffle(b.begin(), b.end(), rng);
    const Vocabulary va(a), vb(b);
    std::set<std::string> expected;
    for (const auto& w : a)
      if (std::find(b.begin(), b.end(), w) != b.end()) expected.insert(w);
    const SharedPivotVocab s = build_shared_vocab(va, vb);
    std::set<std::string> got;
    for (const auto& e : s.entries) {
      got.insert(e.word);
      CHECK(va.token(e.xz_id) == e.word);
      CHECK(vb.token(e.zy_id) == e.word);
    }
    CHECK(got == expected);
    CHECK(std::is_sorted(s.entries.begin(), s.entries.end(),
                         [](const auto& x, const auto& y) { return x.word < y.word; }));
  }
}

TEST_CASE("hard tying shares storage and survives updates through either model") {
  const Vocabulary x = make_vocab(4, "x"), z1 = vocab_of({"p", "q", "r", "s"}), z2 = vocab_of({"s", "r", "t"});
  const Vocabulary y = make_vocab(4, "y");
  ParameterSet xz = init_params(x, z1, 4, 4, 1);
  ParameterSet zy = init_params(z2, y, 4, 4, 2);
  const SharedPivotVocab shared = build_shared_vocab(z1, z2);
  REQUIRE(shared.size() == 2);
  const Tensor before = xz.target_embed.row(shared.entries[0].xz_id).value;
  const TieRecord record = enforce_hard_tie(xz, zy, shared);
  CHECK(record.words.size() == 2);
  CHECK(evaluate_hard(xz, zy, shared));
  CHECK(zy.source_embed.row(shared.entries[0].zy_id).value == before);
  CHECK(xz.target_embed.row(shared.entries[0].xz_id).tie_tag == "pivot:" + shared.entries[0].word);

  const TokenId t_id = *z2.find("t");
  const Tensor untied_before = zy.source_embed.row(t_id).value;
  std::mt19937_64 rng(5);
  for (int step = 0; step < 100; ++step) apply_random_update(step % 2 ? xz : zy, rng);
  CHECK(evaluate_hard(xz, zy, shared));
  for (const auto& e : shared.entries)
    CHECK(xz.target_embed.row(e.xz_id).value == zy.source_embed.row(e.zy_id).value);
  // Rows outside the intersection are independent storage.
  CHECK_FALSE(zy.source_embed.row(t_id).value == untied_before);
  CHECK(&zy.source_embed.row(t_id) != &xz.target_embed.row(*z1.find("p")));
  CHECK_FALSE(xz.target_embed.row(*z1.find("p")).value == zy.source_embed.row(t_id).value);

  ParameterSet wide = init_params(z2, y, 5, 4, 3);
  CHECK_THROWS_AS(enforce_hard_tie(xz, wide, shared), std::invalid_argument);
}

TEST_CASE("evaluate_hard detects differing rows and accepts the empty product") {
  const Vocabulary v = make_vocab(3);
  ParameterSet a = init_params(v, v, 3, 3, 1);
  ParameterSet b = init_params(v, v, 3, 3, 1);
  const SharedPivotVocab shared = build_shared_vocab(v, v);
  for (const auto& e : shared.entries) b.source_embed.rows[e.zy_id]->value = a.target_embed.row(e.xz_id).value;
  CHECK(evaluate_hard(a, b, shared));  // separate storage, equal values
  b.source_embed.rows[5]->value[1] += 1e-12;
  CHECK_FALSE(evaluate_hard(a, b, shared));
  CHECK(evaluate_hard(a, b, SharedPivotVocab{}));
}

TEST_CASE("soft penalty values") {
  const Vocabulary v = vocab_of({"a"});
  ParameterSet a = init_params(v, v, 2, 2, 1);
  ParameterSet b = init_params(v, v, 2, 2, 2);
  const SharedPivotVocab shared = build_shared_vocab(v, v);
  a.target_embed.rows[4]->value = Tensor::vector({0.0, 0.0});
  b.source_embed.rows[4]->value = Tensor::vector({3.0, 4.0});
  CHECK(soft_penalty(a, b, shared).value == -5.0);

  b.source_embed.rows[4]->value = Tensor::vector({0.0, 0.0});
  const ConnectionResult same = soft_penalty(a, b, shared);
  CHECK(same.value == 0.0);
  for (const auto& [p, g] : same.grads)
    for (double d : g.values()) CHECK(d == 0.0);

  const Vocabulary v2 = vocab_of({"a", "b"});
  ParameterSet c = init_params(v2, v2, 2, 2, 1);
  ParameterSet d = init_params(v2, v2, 2, 2, 2);
  c.target_embed.rows[4]->value = Tensor::vector({1.0, 0.0});
  d.source_embed.rows[4]->value = Tensor::vector({0.0, 0.0});
  c.target_embed.rows[5]->value = Tensor::vector({0.0, 2.0});
  d.source_embed.rows[5]->value = Tensor::vector({0.0, 0.0});
  CHECK(soft_penalty(c, d, build_shared_vocab(v2, v2)).value == -3.0);
}

TEST_CASE("soft penalty gradient is the unit difference and matches finite differences") {
  const Vocabulary z1 = make_vocab(6, "p"), z2 = make_vocab(5, "p");
  std::mt19937_64 rng(7);
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    ParameterSet a = init_params(make_vocab(2), z1, 5, 3, seed);
    ParameterSet b = init_params(z2, make_vocab(2), 5, 3, seed + 100);
    const SharedPivotVocab shared = build_shared_vocab(z1, z2);
    const ConnectionResult r = soft_penalty(a, b, shared);
    CHECK(r.value < 0.0);
    for (const auto& e : shared.entries) {
      const Tensor& ra = a.target_embed.row(e.xz_id).value;
      const Tensor& rb = b.source_embed.row(e.zy_id).value;
      double n = 0.0;
      for (std::size_t i = 0; i < ra.size(); ++i) n += (ra[i] - rb[i]) * (ra[i] - rb[i]);
      n = std::sqrt(n);
      const Tensor* ga = r.grads.find(&a.target_embed.row(e.xz_id));
      const Tensor* gb = r.grads.find(&b.source_embed.row(e.zy_id));
      REQUIRE(ga);
      REQUIRE(gb);
      for (std::size_t i = 0; i < ra.size(); ++i) {
        CHECK(std::abs((*ga)[i] + (ra[i] - rb[i]) / n) < 1e-12);
        CHECK(std::abs((*gb)[i] - (ra[i] - rb[i]) / n) < 1e-12);
      }
    }
    std::vector<Parameter*> rows;
    for (const auto& e : shared.entries) {
      rows.push_back(a.target_embed.rows[e.xz_id].get());
      rows.push_back(b.source_embed.rows[e.zy_id].get());
    }
    const auto check = gradient_check_parameters([&](Graph& g) { return soft_penalty(g, a, b, shared); }, rows, 1e-6);
    CHECK(check.max_relative_error < 1e-5);
    (void)rng;
  }
}

TEST_CASE("soft penalty is non-positive and zero exactly at coincidence") {
  std::mt19937_64 rng(11);
  const Vocabulary z = make_vocab(4, "p");
  for (int trial = 0; trial < 50; ++trial) {
    ParameterSet a = init_params(z, z, 3, 2, 2 * trial + 1);
    ParameterSet b = init_params(z, z, 3, 2, 2 * trial + 2);
    const SharedPivotVocab shared = build_shared_vocab(z, z);
    const bool coincide = trial % 3 == 0;
    if (coincide)
      for (const auto& e : shared.entries) b.source_embed.rows[e.zy_id]->value = a.target_embed.row(e.xz_id).value;
    const double v = soft_penalty(a, b, shared).value;
    CHECK(v <= 0.0);
    CHECK((v == 0.0) == coincide);
  }
}

TEST_CASE("likelihood connection with a full pivot list equals the exact marginal") {
  const Vocabulary x = make_vocab(3, "x"), z = make_vocab(4, "z"), y = make_vocab(3, "y");
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    ParameterSet xz = init_params(x, z, 3, 4, seed);
    ParameterSet zy = init_params(z, y, 3, 4, seed + 10);
    scale_all(xz, 8.0);
    scale_all(zy, 8.0);
    const SentencePair pair{{4, 5, Vocabulary::kEos}, {6, 4, Vocabulary::kEos}};
    const std::size_t max_len = 3;
    const std::size_t space = enumeration_size(5, max_len);  // UNK + 4 words
    REQUIRE(space == 31);
    const double oracle = exact_marginal(xz, zy, pair.left, pair.right, max_len);
    const std::vector<SentencePair> batch{pair};
    const LikelihoodResult full = likelihood_connection(xz, zy, batch, {space, space, max_len});
    REQUIRE(full.posteriors.front().pivots.size() == space);
    CHECK(std::abs(full.value - oracle) < 1e-10);

    double previous = -1e300;
    for (std::size_t k : {1u, 2u, 4u, 8u, 16u, 31u}) {
      const LikelihoodResult r = likelihood_connection(xz, zy, batch, {k, space, max_len});
      CHECK(r.value >= previous);
      CHECK(r.value <= oracle + 1e-12);
      previous = r.value;
    }
  }
}

TEST_CASE("likelihood connection with k=1 is the single-pivot score") {
  const Vocabulary x = make_vocab(5, "x"), z = make_vocab(5, "z"), y = make_vocab(5, "y");
  ParameterSet xz = init_params(x, z, 4, 4, 4);
  ParameterSet zy = init_params(z, y, 4, 4, 5);
  scale_all(xz, 5.0);
  scale_all(zy, 5.0);
  const std::vector<SentencePair> batch{{{4, 5, 6, Vocabulary::kEos}, {7, Vocabulary::kEos}}};
  const LikelihoodResult r = likelihood_connection(xz, zy, batch, {1, 0, 6});
  const Sentence& best = r.posteriors.front().pivots.front().tokens;
  BeamOptions opt;
  opt.beam = 1;
  opt.max_len = 6;
  CHECK(best == beam_search(xz, batch[0].left, opt).front().tokens);
  const double expected = sentence_log_prob(xz, batch[0].left, best) + sentence_log_prob(zy, best, batch[0].right);
  CHECK(std::abs(r.value - expected) < 1e-10);
  CHECK(r.posteriors.front().weights.front() == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("posterior weights are normalized and the value is a batch mean") {
  const Vocabulary x = make_vocab(5, "x"), z = make_vocab(5, "z"), y = make_vocab(5, "y");
  ParameterSet xz = init_params(x, z, 4, 4, 6);
  ParameterSet zy = init_params(z, y, 4, 4, 7);
  scale_all(xz, 4.0);
  scale_all(zy, 4.0);
  std::mt19937_64 rng(1);
  std::vector<SentencePair> batch;
  for (int i = 0; i < 4; ++i) batch.push_back({random_sentence(x, 2 + i % 2, rng), random_sentence(y, 2, rng)});
  const LikelihoodResult r = likelihood_connection(xz, zy, batch, {4, 0, 6});
  REQUIRE(r.posteriors.size() == batch.size());
  double mean = 0.0;
  for (const auto& p : r.posteriors) {
    double total = 0.0;
    for (double w : p.weights) {
      CHECK(w >= 0.0);
      total += w;
    }
    CHECK(std::abs(total - 1.0) <= 1e-12);
    mean += p.log_likelihood;
  }
  CHECK(std::abs(r.value - mean / 4.0) < 1e-12);
  CHECK(r.skipped == 0);
}

TEST_CASE("likelihood connection gradients match finite differences with fixed pivots") {
  const Vocabulary x = make_vocab(3, "x");
  const Vocabulary z1 = vocab_of({"a", "b", "c"}), z2 = vocab_of({"c", "a", "d"});
  const Vocabulary y = make_vocab(3, "y");
  ParameterSet xz = init_params(x, z1, 3, 3, 8);
  ParameterSet zy = init_params(z2, y, 3, 3, 9);
  scale_all(xz, 4.0);
  scale_all(zy, 4.0);
  const Sentence src{4, 6, Vocabulary::kEos}, tgt{5, Vocabulary::kEos};
  const auto pivots_h = top_k_pivots(xz, src, 4, 4);
  std::vector<Sentence> pivots;
  for (const auto& h : pivots_h) pivots.push_back(h.tokens);
  REQUIRE(pivots.size() == 4);

  auto params = union_params(xz, zy);
  const auto r = gradient_check_parameters(
      [&](Graph& g) { return bridge_log_likelihood(g, xz, zy, src, tgt, pivots); }, params, 1e-5);
  CHECK(r.max_relative_error < 1e-3);

  // Tied rows receive contributions from both models.
  enforce_hard_tie(xz, zy, build_shared_vocab(z1, z2));
  params = union_params(xz, zy);
  const auto tied = gradient_check_parameters(
      [&](Graph& g) { return bridge_log_likelihood(g, xz, zy, src, tgt, pivots); }, params, 1e-5);
  CHECK(tied.max_relative_error < 1e-3);
}

TEST_CASE("connection dispatch") {
  const Vocabulary x = make_vocab(3, "x"), z = make_vocab(3, "z"), y = make_vocab(3, "y");
  ParameterSet xz = init_params(x, z, 3, 3, 1);
  ParameterSet zy = init_params(z, y, 3, 3, 2);
  const SharedPivotVocab shared = build_shared_vocab(z, z);
  ConnectionMode mode;

  const ConnectionResult none = connection_value_and_grads(mode, xz, zy, shared, {});
  CHECK(none.value == 0.0);
  CHECK(none.grads.empty());

  mode.kind = ConnectionKind::kSoft;
  for (const auto& e : shared.entries) zy.source_embed.rows[e.zy_id]->value = xz.target_embed.row(e.xz_id).value;
  const ConnectionResult soft = connection_value_and_grads(mode, xz, zy, shared, {});
  CHECK(soft.value == 0.0);
  for (const auto& [p, g] : soft.grads)
    for (double d : g.values()) CHECK(d == 0.0);

  mode.kind = ConnectionKind::kHard;
  enforce_hard_tie(xz, zy, shared);
  const ConnectionResult hard = connection_value_and_grads(mode, xz, zy, shared, {});
  CHECK(hard.value == 0.0);
  CHECK(hard.grads.empty());
  CHECK(evaluate_hard(xz, zy, shared));

  mode.kind = ConnectionKind::kLikelihood;
  CHECK_THROWS_AS(connection_value_and_grads(mode, xz, zy, shared, {}), std::invalid_argument);
  mode.k = 2;
  mode.max_len = 4;
  const std::vector<SentencePair> bridge{{{4, Vocabulary::kEos}, {5, Vocabulary::kEos}}};
  const ConnectionResult lik = connection_value_and_grads(mode, xz, zy, shared, bridge);
  CHECK(lik.value < 0.0);
  CHECK_FALSE(lik.grads.empty());

  CHECK(parse_connection_kind("likelihood") == ConnectionKind::kLikelihood);
  CHECK(to_string(ConnectionKind::kSoft) == "soft");
  CHECK_THROWS_AS(parse_connection_kind("tied"), std::invalid_argument);
}
