#pragma once

#include <array>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "pivotnmt/corpus.hpp"
#include "pivotnmt/decoding.hpp"
#include "pivotnmt/model.hpp"

namespace pivotnmt {

struct BleuReport {
  double score = 0.0;                     // 0..100
  std::array<double, 4> precisions{};     // modified n-gram precisions, 0 when no n-grams exist
  std::array<std::size_t, 4> matches{};   // clipped n-gram matches per order
  std::array<std::size_t, 4> totals{};    // hypothesis n-grams per order
  double brevity_penalty = 1.0;
  std::size_t hypothesis_length = 0;
  std::size_t reference_length = 0;
};

// Corpus-level BLEU with one reference per hypothesis and multi-bleu
// conventions: no smoothing, score 0 when any precision is 0, brevity
// penalty exp(1 - r/c) when c < r. Throws std::invalid_argument for an empty
// or mismatched hypothesis list.
BleuReport bleu(std::span<const Tokens> hypotheses, std::span<const Tokens> references,
                bool case_insensitive = false);

std::string bleu_to_json(const BleuReport& report);

// Fraction of hypotheses equal to their reference token for token.
double eval_accuracy(std::span<const Tokens> hypotheses, std::span<const Tokens> references);

// Number of EOS-terminated sequences of at most max_len tokens over
// `alphabet` non-EOS symbols; saturates at SIZE_MAX.
std::size_t enumeration_size(std::size_t alphabet, std::size_t max_len);

inline constexpr std::size_t kEnumerationGuard = 1000000;

// log sum_z P(z | x; xz) P(y | z; zy) over every decodable pivot sequence of
// at most max_len tokens. Throws std::invalid_argument naming the required
// enumeration size when it exceeds `guard`.
double exact_marginal(const ParameterSet& xz, const ParameterSet& zy, std::span<const TokenId> x,
                      std::span<const TokenId> y, std::size_t max_len, std::size_t guard = kEnumerationGuard);

struct CostPoint {
  std::size_t iteration = 0;
  double cost = 0.0;     // xz_cost + zy_cost
  double xz_cost = 0.0;  // mean -log P(z | x)
  double zy_cost = 0.0;  // mean -log P(y | z)
};

// Mean gold-pivot cost over test triples. Throws std::invalid_argument when a
// triple lacks a pivot (or any side is empty).
CostPoint test_cost(const ParameterSet& xz, const ParameterSet& zy, std::span<const TextTriple> triples,
                    std::size_t iteration = 0);

// One point per manifest, in the order given.
std::vector<CostPoint> test_cost_curve(std::span<const std::filesystem::path> manifests,
                                       std::span<const TextTriple> triples);

std::string cost_point_to_json(const CostPoint& point);

struct PivotedOutput {
  std::vector<Tokens> pivots;
  std::vector<Tokens> targets;
  std::vector<double> pivot_log_probs;
  std::vector<double> target_log_probs;
};

// Two-step translation of every source sentence.
PivotedOutput translate_sources(const ParameterSet& xz, const ParameterSet& zy, std::span<const Tokens> sources,
                                const BeamOptions& options);

struct PivotedScores {
  BleuReport target_bleu;
  BleuReport pivot_bleu;
  double target_accuracy = 0.0;
  double pivot_accuracy = 0.0;
};

PivotedScores evaluate_pivoted(const ParameterSet& xz, const ParameterSet& zy, std::span<const TextTriple> triples,
                               const BeamOptions& options, bool case_insensitive = true);

}  // namespace pivotnmt
