#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace pivotnmt {

struct GradSuiteRow {
  std::string name;
  std::string group;  // "elementwise", "heavy", "sentence", "soft", "likelihood"
  double tolerance = 0.0;
  double error = 0.0;  // max |analytic - numeric| / max(1, |numeric|)
  std::size_t entries = 0;
  bool passed = false;
};

// Tolerances per group.
inline constexpr double kElementwiseTolerance = 1e-6;
inline constexpr double kHeavyTolerance = 1e-5;  // matmul, softmax, cross-entropy, logsumexp
inline constexpr double kSentenceTolerance = 1e-4;
inline constexpr double kSoftPenaltyTolerance = 1e-5;
inline constexpr double kLikelihoodTolerance = 1e-3;

// Central-difference checks of every op kind, of the full sentence
// likelihood, of the soft penalty away from zero distance and of the
// likelihood connection with fixed pivot lists (untied and hard-tied).
std::vector<GradSuiteRow> run_gradient_suite(std::uint64_t seed = 7);

}  // namespace pivotnmt
