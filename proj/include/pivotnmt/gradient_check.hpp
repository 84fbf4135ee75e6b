#pragma once

#include <cstddef>
#include <functional>
#include <span>

#include "pivotnmt/graph.hpp"

namespace pivotnmt {

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::size_t worst_leaf = 0;
  std::size_t worst_entry = 0;
  std::size_t entries_checked = 0;
};

using LeafRootBuilder = std::function<Var(Graph&, std::span<const Var>)>;
using ParamRootBuilder = std::function<Var(Graph&)>;

// Compares backward() against central differences over every leaf entry.
// Error per entry is |analytic - numeric| / max(1, |numeric|).
GradCheckResult gradient_check(const LeafRootBuilder& build, std::span<const Tensor> leaves, double step);

// Same check with parameters as the leaves. Parameter values are perturbed
// in place and restored before returning.
GradCheckResult gradient_check_parameters(const ParamRootBuilder& build, std::span<Parameter* const> params,
                                          double step);

}  // namespace pivotnmt
