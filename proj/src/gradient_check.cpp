#include "pivotnmt/gradient_check.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace pivotnmt {

namespace {

void require_step(double step) {
  if (!(step > 0.0)) throw std::invalid_argument("gradient_check: step must be positive");
}

void update_worst(GradCheckResult& r, double analytic, double numeric, std::size_t leaf, std::size_t entry) {
  const double err = std::abs(analytic - numeric) / std::max(1.0, std::abs(numeric));
  ++r.entries_checked;
  if (err > r.max_relative_error) {
    r.max_relative_error = err;
    r.worst_leaf = leaf;
    r.worst_entry = entry;
  }
}

}  // namespace

GradCheckResult gradient_check(const LeafRootBuilder& build, std::span<const Tensor> leaves, double step) {
  require_step(step);

  auto evaluate = [&](const std::vector<Tensor>& values, std::size_t leaf) {
    Graph g;
    std::vector<Var> vars;
    vars.reserve(values.size());
    for (const Tensor& t : values) vars.push_back(g.input(t));
    try {
      return build(g, vars).item();
    } catch (const NumericError& e) {
      throw NumericError("gradient_check: leaf " + std::to_string(leaf) + ": " + e.what());
    }
  };

  std::vector<Tensor> analytic;
  {
    Graph g;
    std::vector<Var> vars;
    for (const Tensor& t : leaves) vars.push_back(g.input(t));
    Var root = build(g, vars);
    g.backward(root);
    for (const Var& v : vars) analytic.push_back(g.gradient(v));
  }

  GradCheckResult result;
  std::vector<Tensor> work(leaves.begin(), leaves.end());
  for (std::size_t l = 0; l < work.size(); ++l) {
    for (std::size_t i = 0; i < work[l].size(); ++i) {
      const double orig = work[l][i];
      work[l][i] = orig + step;
      const double up = evaluate(work, l);
      work[l][i] = orig - step;
      const double down = evaluate(work, l);
      work[l][i] = orig;
      update_worst(result, analytic[l][i], (up - down) / (2.0 * step), l, i);
    }
  }
  return result;
}

GradCheckResult gradient_check_parameters(const ParamRootBuilder& build, std::span<Parameter* const> params,
                                          double step) {
  require_step(step);

  GradientMap analytic;
  {
    Graph g;
    Var root = build(g);
    g.backward(root);
    g.collect(analytic);
  }

  auto evaluate = [&](std::size_t leaf) {
    Graph g;
    try {
      return build(g).item();
    } catch (const NumericError& e) {
      throw NumericError("gradient_check: parameter " + std::to_string(leaf) + ": " + e.what());
    }
  };

  GradCheckResult result;
  for (std::size_t l = 0; l < params.size(); ++l) {
    Parameter& p = *params[l];
    const Tensor* grad = analytic.find(&p);
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double orig = p.value[i];
      p.value[i] = orig + step;
      const double up = evaluate(l);
      p.value[i] = orig - step;
      const double down = evaluate(l);
      p.value[i] = orig;
      update_worst(result, grad ? (*grad)[i] : 0.0, (up - down) / (2.0 * step), l, i);
    }
  }
  return result;
}

}  // namespace pivotnmt
