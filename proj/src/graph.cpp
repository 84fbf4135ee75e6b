#include "pivotnmt/graph.hpp"

#include <algorithm>
#include <cmath>

namespace pivotnmt {

// ---------------------------------------------------------------------------
// GradientMap

void GradientMap::accumulate(const Parameter* param, const Tensor& grad, double scale) {
  auto it = index_.find(param);
  if (it == index_.end()) {
    index_.emplace(param, entries_.size());
    Tensor copy = grad;
    if (scale != 1.0)
      for (double& v : copy.values()) v *= scale;
    entries_.emplace_back(param, std::move(copy));
    return;
  }
  Tensor& dst = entries_[it->second].second;
  if (!(dst.shape() == grad.shape())) {
    throw ShapeError("gradient for '" + param->name + "' has shape " + grad.shape().str() + ", expected " +
                     dst.shape().str());
  }
  auto out = dst.values();
  auto in = grad.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += scale * in[i];
}

void GradientMap::merge(const GradientMap& other, double scale) {
  for (const auto& [param, grad] : other.entries_) accumulate(param, grad, scale);
}

void GradientMap::scale(double factor) {
  for (auto& entry : entries_)
    for (double& v : entry.second.values()) v *= factor;
}

const Tensor* GradientMap::find(const Parameter* param) const {
  auto it = index_.find(param);
  return it == index_.end() ? nullptr : &entries_[it->second].second;
}

double GradientMap::global_norm() const {
  double sq = 0.0;
  for (const auto& entry : entries_)
    for (double v : entry.second.values()) sq += v * v;
  return std::sqrt(sq);
}

// ---------------------------------------------------------------------------
// Var / Graph

const Tensor& Var::value() const { return graph_->value(*this); }

const char* op_name(OpKind kind) {
  switch (kind) {
    case OpKind::kInput: return "input";
    case OpKind::kParameter: return "parameter";
    case OpKind::kMatMul: return "matmul";
    case OpKind::kAdd: return "add";
    case OpKind::kAddRow: return "add-row";
    case OpKind::kSub: return "sub";
    case OpKind::kMul: return "elementwise-mul";
    case OpKind::kScale: return "scale";
    case OpKind::kTanh: return "tanh";
    case OpKind::kSigmoid: return "sigmoid";
    case OpKind::kSoftmax: return "softmax";
    case OpKind::kConcat: return "concat";
    case OpKind::kStack: return "stack";
    case OpKind::kEmbedding: return "embedding-lookup";
    case OpKind::kSlice: return "slice";
    case OpKind::kReshape: return "reshape";
    case OpKind::kSum: return "sum";
    case OpKind::kAddN: return "add-n";
    case OpKind::kLog: return "log";
    case OpKind::kNegate: return "negate";
    case OpKind::kNorm: return "euclidean-norm";
    case OpKind::kCrossEntropy: return "cross-entropy";
    case OpKind::kLogSumExp: return "logsumexp";
  }
  return "unknown";
}

std::vector<double> log_softmax(std::span<const double> logits) {
  double mx = logits[0];
  for (double v : logits) mx = std::max(mx, v);
  double z = 0.0;
  for (double v : logits) z += std::exp(v - mx);
  const double lse = mx + std::log(z);
  std::vector<double> out(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) out[i] = logits[i] - lse;
  return out;
}

namespace {

[[noreturn]] void shape_mismatch(OpKind kind, const Shape& a, const Shape& b) {
  throw ShapeError(std::string(op_name(kind)) + ": incompatible shapes " + a.str() + " and " + b.str());
}

[[noreturn]] void bad_shape(OpKind kind, const Shape& a, const std::string& what) {
  throw ShapeError(std::string(op_name(kind)) + ": shape " + a.str() + " " + what);
}

void expect_arity(OpKind kind, std::span<const Var> inputs, std::size_t n) {
  if (inputs.size() != n) {
    throw ShapeError(std::string(op_name(kind)) + ": expected " + std::to_string(n) + " inputs, got " +
                     std::to_string(inputs.size()));
  }
}

double logsumexp_of(std::span<const double> x) {
  double mx = x[0];
  for (double v : x) mx = std::max(mx, v);
  double z = 0.0;
  for (double v : x) z += std::exp(v - mx);
  return mx + std::log(z);
}

}  // namespace

Var Graph::input(Tensor value) {
  if (!value.all_finite()) throw NumericError("input: non-finite value");
  Node node{OpKind::kInput, {}, {}, std::move(value), {}, nullptr};
  nodes_.push_back(std::move(node));
  return Var(this, static_cast<std::uint32_t>(nodes_.size() - 1));
}

Var Graph::parameter(const Parameter& param) {
  auto it = param_nodes_.find(&param);
  if (it != param_nodes_.end()) return Var(this, it->second);
  if (!param.value.all_finite()) throw NumericError("parameter '" + param.name + "' holds a non-finite value");
  Node node{OpKind::kParameter, {}, {}, param.value, {}, &param};
  nodes_.push_back(std::move(node));
  const auto id = static_cast<std::uint32_t>(nodes_.size() - 1);
  param_nodes_.emplace(&param, id);
  return Var(this, id);
}

Var Graph::apply(OpKind kind, std::span<const Var> inputs, OpAttrs attrs) {
  for (const Var& v : inputs) {
    if (v.graph() != this) throw std::invalid_argument(std::string(op_name(kind)) + ": input from another graph");
  }
  Tensor out = evaluate(kind, inputs, attrs);
  if (!out.all_finite()) throw NumericError(std::string(op_name(kind)) + ": produced a non-finite value");
  Node node{kind, {}, std::move(attrs), std::move(out), {}, nullptr};
  node.inputs.reserve(inputs.size());
  for (const Var& v : inputs) node.inputs.push_back(v.id());
  nodes_.push_back(std::move(node));
  return Var(this, static_cast<std::uint32_t>(nodes_.size() - 1));
}

Tensor Graph::evaluate(OpKind kind, std::span<const Var> inputs, const OpAttrs& attrs) const {
  auto val = [&](std::size_t i) -> const Tensor& { return nodes_[inputs[i].id()].value; };

  switch (kind) {
    case OpKind::kInput:
    case OpKind::kParameter:
      throw std::invalid_argument("leaves are created with input() or parameter()");

    case OpKind::kMatMul: {
      expect_arity(kind, inputs, 2);
      const Tensor& a = val(0);
      const Tensor& b = val(1);
      const Shape& sa = a.shape();
      const Shape& sb = b.shape();
      if (sa.rank() == 2 && sb.rank() == 2) {
        if (sa[1] != sb[0]) shape_mismatch(kind, sa, sb);
        const std::size_t m = sa[0], k = sa[1], n = sb[1];
        Tensor c(Shape{m, n});
        double* cp = c.data();
        const double* ap = a.data();
        const double* bp = b.data();
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t p = 0; p < k; ++p) {
            const double aip = ap[i * k + p];
            const double* brow = bp + p * n;
            double* crow = cp + i * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += aip * brow[j];
          }
        return c;
      }
      if (sa.rank() == 1 && sb.rank() == 2) {
        if (sa[0] != sb[0]) shape_mismatch(kind, sa, sb);
        const std::size_t k = sb[0], n = sb[1];
        Tensor c(Shape{n});
        double* cp = c.data();
        for (std::size_t p = 0; p < k; ++p) {
          const double ap = a[p];
          const double* brow = b.data() + p * n;
          for (std::size_t j = 0; j < n; ++j) cp[j] += ap * brow[j];
        }
        return c;
      }
      if (sa.rank() == 2 && sb.rank() == 1) {
        if (sa[1] != sb[0]) shape_mismatch(kind, sa, sb);
        const std::size_t m = sa[0], k = sa[1];
        Tensor c(Shape{m});
        for (std::size_t i = 0; i < m; ++i) {
          double acc = 0.0;
          const double* arow = a.data() + i * k;
          for (std::size_t p = 0; p < k; ++p) acc += arow[p] * b[p];
          c[i] = acc;
        }
        return c;
      }
      shape_mismatch(kind, sa, sb);
    }

    case OpKind::kAdd:
    case OpKind::kSub:
    case OpKind::kMul: {
      expect_arity(kind, inputs, 2);
      const Tensor& a = val(0);
      const Tensor& b = val(1);
      if (!(a.shape() == b.shape())) shape_mismatch(kind, a.shape(), b.shape());
      Tensor c(a.shape());
      for (std::size_t i = 0; i < a.size(); ++i) {
        c[i] = kind == OpKind::kAdd ? a[i] + b[i] : kind == OpKind::kSub ? a[i] - b[i] : a[i] * b[i];
      }
      return c;
    }

    case OpKind::kAddRow: {
      expect_arity(kind, inputs, 2);
      const Tensor& m = val(0);
      const Tensor& r = val(1);
      if (m.shape().rank() != 2 || r.shape().rank() != 1 || m.shape()[1] != r.shape()[0])
        shape_mismatch(kind, m.shape(), r.shape());
      Tensor c = m;
      const std::size_t cols = r.size();
      for (std::size_t i = 0; i < c.size(); ++i) c[i] += r[i % cols];
      return c;
    }

    case OpKind::kScale:
    case OpKind::kTanh:
    case OpKind::kSigmoid:
    case OpKind::kLog:
    case OpKind::kNegate: {
      expect_arity(kind, inputs, 1);
      Tensor c = val(0);
      for (double& v : c.values()) {
        switch (kind) {
          case OpKind::kScale: v *= attrs.factor; break;
          case OpKind::kTanh: v = std::tanh(v); break;
          case OpKind::kSigmoid: v = 1.0 / (1.0 + std::exp(-v)); break;
          case OpKind::kLog: v = std::log(v); break;
          default: v = -v; break;
        }
      }
      return c;
    }

    case OpKind::kSoftmax: {
      expect_arity(kind, inputs, 1);
      const Tensor& a = val(0);
      if (a.shape().rank() == 0) bad_shape(kind, a.shape(), "has no last axis");
      Tensor c(a.shape());
      const std::size_t n = a.shape().last();
      for (std::size_t off = 0; off < a.size(); off += n) {
        double mx = a[off];
        for (std::size_t j = 0; j < n; ++j) mx = std::max(mx, a[off + j]);
        double z = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
          c[off + j] = std::exp(a[off + j] - mx);
          z += c[off + j];
        }
        for (std::size_t j = 0; j < n; ++j) c[off + j] /= z;
      }
      return c;
    }

    case OpKind::kConcat: {
      if (inputs.empty()) throw ShapeError("concat: no inputs");
      std::size_t total = 0;
      for (std::size_t i = 0; i < inputs.size(); ++i) {
        if (val(i).shape().rank() != 1) bad_shape(kind, val(i).shape(), "is not a vector");
        total += val(i).size();
      }
      std::vector<double> out;
      out.reserve(total);
      for (std::size_t i = 0; i < inputs.size(); ++i) {
        auto v = val(i).values();
        out.insert(out.end(), v.begin(), v.end());
      }
      return Tensor::vector(std::move(out));
    }

    case OpKind::kStack: {
      if (inputs.empty()) throw ShapeError("stack: no inputs");
      const Shape& first = val(0).shape();
      if (first.rank() != 1) bad_shape(kind, first, "is not a vector");
      std::vector<double> out;
      out.reserve(first[0] * inputs.size());
      for (std::size_t i = 0; i < inputs.size(); ++i) {
        if (!(val(i).shape() == first)) shape_mismatch(kind, first, val(i).shape());
        auto v = val(i).values();
        out.insert(out.end(), v.begin(), v.end());
      }
      return Tensor::matrix(inputs.size(), first[0], std::move(out));
    }

    case OpKind::kEmbedding: {
      expect_arity(kind, inputs, 1);
      const Tensor& table = val(0);
      if (table.shape().rank() != 2) bad_shape(kind, table.shape(), "is not a table");
      const std::size_t rows = table.shape()[0], d = table.shape()[1];
      if (attrs.ids.empty()) throw ShapeError("embedding-lookup: no row ids");
      if (attrs.single_row && attrs.ids.size() != 1) throw ShapeError("embedding-lookup: single row needs one id");
      std::vector<double> out;
      out.reserve(attrs.ids.size() * d);
      for (std::size_t id : attrs.ids) {
        if (id >= rows)
          throw ShapeError("embedding-lookup: row " + std::to_string(id) + " outside table " + table.shape().str());
        auto row = table.values().subspan(id * d, d);
        out.insert(out.end(), row.begin(), row.end());
      }
      if (attrs.single_row) return Tensor::vector(std::move(out));
      return Tensor::matrix(attrs.ids.size(), d, std::move(out));
    }

    case OpKind::kSlice: {
      expect_arity(kind, inputs, 1);
      const Tensor& a = val(0);
      if (a.shape().rank() != 1) bad_shape(kind, a.shape(), "is not a vector");
      if (attrs.begin > attrs.end || attrs.end > a.size())
        bad_shape(kind, a.shape(),
                  "cannot be sliced to [" + std::to_string(attrs.begin) + ", " + std::to_string(attrs.end) + ")");
      auto part = a.values().subspan(attrs.begin, attrs.end - attrs.begin);
      return Tensor::vector(std::vector<double>(part.begin(), part.end()));
    }

    case OpKind::kReshape: {
      expect_arity(kind, inputs, 1);
      const Tensor& a = val(0);
      if (attrs.shape.elements() != a.size()) shape_mismatch(kind, a.shape(), attrs.shape);
      return Tensor(attrs.shape, std::vector<double>(a.values().begin(), a.values().end()));
    }

    case OpKind::kSum: {
      expect_arity(kind, inputs, 1);
      double acc = 0.0;
      for (double v : val(0).values()) acc += v;
      return Tensor::scalar(acc);
    }

    case OpKind::kAddN: {
      if (inputs.empty()) throw ShapeError("add-n: no inputs");
      Tensor c = val(0);
      for (std::size_t i = 1; i < inputs.size(); ++i) {
        const Tensor& t = val(i);
        if (!(t.shape() == c.shape())) shape_mismatch(kind, c.shape(), t.shape());
        for (std::size_t j = 0; j < c.size(); ++j) c[j] += t[j];
      }
      return c;
    }

    case OpKind::kNorm: {
      expect_arity(kind, inputs, 1);
      double sq = 0.0;
      for (double v : val(0).values()) sq += v * v;
      return Tensor::scalar(std::sqrt(sq));
    }

    case OpKind::kCrossEntropy: {
      expect_arity(kind, inputs, 1);
      const Tensor& logits = val(0);
      if (logits.shape().rank() != 1) bad_shape(kind, logits.shape(), "is not a logit vector");
      if (attrs.index >= logits.size())
        bad_shape(kind, logits.shape(), "has no class " + std::to_string(attrs.index));
      return Tensor::scalar(-log_softmax(logits.values())[attrs.index]);
    }

    case OpKind::kLogSumExp: {
      expect_arity(kind, inputs, 1);
      const Tensor& a = val(0);
      if (a.shape().rank() != 1 || a.empty()) bad_shape(kind, a.shape(), "is not a non-empty vector");
      return Tensor::scalar(logsumexp_of(a.values()));
    }
  }
  throw std::invalid_argument("unknown op kind");
}

Tensor& Graph::grad_of(std::uint32_t id) {
  Node& node = nodes_[id];
  if (node.grad.empty() && !node.value.empty()) node.grad = Tensor(node.value.shape());
  return node.grad;
}

void Graph::backward(Var root) {
  if (root.graph() != this) throw std::invalid_argument("backward: root from another graph");
  const Tensor& rv = nodes_[root.id()].value;
  if (rv.size() != 1) throw ShapeError("backward: root must be scalar, got shape " + rv.shape().str());
  for (Node& node : nodes_) node.grad = Tensor();
  grad_of(root.id())[0] = 1.0;
  for (std::int64_t i = root.id(); i >= 0; --i) {
    const Node& node = nodes_[static_cast<std::size_t>(i)];
    if (node.grad.empty() || node.inputs.empty()) continue;
    propagate(node);
  }
}

void Graph::propagate(const Node& node) {
  const Tensor& g = node.grad;
  const Tensor& out = node.value;
  auto in_val = [&](std::size_t i) -> const Tensor& { return nodes_[node.inputs[i]].value; };

  switch (node.kind) {
    case OpKind::kInput:
    case OpKind::kParameter:
      return;

    case OpKind::kMatMul: {
      const Tensor& a = in_val(0);
      const Tensor& b = in_val(1);
      // Fetch both gradient buffers before writing; grad_of may allocate.
      Tensor& ga = grad_of(node.inputs[0]);
      Tensor& gb = grad_of(node.inputs[1]);
      const Shape& sa = a.shape();
      const Shape& sb = b.shape();
      if (sa.rank() == 2 && sb.rank() == 2) {
        const std::size_t m = sa[0], k = sa[1], n = sb[1];
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t p = 0; p < k; ++p) {
            double acc = 0.0;
            for (std::size_t j = 0; j < n; ++j) acc += g[i * n + j] * b[p * n + j];
            ga[i * k + p] += acc;
          }
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t p = 0; p < k; ++p) {
            const double aip = a[i * k + p];
            for (std::size_t j = 0; j < n; ++j) gb[p * n + j] += aip * g[i * n + j];
          }
      } else if (sa.rank() == 1) {
        const std::size_t k = sb[0], n = sb[1];
        for (std::size_t p = 0; p < k; ++p) {
          double acc = 0.0;
          const double ap = a[p];
          double* gbrow = gb.data() + p * n;
          const double* brow = b.data() + p * n;
          for (std::size_t j = 0; j < n; ++j) {
            acc += g[j] * brow[j];
            gbrow[j] += ap * g[j];
          }
          ga[p] += acc;
        }
      } else {
        const std::size_t m = sa[0], k = sa[1];
        for (std::size_t i = 0; i < m; ++i) {
          const double gi = g[i];
          double* garow = ga.data() + i * k;
          const double* arow = a.data() + i * k;
          for (std::size_t p = 0; p < k; ++p) {
            garow[p] += gi * b[p];
            gb[p] += arow[p] * gi;
          }
        }
      }
      return;
    }

    case OpKind::kAdd:
    case OpKind::kSub: {
      Tensor& ga = grad_of(node.inputs[0]);
      Tensor& gb = grad_of(node.inputs[1]);
      const double sign = node.kind == OpKind::kAdd ? 1.0 : -1.0;
      for (std::size_t i = 0; i < g.size(); ++i) {
        ga[i] += g[i];
        gb[i] += sign * g[i];
      }
      return;
    }

    case OpKind::kMul: {
      const Tensor& a = in_val(0);
      const Tensor& b = in_val(1);
      Tensor& ga = grad_of(node.inputs[0]);
      Tensor& gb = grad_of(node.inputs[1]);
      for (std::size_t i = 0; i < g.size(); ++i) {
        ga[i] += g[i] * b[i];
        gb[i] += g[i] * a[i];
      }
      return;
    }

    case OpKind::kAddRow: {
      Tensor& gm = grad_of(node.inputs[0]);
      Tensor& gr = grad_of(node.inputs[1]);
      const std::size_t cols = gr.size();
      for (std::size_t i = 0; i < g.size(); ++i) {
        gm[i] += g[i];
        gr[i % cols] += g[i];
      }
      return;
    }

    case OpKind::kScale: {
      Tensor& ga = grad_of(node.inputs[0]);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += node.attrs.factor * g[i];
      return;
    }

    case OpKind::kTanh: {
      Tensor& ga = grad_of(node.inputs[0]);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * (1.0 - out[i] * out[i]);
      return;
    }

    case OpKind::kSigmoid: {
      Tensor& ga = grad_of(node.inputs[0]);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * out[i] * (1.0 - out[i]);
      return;
    }

    case OpKind::kLog: {
      const Tensor& a = in_val(0);
      Tensor& ga = grad_of(node.inputs[0]);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] / a[i];
      return;
    }

    case OpKind::kNegate: {
      Tensor& ga = grad_of(node.inputs[0]);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] -= g[i];
      return;
    }

    case OpKind::kSoftmax: {
      Tensor& ga = grad_of(node.inputs[0]);
      const std::size_t n = out.shape().last();
      for (std::size_t off = 0; off < out.size(); off += n) {
        double dot = 0.0;
        for (std::size_t j = 0; j < n; ++j) dot += g[off + j] * out[off + j];
        for (std::size_t j = 0; j < n; ++j) ga[off + j] += out[off + j] * (g[off + j] - dot);
      }
      return;
    }

    case OpKind::kConcat:
    case OpKind::kStack: {
      std::size_t off = 0;
      for (std::uint32_t id : node.inputs) {
        Tensor& gi = grad_of(id);
        for (std::size_t j = 0; j < gi.size(); ++j) gi[j] += g[off + j];
        off += gi.size();
      }
      return;
    }

    case OpKind::kEmbedding: {
      Tensor& gt = grad_of(node.inputs[0]);
      const std::size_t d = gt.shape()[1];
      for (std::size_t r = 0; r < node.attrs.ids.size(); ++r) {
        double* dst = gt.data() + node.attrs.ids[r] * d;
        for (std::size_t j = 0; j < d; ++j) dst[j] += g[r * d + j];
      }
      return;
    }

    case OpKind::kSlice: {
      Tensor& ga = grad_of(node.inputs[0]);
      for (std::size_t j = 0; j < g.size(); ++j) ga[node.attrs.begin + j] += g[j];
      return;
    }

    case OpKind::kReshape: {
      Tensor& ga = grad_of(node.inputs[0]);
      for (std::size_t j = 0; j < g.size(); ++j) ga[j] += g[j];
      return;
    }

    case OpKind::kSum: {
      Tensor& ga = grad_of(node.inputs[0]);
      const double g0 = g[0];
      for (double& v : ga.values()) v += g0;
      return;
    }

    case OpKind::kAddN: {
      for (std::uint32_t id : node.inputs) {
        Tensor& gi = grad_of(id);
        for (std::size_t j = 0; j < g.size(); ++j) gi[j] += g[j];
      }
      return;
    }

    case OpKind::kNorm: {
      const Tensor& a = in_val(0);
      Tensor& ga = grad_of(node.inputs[0]);
      const double n = out[0];
      // Subgradient zero at the origin.
      if (n == 0.0) return;
      for (std::size_t i = 0; i < a.size(); ++i) ga[i] += g[0] * a[i] / n;
      return;
    }

    case OpKind::kCrossEntropy: {
      const Tensor& logits = in_val(0);
      Tensor& ga = grad_of(node.inputs[0]);
      const auto lp = log_softmax(logits.values());
      for (std::size_t i = 0; i < lp.size(); ++i) {
        const double p = std::exp(lp[i]);
        ga[i] += g[0] * (p - (i == node.attrs.index ? 1.0 : 0.0));
      }
      return;
    }

    case OpKind::kLogSumExp: {
      const Tensor& a = in_val(0);
      Tensor& ga = grad_of(node.inputs[0]);
      const double lse = out[0];
      for (std::size_t i = 0; i < a.size(); ++i) ga[i] += g[0] * std::exp(a[i] - lse);
      return;
    }
  }
}

Tensor Graph::gradient(Var v) const {
  const Node& node = nodes_[v.id()];
  if (node.grad.empty()) return Tensor(node.value.shape());
  return node.grad;
}

void Graph::collect(GradientMap& out, double scale) const {
  for (const Node& node : nodes_) {
    if (node.kind != OpKind::kParameter) continue;
    if (node.grad.empty()) {
      out.accumulate(node.param, Tensor(node.value.shape()), scale);
    } else {
      out.accumulate(node.param, node.grad, scale);
    }
  }
}

// ---------------------------------------------------------------------------
// Free-function op wrappers

namespace {

Var apply1(OpKind kind, Var a, OpAttrs attrs = {}) {
  const Var in[1] = {a};
  return a.graph()->apply(kind, in, std::move(attrs));
}

Var apply2(OpKind kind, Var a, Var b) {
  const Var in[2] = {a, b};
  return a.graph()->apply(kind, in);
}

Graph* graph_of(std::span<const Var> vars) {
  if (vars.empty()) throw ShapeError("op received no inputs");
  return vars.front().graph();
}

}  // namespace

Var matmul(Var a, Var b) { return apply2(OpKind::kMatMul, a, b); }
Var add(Var a, Var b) { return apply2(OpKind::kAdd, a, b); }
Var add_row(Var matrix, Var row) { return apply2(OpKind::kAddRow, matrix, row); }
Var sub(Var a, Var b) { return apply2(OpKind::kSub, a, b); }
Var mul(Var a, Var b) { return apply2(OpKind::kMul, a, b); }

Var scale(Var a, double factor) {
  OpAttrs attrs;
  attrs.factor = factor;
  return apply1(OpKind::kScale, a, std::move(attrs));
}

Var tanh(Var a) { return apply1(OpKind::kTanh, a); }
Var sigmoid(Var a) { return apply1(OpKind::kSigmoid, a); }
Var softmax(Var a) { return apply1(OpKind::kSoftmax, a); }
Var concat(std::span<const Var> parts) { return graph_of(parts)->apply(OpKind::kConcat, parts); }
Var stack(std::span<const Var> rows) { return graph_of(rows)->apply(OpKind::kStack, rows); }

Var embedding_lookup(Var table, std::size_t row) {
  OpAttrs attrs;
  attrs.ids = {row};
  attrs.single_row = true;
  return apply1(OpKind::kEmbedding, table, std::move(attrs));
}

Var embedding_lookup(Var table, std::span<const std::size_t> rows) {
  OpAttrs attrs;
  attrs.ids.assign(rows.begin(), rows.end());
  return apply1(OpKind::kEmbedding, table, std::move(attrs));
}

Var slice(Var a, std::size_t begin, std::size_t end) {
  OpAttrs attrs;
  attrs.begin = begin;
  attrs.end = end;
  return apply1(OpKind::kSlice, a, std::move(attrs));
}

Var reshape(Var a, Shape shape) {
  OpAttrs attrs;
  attrs.shape = shape;
  return apply1(OpKind::kReshape, a, std::move(attrs));
}

Var sum(Var a) { return apply1(OpKind::kSum, a); }
Var add_n(std::span<const Var> terms) { return graph_of(terms)->apply(OpKind::kAddN, terms); }
Var log(Var a) { return apply1(OpKind::kLog, a); }
Var negate(Var a) { return apply1(OpKind::kNegate, a); }
Var norm(Var a) { return apply1(OpKind::kNorm, a); }

Var cross_entropy(Var logits, std::size_t gold) {
  OpAttrs attrs;
  attrs.index = gold;
  return apply1(OpKind::kCrossEntropy, logits, std::move(attrs));
}

Var logsumexp(Var a) { return apply1(OpKind::kLogSumExp, a); }

}  // namespace pivotnmt
