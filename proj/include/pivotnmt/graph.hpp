#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "pivotnmt/tensor.hpp"

namespace pivotnmt {

// A trainable tensor. Models hold these through shared pointers; two models
// referencing the same Parameter share storage (used for tied embeddings).
struct Parameter {
  std::string name;
  Tensor value;
  std::string tie_tag;
};

using ParameterPtr = std::shared_ptr<Parameter>;

// Gradients keyed by parameter storage. Iteration follows first-insertion
// order, which keeps every reduction over the map deterministic.
class GradientMap {
 public:
  void accumulate(const Parameter* param, const Tensor& grad, double scale = 1.0);
  void merge(const GradientMap& other, double scale = 1.0);
  void scale(double factor);

  const Tensor* find(const Parameter* param) const;
  bool contains(const Parameter* param) const { return find(param) != nullptr; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }

  // L2 norm over every entry, summed in insertion order.
  double global_norm() const;

  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }
  auto begin() { return entries_.begin(); }
  auto end() { return entries_.end(); }

 private:
  std::vector<std::pair<const Parameter*, Tensor>> entries_;
  std::unordered_map<const Parameter*, std::size_t> index_;
};

enum class OpKind : std::uint8_t {
  kInput,
  kParameter,
  kMatMul,
  kAdd,
  kAddRow,
  kSub,
  kMul,
  kScale,
  kTanh,
  kSigmoid,
  kSoftmax,
  kConcat,
  kStack,
  kEmbedding,
  kSlice,
  kReshape,
  kSum,
  kAddN,
  kLog,
  kNegate,
  kNorm,
  kCrossEntropy,
  kLogSumExp,
};

const char* op_name(OpKind kind);

// Non-tensor arguments of an op.
struct OpAttrs {
  std::size_t begin = 0;  // slice start
  std::size_t end = 0;    // slice stop (exclusive)
  std::size_t index = 0;  // cross-entropy gold index
  double factor = 1.0;    // scale
  std::vector<std::size_t> ids;  // embedding rows
  bool single_row = false;       // embedding returns a vector instead of a matrix
  Shape shape;                   // reshape target
};

class Graph;

// Handle to a node inside a Graph.
class Var {
 public:
  Var() = default;
  Var(Graph* graph, std::uint32_t id) : graph_(graph), id_(id) {}

  bool valid() const { return graph_ != nullptr; }
  Graph* graph() const { return graph_; }
  std::uint32_t id() const { return id_; }

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  double item() const { return value().item(); }

 private:
  Graph* graph_ = nullptr;
  std::uint32_t id_ = 0;
};

// Tape of forward values. Nodes are appended in evaluation order, so the
// reverse of the tape is a valid topological order for backward().
class Graph {
 public:
  Graph() { nodes_.reserve(512); }
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var input(Tensor value);
  // Leaf bound to parameter storage; one node per parameter per graph.
  Var parameter(const Parameter& param);

  Var apply(OpKind kind, std::span<const Var> inputs, OpAttrs attrs = {});

  // Reverse pass from a scalar root. Resets any previous gradients.
  void backward(Var root);

  const Tensor& value(Var v) const { return nodes_[v.id()].value; }
  // Gradient of the last backward() root; zeros for unreached nodes.
  Tensor gradient(Var v) const;

  // Adds scale * gradient of every parameter leaf into out.
  void collect(GradientMap& out, double scale = 1.0) const;

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    OpKind kind;
    std::vector<std::uint32_t> inputs;
    OpAttrs attrs;
    Tensor value;
    Tensor grad;
    const Parameter* param = nullptr;
  };

  Tensor evaluate(OpKind kind, std::span<const Var> inputs, const OpAttrs& attrs) const;
  void propagate(const Node& node);
  Tensor& grad_of(std::uint32_t id);

  std::vector<Node> nodes_;
  std::unordered_map<const Parameter*, std::uint32_t> param_nodes_;
};

Var matmul(Var a, Var b);
Var add(Var a, Var b);
Var add_row(Var matrix, Var row);  // broadcast a vector over matrix rows
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double factor);
Var tanh(Var a);
Var sigmoid(Var a);
Var softmax(Var a);  // over the last axis
Var concat(std::span<const Var> parts);
Var stack(std::span<const Var> rows);
Var embedding_lookup(Var table, std::size_t row);
Var embedding_lookup(Var table, std::span<const std::size_t> rows);
Var slice(Var a, std::size_t begin, std::size_t end);
Var reshape(Var a, Shape shape);
Var sum(Var a);
Var add_n(std::span<const Var> terms);
Var log(Var a);
Var negate(Var a);
Var norm(Var a);
Var cross_entropy(Var logits, std::size_t gold);
Var logsumexp(Var a);

// log-softmax of a vector, computed with a max shift; shared by the
// cross-entropy op and by decoding so that both produce identical scores.
std::vector<double> log_softmax(std::span<const double> logits);

}  // namespace pivotnmt
