#pragma once

#include <array>
#include <cstddef>
#include <vector>

#include "wdro/tensor.hpp"

namespace wdro {

enum class OpKind {
  input,        // leaf bound at evaluation time
  constant,     // leaf with a stored value
  affine,       // parents (w, x, b): w*x + b with w rank-2, x and b rank-1
  relu,         // elementwise max(v, 0); derivative at 0 is taken as 0
  tanh_act,     // elementwise tanh
  log_softmax,  // rank-1, computed in the log domain with max subtraction
  pick,         // single component of a rank-1 parent, result is scalar
  sum,          // sum of all entries, result is scalar
  add,          // elementwise, same shape
  sub,          // elementwise, same shape
  mul,          // elementwise, same shape
  div_by,       // elementwise a/b, same shape
  scale,        // multiply by a fixed constant
};

struct NodeId {
  int v = -1;
  bool valid() const { return v >= 0; }
};

struct ComputeNode {
  OpKind kind;
  std::array<int, 3> parents{-1, -1, -1};
  std::vector<std::size_t> shape;
  double factor = 0.0;     // scale
  std::size_t index = 0;   // pick
  Tensor stored;           // constant
};

// Immutable-after-construction DAG. Parents always precede children, so a
// plain index sweep is a topological order in both directions.
class Graph {
 public:
  NodeId input(std::vector<std::size_t> shape);
  NodeId constant(Tensor value);
  NodeId affine(NodeId w, NodeId x, NodeId b);
  NodeId relu(NodeId a);
  NodeId tanh_act(NodeId a);
  NodeId log_softmax(NodeId a);
  NodeId pick(NodeId a, std::size_t index);
  NodeId sum(NodeId a);
  NodeId add(NodeId a, NodeId b);
  NodeId sub(NodeId a, NodeId b);
  NodeId mul(NodeId a, NodeId b);
  NodeId div_by(NodeId a, NodeId b);
  NodeId scale(NodeId a, double factor);

  std::size_t size() const { return nodes_.size(); }
  const ComputeNode& node(NodeId id) const { return nodes_[static_cast<std::size_t>(id.v)]; }

  // true when leaf can influence root through parent edges
  bool reaches(NodeId root, NodeId leaf) const;

 private:
  NodeId push(ComputeNode n);
  const ComputeNode& checked(NodeId id, const char* role) const;

  std::vector<ComputeNode> nodes_;
};

struct Binding {
  NodeId id;
  Tensor value;
};

// One forward pass over a graph with concrete leaf values, plus an optional
// reverse sweep. Holds all per-evaluation state so a Graph can be shared
// freely across threads.
class Evaluation {
 public:
  Evaluation(const Graph& graph, const std::vector<Binding>& bindings);

  const Tensor& value(NodeId id) const;

  // Reverse-mode sweep from a scalar root. May be called once per Evaluation.
  void backward(NodeId root);

  // Adjoint of any node after backward(); zeros when the node does not reach
  // the root.
  const Tensor& adjoint(NodeId id) const;

  // value(root) as a plain double (root must be scalar)
  double scalar(NodeId root) const;

 private:
  const Graph* graph_;
  std::vector<Tensor> values_;
  std::vector<Tensor> adjoints_;
  bool swept_ = false;
};

// Convenience wrapper: evaluate, backward from root, return adjoint of leaf.
// If leaf cannot reach root the result is a zero tensor (use Graph::reaches
// to distinguish a structural zero from a numeric one).
Tensor gradient(const Graph& graph, const std::vector<Binding>& bindings, NodeId root, NodeId leaf);

}  // namespace wdro
