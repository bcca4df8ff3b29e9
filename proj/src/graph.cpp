#include "wdro/graph.hpp"

#include <cmath>
#include <string>

#include "wdro/errors.hpp"

namespace wdro {

namespace {
std::string node_tag(OpKind kind, int index) {
  const char* name = "?";
  switch (kind) {
    case OpKind::input: name = "input"; break;
    case OpKind::constant: name = "constant"; break;
    case OpKind::affine: name = "affine"; break;
    case OpKind::relu: name = "relu"; break;
    case OpKind::tanh_act: name = "tanh"; break;
    case OpKind::log_softmax: name = "log_softmax"; break;
    case OpKind::pick: name = "pick"; break;
    case OpKind::sum: name = "sum"; break;
    case OpKind::add: name = "add"; break;
    case OpKind::sub: name = "sub"; break;
    case OpKind::mul: name = "mul"; break;
    case OpKind::div_by: name = "div"; break;
    case OpKind::scale: name = "scale"; break;
  }
  return std::string(name) + "#" + std::to_string(index);
}
}  // namespace

const ComputeNode& Graph::checked(NodeId id, const char* role) const {
  if (!id.valid() || static_cast<std::size_t>(id.v) >= nodes_.size())
    throw ValidationError(std::string("graph: invalid ") + role + " node id");
  return nodes_[static_cast<std::size_t>(id.v)];
}

NodeId Graph::push(ComputeNode n) {
  nodes_.push_back(std::move(n));
  return NodeId{static_cast<int>(nodes_.size()) - 1};
}

NodeId Graph::input(std::vector<std::size_t> shape) {
  ComputeNode n;
  n.kind = OpKind::input;
  n.shape = std::move(shape);
  return push(std::move(n));
}

NodeId Graph::constant(Tensor value) {
  if (!value.all_finite()) throw ValidationError("graph: constant with non-finite entries");
  ComputeNode n;
  n.kind = OpKind::constant;
  n.shape = value.shape;
  n.stored = std::move(value);
  return push(std::move(n));
}

NodeId Graph::affine(NodeId w, NodeId x, NodeId b) {
  const auto& wn = checked(w, "affine weight");
  const auto& xn = checked(x, "affine input");
  const auto& bn = checked(b, "affine bias");
  if (wn.shape.size() != 2 || xn.shape.size() != 1 || bn.shape.size() != 1)
    throw ValidationError("graph: affine expects rank-2 w, rank-1 x, rank-1 b");
  if (wn.shape[1] != xn.shape[0] || wn.shape[0] != bn.shape[0])
    throw ValidationError("graph: affine shape mismatch");
  ComputeNode n;
  n.kind = OpKind::affine;
  n.parents = {w.v, x.v, b.v};
  n.shape = {wn.shape[0]};
  return push(std::move(n));
}

NodeId Graph::relu(NodeId a) {
  ComputeNode n;
  n.kind = OpKind::relu;
  n.parents = {a.v, -1, -1};
  n.shape = checked(a, "relu").shape;
  return push(std::move(n));
}

NodeId Graph::tanh_act(NodeId a) {
  ComputeNode n;
  n.kind = OpKind::tanh_act;
  n.parents = {a.v, -1, -1};
  n.shape = checked(a, "tanh").shape;
  return push(std::move(n));
}

NodeId Graph::log_softmax(NodeId a) {
  const auto& an = checked(a, "log_softmax");
  if (an.shape.size() != 1 || an.shape[0] == 0)
    throw ValidationError("graph: log_softmax expects a nonempty rank-1 node");
  ComputeNode n;
  n.kind = OpKind::log_softmax;
  n.parents = {a.v, -1, -1};
  n.shape = an.shape;
  return push(std::move(n));
}

NodeId Graph::pick(NodeId a, std::size_t index) {
  const auto& an = checked(a, "pick");
  if (an.shape.size() != 1 || index >= an.shape[0])
    throw ValidationError("graph: pick index out of range");
  ComputeNode n;
  n.kind = OpKind::pick;
  n.parents = {a.v, -1, -1};
  n.shape = {};
  n.index = index;
  return push(std::move(n));
}

NodeId Graph::sum(NodeId a) {
  checked(a, "sum");
  ComputeNode n;
  n.kind = OpKind::sum;
  n.parents = {a.v, -1, -1};
  n.shape = {};
  return push(std::move(n));
}

NodeId Graph::add(NodeId a, NodeId b) {
  const auto& an = checked(a, "add lhs");
  const auto& bn = checked(b, "add rhs");
  if (an.shape != bn.shape) throw ValidationError("graph: add shape mismatch");
  ComputeNode n;
  n.kind = OpKind::add;
  n.parents = {a.v, b.v, -1};
  n.shape = an.shape;
  return push(std::move(n));
}

NodeId Graph::sub(NodeId a, NodeId b) {
  const auto& an = checked(a, "sub lhs");
  const auto& bn = checked(b, "sub rhs");
  if (an.shape != bn.shape) throw ValidationError("graph: sub shape mismatch");
  ComputeNode n;
  n.kind = OpKind::sub;
  n.parents = {a.v, b.v, -1};
  n.shape = an.shape;
  return push(std::move(n));
}

NodeId Graph::mul(NodeId a, NodeId b) {
  const auto& an = checked(a, "mul lhs");
  const auto& bn = checked(b, "mul rhs");
  if (an.shape != bn.shape) throw ValidationError("graph: mul shape mismatch");
  ComputeNode n;
  n.kind = OpKind::mul;
  n.parents = {a.v, b.v, -1};
  n.shape = an.shape;
  return push(std::move(n));
}

NodeId Graph::div_by(NodeId a, NodeId b) {
  const auto& an = checked(a, "div lhs");
  const auto& bn = checked(b, "div rhs");
  if (an.shape != bn.shape) throw ValidationError("graph: div shape mismatch");
  ComputeNode n;
  n.kind = OpKind::div_by;
  n.parents = {a.v, b.v, -1};
  n.shape = an.shape;
  return push(std::move(n));
}

NodeId Graph::scale(NodeId a, double factor) {
  if (!std::isfinite(factor)) throw ValidationError("graph: non-finite scale factor");
  ComputeNode n;
  n.kind = OpKind::scale;
  n.parents = {a.v, -1, -1};
  n.shape = checked(a, "scale").shape;
  n.factor = factor;
  return push(std::move(n));
}

bool Graph::reaches(NodeId root, NodeId leaf) const {
  checked(root, "reaches root");
  checked(leaf, "reaches leaf");
  if (leaf.v > root.v) return false;
  std::vector<char> hit(static_cast<std::size_t>(root.v) + 1, 0);
  hit[static_cast<std::size_t>(root.v)] = 1;
  for (int i = root.v; i >= leaf.v; --i) {
    if (!hit[static_cast<std::size_t>(i)]) continue;
    if (i == leaf.v) return true;
    for (int p : nodes_[static_cast<std::size_t>(i)].parents)
      if (p >= 0) hit[static_cast<std::size_t>(p)] = 1;
  }
  return false;
}

Evaluation::Evaluation(const Graph& graph, const std::vector<Binding>& bindings)
    : graph_(&graph) {
  const std::size_t n = graph.size();
  values_.assign(n, Tensor{});
  std::vector<char> bound(n, 0);
  for (const auto& b : bindings) {
    if (!b.id.valid() || static_cast<std::size_t>(b.id.v) >= n)
      throw ValidationError("evaluate: binding for invalid node id");
    const auto& node = graph.node(b.id);
    if (node.kind != OpKind::input)
      throw ValidationError("evaluate: binding " + node_tag(node.kind, b.id.v) +
                            " is not an input leaf");
    if (b.value.shape != node.shape)
      throw ValidationError("evaluate: binding shape " + b.value.shape_str() +
                            " does not match input declared as " +
                            Tensor::zeros(node.shape).shape_str());
    if (!b.value.all_finite())
      throw ValidationError("evaluate: non-finite entries bound to " + node_tag(node.kind, b.id.v));
    values_[static_cast<std::size_t>(b.id.v)] = b.value;
    bound[static_cast<std::size_t>(b.id.v)] = 1;
  }

  for (std::size_t i = 0; i < n; ++i) {
    const ComputeNode& nd = graph.node(NodeId{static_cast<int>(i)});
    Tensor& out = values_[i];
    auto parent = [&](int slot) -> const Tensor& {
      return values_[static_cast<std::size_t>(nd.parents[static_cast<std::size_t>(slot)])];
    };
    switch (nd.kind) {
      case OpKind::input:
        if (!bound[i])
          throw ValidationError("evaluate: missing binding for " + node_tag(nd.kind, static_cast<int>(i)));
        break;
      case OpKind::constant:
        out = nd.stored;
        break;
      case OpKind::affine: {
        const Tensor& w = parent(0);
        const Tensor& x = parent(1);
        const Tensor& b = parent(2);
        const std::size_t rows = w.shape[0], cols = w.shape[1];
        out = Tensor::zeros({rows});
        for (std::size_t r = 0; r < rows; ++r) {
          double acc = b[r];
          for (std::size_t c = 0; c < cols; ++c) acc += w[r * cols + c] * x[c];
          out[r] = acc;
        }
        break;
      }
      case OpKind::relu: {
        out = parent(0);
        for (double& v : out.values) v = v > 0.0 ? v : 0.0;
        break;
      }
      case OpKind::tanh_act: {
        out = parent(0);
        for (double& v : out.values) v = std::tanh(v);
        break;
      }
      case OpKind::log_softmax: {
        const Tensor& z = parent(0);
        double zmax = z[0];
        for (double v : z.values) zmax = v > zmax ? v : zmax;
        double acc = 0.0;
        for (double v : z.values) acc += std::exp(v - zmax);
        const double lse = zmax + std::log(acc);
        out = z;
        for (double& v : out.values) v -= lse;
        break;
      }
      case OpKind::pick:
        out = Tensor::scalar(parent(0)[nd.index]);
        break;
      case OpKind::sum: {
        double acc = 0.0;
        for (double v : parent(0).values) acc += v;
        out = Tensor::scalar(acc);
        break;
      }
      case OpKind::add: {
        out = parent(0);
        const Tensor& rhs = parent(1);
        for (std::size_t k = 0; k < out.values.size(); ++k) out[k] += rhs[k];
        break;
      }
      case OpKind::sub: {
        out = parent(0);
        const Tensor& rhs = parent(1);
        for (std::size_t k = 0; k < out.values.size(); ++k) out[k] -= rhs[k];
        break;
      }
      case OpKind::mul: {
        out = parent(0);
        const Tensor& rhs = parent(1);
        for (std::size_t k = 0; k < out.values.size(); ++k) out[k] *= rhs[k];
        break;
      }
      case OpKind::div_by: {
        out = parent(0);
        const Tensor& rhs = parent(1);
        for (std::size_t k = 0; k < out.values.size(); ++k) out[k] /= rhs[k];
        break;
      }
      case OpKind::scale: {
        out = parent(0);
        for (double& v : out.values) v *= nd.factor;
        break;
      }
    }
    if (!out.all_finite())
      throw ValidationError("evaluate: non-finite value at " + node_tag(nd.kind, static_cast<int>(i)));
  }
}

const Tensor& Evaluation::value(NodeId id) const {
  if (!id.valid() || static_cast<std::size_t>(id.v) >= values_.size())
    throw ValidationError("evaluate: value() for invalid node id");
  return values_[static_cast<std::size_t>(id.v)];
}

double Evaluation::scalar(NodeId root) const {
  const Tensor& t = value(root);
  if (!t.is_scalar()) throw ValidationError("evaluate: scalar() on non-scalar node");
  return t[0];
}

void Evaluation::backward(NodeId root) {
  if (swept_) throw ValidationError("backward: already swept on this evaluation");
  const Tensor& rv = value(root);
  if (!rv.is_scalar()) throw ValidationError("backward: root must be scalar");
  swept_ = true;

  adjoints_.assign(values_.size(), Tensor{});
  auto adj = [&](int idx) -> Tensor& {
    Tensor& a = adjoints_[static_cast<std::size_t>(idx)];
    if (a.values.empty() && values_[static_cast<std::size_t>(idx)].numel() > 0)
      a = Tensor::zeros(values_[static_cast<std::size_t>(idx)].shape);
    return a;
  };
  adj(root.v)[0] = 1.0;

  for (int i = root.v; i >= 0; --i) {
    const Tensor& abar = adjoints_[static_cast<std::size_t>(i)];
    if (abar.values.empty()) continue;  // not reached
    const ComputeNode& nd = graph_->node(NodeId{i});
    auto pval = [&](int slot) -> const Tensor& {
      return values_[static_cast<std::size_t>(nd.parents[static_cast<std::size_t>(slot)])];
    };
    switch (nd.kind) {
      case OpKind::input:
      case OpKind::constant:
        break;
      case OpKind::affine: {
        const Tensor& w = pval(0);
        const Tensor& x = pval(1);
        Tensor& wbar = adj(nd.parents[0]);
        Tensor& xbar = adj(nd.parents[1]);
        Tensor& bbar = adj(nd.parents[2]);
        const std::size_t rows = w.shape[0], cols = w.shape[1];
        for (std::size_t r = 0; r < rows; ++r) {
          const double g = abar[r];
          bbar[r] += g;
          for (std::size_t c = 0; c < cols; ++c) {
            wbar[r * cols + c] += g * x[c];
            xbar[c] += g * w[r * cols + c];
          }
        }
        break;
      }
      case OpKind::relu: {
        const Tensor& x = pval(0);
        Tensor& xbar = adj(nd.parents[0]);
        for (std::size_t k = 0; k < x.values.size(); ++k)
          if (x[k] > 0.0) xbar[k] += abar[k];
        break;
      }
      case OpKind::tanh_act: {
        const Tensor& y = values_[static_cast<std::size_t>(i)];
        Tensor& xbar = adj(nd.parents[0]);
        for (std::size_t k = 0; k < y.values.size(); ++k)
          xbar[k] += abar[k] * (1.0 - y[k] * y[k]);
        break;
      }
      case OpKind::log_softmax: {
        const Tensor& y = values_[static_cast<std::size_t>(i)];
        Tensor& xbar = adj(nd.parents[0]);
        double total = 0.0;
        for (double g : abar.values) total += g;
        for (std::size_t k = 0; k < y.values.size(); ++k)
          xbar[k] += abar[k] - std::exp(y[k]) * total;
        break;
      }
      case OpKind::pick:
        adj(nd.parents[0])[nd.index] += abar[0];
        break;
      case OpKind::sum: {
        Tensor& xbar = adj(nd.parents[0]);
        for (double& v : xbar.values) v += abar[0];
        break;
      }
      case OpKind::add: {
        Tensor& l = adj(nd.parents[0]);
        Tensor& r = adj(nd.parents[1]);
        for (std::size_t k = 0; k < abar.values.size(); ++k) {
          l[k] += abar[k];
          r[k] += abar[k];
        }
        break;
      }
      case OpKind::sub: {
        Tensor& l = adj(nd.parents[0]);
        Tensor& r = adj(nd.parents[1]);
        for (std::size_t k = 0; k < abar.values.size(); ++k) {
          l[k] += abar[k];
          r[k] -= abar[k];
        }
        break;
      }
      case OpKind::mul: {
        const Tensor& a = pval(0);
        const Tensor& b = pval(1);
        Tensor& l = adj(nd.parents[0]);
        Tensor& r = adj(nd.parents[1]);
        for (std::size_t k = 0; k < abar.values.size(); ++k) {
          l[k] += abar[k] * b[k];
          r[k] += abar[k] * a[k];
        }
        break;
      }
      case OpKind::div_by: {
        const Tensor& a = pval(0);
        const Tensor& b = pval(1);
        Tensor& l = adj(nd.parents[0]);
        Tensor& r = adj(nd.parents[1]);
        for (std::size_t k = 0; k < abar.values.size(); ++k) {
          l[k] += abar[k] / b[k];
          r[k] -= abar[k] * a[k] / (b[k] * b[k]);
        }
        break;
      }
      case OpKind::scale: {
        Tensor& l = adj(nd.parents[0]);
        for (std::size_t k = 0; k < abar.values.size(); ++k) l[k] += abar[k] * nd.factor;
        break;
      }
    }
  }

  for (std::size_t i = 0; i < adjoints_.size(); ++i)
    if (!adjoints_[i].values.empty() && !adjoints_[i].all_finite())
      throw ValidationError("backward: non-finite adjoint at " +
                            node_tag(graph_->node(NodeId{static_cast<int>(i)}).kind,
                                     static_cast<int>(i)));
}

const Tensor& Evaluation::adjoint(NodeId id) const {
  if (!swept_) throw ValidationError("adjoint: backward() has not run");
  if (!id.valid() || static_cast<std::size_t>(id.v) >= adjoints_.size())
    throw ValidationError("adjoint: invalid node id");
  const Tensor& a = adjoints_[static_cast<std::size_t>(id.v)];
  if (a.values.empty()) {
    // node never reached from the root; materialize a zero tensor
    const_cast<Tensor&>(a) = Tensor::zeros(values_[static_cast<std::size_t>(id.v)].shape);
  }
  return a;
}

Tensor gradient(const Graph& graph, const std::vector<Binding>& bindings, NodeId root, NodeId leaf) {
  Evaluation ev(graph, bindings);
  ev.backward(root);
  return ev.adjoint(leaf);
}

}  // namespace wdro
