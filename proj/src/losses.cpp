#include "wdro/losses.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "wdro/errors.hpp"
#include "wdro/graph.hpp"
#include "wdro/parallel.hpp"

namespace wdro {

namespace {
constexpr double kDlrDenominatorFloor = 1e-12;
}

const char* loss_name(LossKind kind) {
  switch (kind) {
    case LossKind::ce: return "ce";
    case LossKind::dlr: return "dlr";
    case LossKind::redlr: return "redlr";
  }
  return "ce";
}

LossKind loss_from_name(const std::string& name) {
  if (name == "ce") return LossKind::ce;
  if (name == "dlr") return LossKind::dlr;
  if (name == "redlr") return LossKind::redlr;
  throw ValidationError("losses: unknown loss '" + name + "'");
}

namespace {

void check_label(const Tensor& z, int y) {
  if (z.shape.size() != 1 || z.shape[0] < 2)
    throw ValidationError("losses: logits must be rank-1 with at least two classes");
  if (y < 1 || static_cast<std::size_t>(y) > z.shape[0])
    throw ValidationError("losses: label " + std::to_string(y) + " outside 1.." +
                          std::to_string(z.shape[0]));
}

// indices sorted by logit descending, ties by coordinate index
std::vector<std::size_t> order_stats(const Tensor& z) {
  std::vector<std::size_t> order(z.numel());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return z[a] > z[b]; });
  return order;
}

double log_sum_exp(const Tensor& z) {
  double zmax = z[0];
  for (double v : z.values) zmax = v > zmax ? v : zmax;
  double acc = 0.0;
  for (double v : z.values) acc += std::exp(v - zmax);
  return zmax + std::log(acc);
}

struct DlrPieces {
  bool trivial = false;       // value and gradient both identically zero
  bool correct = false;       // y is the strict unique argmax
  std::size_t i1 = 0, i2 = 0, i3 = 0;
};

DlrPieces analyze_dlr(const Tensor& z, int y, bool rectified) {
  if (z.shape[0] < 3) throw ValidationError("losses: dlr needs at least three classes");
  DlrPieces p;
  p.correct = logits_in_set_s(z, y);
  const auto order = order_stats(z);
  p.i1 = order[0];
  p.i2 = order[1];
  p.i3 = order[2];
  if (z[p.i1] - z[p.i3] < kDlrDenominatorFloor) {
    p.trivial = true;  // logits collapsed, ratio is noise
    return p;
  }
  if (rectified && !p.correct) p.trivial = true;
  return p;
}

}  // namespace

double ce(const Tensor& z, int y) {
  check_label(z, y);
  const double lse = log_sum_exp(z);
  return -(z[static_cast<std::size_t>(y - 1)] - lse);
}

double dlr(const Tensor& z, int y) {
  check_label(z, y);
  const DlrPieces p = analyze_dlr(z, y, false);
  if (p.trivial) return 0.0;
  const std::size_t yi = static_cast<std::size_t>(y - 1);
  const double num = p.correct ? z[yi] - z[p.i2] : z[yi] - z[p.i1];
  const double den = z[p.i1] - z[p.i3];
  return -(num / den);
}

double redlr(const Tensor& z, int y) {
  check_label(z, y);
  const DlrPieces p = analyze_dlr(z, y, true);
  if (p.trivial) return 0.0;
  const std::size_t yi = static_cast<std::size_t>(y - 1);
  const double num = z[yi] - z[p.i2];
  const double den = z[p.i1] - z[p.i3];
  return -(num / den);
}

namespace {

struct BuiltLoss {
  Graph g;
  NodeId x;
  std::vector<NodeId> params;  // w0, b0, w1, b1, ...
  NodeId root;
  bool trivial = false;
};

BuiltLoss build_loss_graph(const Network& net, LossKind kind, const Tensor& x, int y) {
  if (y < 1 || y > net.num_classes)
    throw ValidationError("losses: label " + std::to_string(y) + " outside 1.." +
                          std::to_string(net.num_classes));
  BuiltLoss built;

  if (kind != LossKind::ce) {
    const Tensor logits = forward(net, x);
    const DlrPieces p = analyze_dlr(logits, y, kind == LossKind::redlr);
    if (p.trivial) {
      built.trivial = true;
      return built;
    }
    Graph& g = built.g;
    built.x = g.input({static_cast<std::size_t>(net.input_dim)});
    NodeId cur = built.x;
    for (const Layer& l : net.layers) {
      NodeId w = g.constant(l.w);
      NodeId b = g.constant(l.b);
      built.params.push_back(w);
      built.params.push_back(b);
      cur = g.affine(w, cur, b);
      if (l.spec.activation == Activation::relu) cur = g.relu(cur);
      if (l.spec.activation == Activation::tanh_act) cur = g.tanh_act(cur);
    }
    const std::size_t yi = static_cast<std::size_t>(y - 1);
    NodeId zy = g.pick(cur, yi);
    NodeId num = p.correct ? g.sub(zy, g.pick(cur, p.i2)) : g.sub(zy, g.pick(cur, p.i1));
    NodeId den = g.sub(g.pick(cur, p.i1), g.pick(cur, p.i3));
    built.root = g.scale(g.div_by(num, den), -1.0);
    return built;
  }

  Graph& g = built.g;
  built.x = g.input({static_cast<std::size_t>(net.input_dim)});
  NodeId cur = built.x;
  for (const Layer& l : net.layers) {
    NodeId w = g.constant(l.w);
    NodeId b = g.constant(l.b);
    built.params.push_back(w);
    built.params.push_back(b);
    cur = g.affine(w, cur, b);
    if (l.spec.activation == Activation::relu) cur = g.relu(cur);
    if (l.spec.activation == Activation::tanh_act) cur = g.tanh_act(cur);
  }
  built.root = g.scale(g.pick(g.log_softmax(cur), static_cast<std::size_t>(y - 1)), -1.0);
  return built;
}

}  // namespace

double loss_value(const Network& net, LossKind kind, const Tensor& x, int y) {
  const Tensor logits = forward(net, x);
  switch (kind) {
    case LossKind::ce: return ce(logits, y);
    case LossKind::dlr: return dlr(logits, y);
    case LossKind::redlr: return redlr(logits, y);
  }
  return 0.0;
}

InputGradResult loss_with_input_grad(const Network& net, LossKind kind, const Tensor& x, int y) {
  BuiltLoss built = build_loss_graph(net, kind, x, y);
  InputGradResult res;
  if (built.trivial) {
    res.value = 0.0;
    res.grad = Tensor::zeros({static_cast<std::size_t>(net.input_dim)});
    return res;
  }
  Evaluation ev(built.g, {{built.x, x}});
  ev.backward(built.root);
  res.value = ev.scalar(built.root);
  res.grad = ev.adjoint(built.x);
  return res;
}

Tensor input_grad(const Network& net, LossKind kind, const Tensor& x, int y) {
  return loss_with_input_grad(net, kind, x, y).grad;
}

ParamGradResult loss_with_param_grad(const Network& net, LossKind kind, const Tensor& x, int y) {
  FullGradResult full = loss_with_all_grads(net, kind, x, y);
  return ParamGradResult{full.value, std::move(full.grad_theta)};
}

FullGradResult loss_with_all_grads(const Network& net, LossKind kind, const Tensor& x, int y) {
  BuiltLoss built = build_loss_graph(net, kind, x, y);
  FullGradResult res;
  if (built.trivial) {
    res.value = 0.0;
    res.grad_x = Tensor::zeros({static_cast<std::size_t>(net.input_dim)});
    res.grad_theta.assign(net.param_count(), 0.0);
    return res;
  }
  Evaluation ev(built.g, {{built.x, x}});
  ev.backward(built.root);
  res.value = ev.scalar(built.root);
  res.grad_x = ev.adjoint(built.x);
  res.grad_theta.reserve(net.param_count());
  for (NodeId pid : built.params) {
    const Tensor& a = ev.adjoint(pid);
    res.grad_theta.insert(res.grad_theta.end(), a.values.begin(), a.values.end());
  }
  return res;
}

double estimate_lipschitz(const Network& net, LossKind kind, const LabeledDataset& data,
                          DualNorm s) {
  if (data.samples.empty()) throw ValidationError("estimate_lipschitz: empty dataset");
  std::vector<double> norms(data.samples.size(), 0.0);
  parallel_for(data.samples.size(), [&](std::size_t i) {
    const Sample& smp = data.samples[i];
    norms[i] = dual_norm_value(input_grad(net, kind, smp.x, smp.y), s);
  });
  double best = 0.0;
  for (double v : norms) best = v > best ? v : best;
  return best;
}

}  // namespace wdro
