#include "wdro/transport.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <string>

#include "wdro/errors.hpp"

namespace wdro {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

const char* norm_name(Norm n) { return n == Norm::l2 ? "2" : "inf"; }

Norm norm_from_name(const std::string& name) {
  if (name == "2") return Norm::l2;
  if (name == "inf") return Norm::linf;
  throw ValidationError("threat: norm index must be '2' or 'inf', got '" + name + "'");
}

DualNorm conjugate(Norm n) { return n == Norm::l2 ? DualNorm::l2 : DualNorm::l1; }

double dual_exponent(Norm n) { return n == Norm::l2 ? 2.0 : 1.0; }

void validate_threat(const ThreatModel& t) {
  if (!(t.delta >= 0.0) || !std::isfinite(t.delta))
    throw ValidationError("threat: delta must be finite and nonnegative");
}

double primal_norm(const Tensor& v, Norm r) {
  if (r == Norm::l2) {
    double acc = 0.0;
    for (double x : v.values) acc += x * x;
    return std::sqrt(acc);
  }
  double best = 0.0;
  for (double x : v.values) {
    const double a = std::fabs(x);
    if (a > best) best = a;
  }
  return best;
}

double dual_norm_value(const Tensor& v, DualNorm s) {
  if (s == DualNorm::l2) {
    double acc = 0.0;
    for (double x : v.values) acc += x * x;
    return std::sqrt(acc);
  }
  double acc = 0.0;
  for (double x : v.values) acc += std::fabs(x);
  return acc;
}

Tensor h_map(const Tensor& v, DualNorm s) {
  Tensor out = v;
  if (s == DualNorm::l1) {
    for (double& x : out.values) x = (x > 0.0) ? 1.0 : (x < 0.0 ? -1.0 : 0.0);
    return out;
  }
  const double norm = dual_norm_value(v, DualNorm::l2);
  if (norm == 0.0) {
    for (double& x : out.values) x = 0.0;
    return out;
  }
  for (double& x : out.values) x /= norm;
  return out;
}

double pseudo_distance(const Sample& a, const Sample& b, Norm r) {
  if (a.y != b.y) return kInf;
  if (!a.x.same_shape(b.x)) throw ValidationError("pseudo_distance: shape mismatch");
  Tensor diff = a.x;
  for (std::size_t k = 0; k < diff.values.size(); ++k) diff[k] -= b.x[k];
  return primal_norm(diff, r);
}

namespace {

void check_pair_sizes(const LabeledDataset& a, const LabeledDataset& b) {
  if (a.samples.empty() || b.samples.empty())
    throw ValidationError("transport: empty dataset");
  if (a.size() != b.size())
    throw ValidationError("transport: datasets differ in size (" + std::to_string(a.size()) +
                          " vs " + std::to_string(b.size()) + ")");
  if (a.n != b.n) throw ValidationError("transport: feature dimensions differ");
}

double plan_distance(const ThreatModel& t, const std::vector<double>& costs) {
  if (t.p == Norm::linf) {
    double best = 0.0;
    for (double c : costs) {
      if (c == kInf) return kInf;
      if (c > best) best = c;
    }
    return best;
  }
  double acc = 0.0;
  for (double c : costs) {
    if (c == kInf) return kInf;
    acc += c * c;
  }
  return std::sqrt(acc / static_cast<double>(costs.size()));
}

// Assignment by shortest augmenting paths with potentials (Jonker-Volgenant
// style), O(n^3). cost is a dense square matrix, entries finite.
std::vector<std::size_t> min_cost_assignment(const std::vector<std::vector<double>>& cost) {
  const std::size_t n = cost.size();
  // 1-based internal arrays, row/col 0 is a sentinel
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<std::size_t> way(n + 1, 0), matched_row(n + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    matched_row[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(n + 1, kInf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = matched_row[j0];
      double delta = kInf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[matched_row[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (matched_row[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      matched_row[j0] = matched_row[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<std::size_t> row_to_col(n, 0);
  for (std::size_t j = 1; j <= n; ++j)
    if (matched_row[j] != 0) row_to_col[matched_row[j] - 1] = j - 1;
  return row_to_col;
}

// Kuhn's augmenting path matching on edges where cost <= threshold.
bool try_full_matching(const std::vector<std::vector<double>>& cost, double threshold,
                       std::vector<int>& col_owner) {
  const std::size_t n = cost.size();
  col_owner.assign(n, -1);
  std::vector<char> visited;
  std::function<bool(std::size_t)> augment = [&](std::size_t row) -> bool {
    for (std::size_t j = 0; j < n; ++j) {
      if (visited[j] || cost[row][j] > threshold) continue;
      visited[j] = 1;
      if (col_owner[j] < 0 || augment(static_cast<std::size_t>(col_owner[j]))) {
        col_owner[j] = static_cast<int>(row);
        return true;
      }
    }
    return false;
  };
  for (std::size_t i = 0; i < n; ++i) {
    visited.assign(n, 0);
    if (!augment(i)) return false;
  }
  return true;
}

// Bottleneck assignment: smallest threshold (among realized costs) that has a
// perfect matching, found by binary search over the sorted distinct costs.
std::vector<std::size_t> bottleneck_assignment(const std::vector<std::vector<double>>& cost) {
  const std::size_t n = cost.size();
  std::vector<double> levels;
  levels.reserve(n * n);
  for (const auto& row : cost)
    for (double c : row) levels.push_back(c);
  std::sort(levels.begin(), levels.end());
  levels.erase(std::unique(levels.begin(), levels.end()), levels.end());

  std::size_t lo = 0, hi = levels.size() - 1;
  std::vector<int> col_owner;
  while (lo < hi) {
    const std::size_t mid = lo + (hi - lo) / 2;
    if (try_full_matching(cost, levels[mid], col_owner))
      hi = mid;
    else
      lo = mid + 1;
  }
  if (!try_full_matching(cost, levels[lo], col_owner))
    throw ValidationError("transport: bottleneck matching failed");  // cannot happen on square data
  std::vector<std::size_t> row_to_col(n, 0);
  for (std::size_t j = 0; j < n; ++j) row_to_col[static_cast<std::size_t>(col_owner[j])] = j;
  return row_to_col;
}

}  // namespace

TransportPlan identity_plan(const LabeledDataset& a, const LabeledDataset& b,
                            const ThreatModel& t) {
  check_pair_sizes(a, b);
  TransportPlan plan;
  plan.pairs.resize(a.size());
  plan.ground_costs.resize(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    plan.pairs[i] = i;
    plan.ground_costs[i] = pseudo_distance(a.samples[i], b.samples[i], t.r);
  }
  plan.distance = plan_distance(t, plan.ground_costs);
  return plan;
}

double empirical_wasserstein(const LabeledDataset& a, const LabeledDataset& b,
                             const ThreatModel& t, const TransportPlan& plan) {
  check_pair_sizes(a, b);
  if (plan.pairs.size() != a.size())
    throw ValidationError("transport: plan size does not match datasets");
  std::vector<double> costs(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (plan.pairs[i] >= b.size()) throw ValidationError("transport: plan index out of range");
    costs[i] = pseudo_distance(a.samples[i], b.samples[plan.pairs[i]], t.r);
  }
  return plan_distance(t, costs);
}

TransportPlan exact_ot(const LabeledDataset& a, const LabeledDataset& b, const ThreatModel& t,
                       std::size_t size_cap) {
  check_pair_sizes(a, b);

  std::map<int, std::vector<std::size_t>> left_by_label, right_by_label;
  for (std::size_t i = 0; i < a.size(); ++i) left_by_label[a.samples[i].y].push_back(i);
  for (std::size_t j = 0; j < b.size(); ++j) right_by_label[b.samples[j].y].push_back(j);
  if (left_by_label.size() != right_by_label.size())
    throw ValidationError("transport: label multisets differ, no feasible coupling");
  for (const auto& [label, lefts] : left_by_label) {
    auto it = right_by_label.find(label);
    if (it == right_by_label.end() || it->second.size() != lefts.size())
      throw ValidationError("transport: label multisets differ, no feasible coupling");
    if (lefts.size() > size_cap)
      throw ValidationError("transport: label class of size " + std::to_string(lefts.size()) +
                            " exceeds exact OT cap " + std::to_string(size_cap));
  }

  TransportPlan plan;
  plan.pairs.assign(a.size(), 0);
  for (const auto& [label, lefts] : left_by_label) {
    const auto& rights = right_by_label[label];
    const std::size_t k = lefts.size();
    std::vector<std::vector<double>> cost(k, std::vector<double>(k, 0.0));
    for (std::size_t i = 0; i < k; ++i)
      for (std::size_t j = 0; j < k; ++j)
        cost[i][j] = pseudo_distance(a.samples[lefts[i]], b.samples[rights[j]], t.r);

    std::vector<std::size_t> row_to_col;
    if (t.p == Norm::linf) {
      row_to_col = bottleneck_assignment(cost);
    } else {
      // minimize the mean of d^2: square the ground costs for the solver
      std::vector<std::vector<double>> sq = cost;
      for (auto& row : sq)
        for (double& c : row) c = c * c;
      row_to_col = min_cost_assignment(sq);
    }
    for (std::size_t i = 0; i < k; ++i) plan.pairs[lefts[i]] = rights[row_to_col[i]];
  }

  plan.ground_costs.resize(a.size());
  for (std::size_t i = 0; i < a.size(); ++i)
    plan.ground_costs[i] = pseudo_distance(a.samples[i], b.samples[plan.pairs[i]], t.r);
  plan.distance = plan_distance(t, plan.ground_costs);
  return plan;
}

LabeledDataset project_ball_unclamped(const LabeledDataset& orig, const LabeledDataset& pert,
                                      const ThreatModel& t, Coupling coupling, bool sphere) {
  check_pair_sizes(orig, pert);
  validate_threat(t);

  const TransportPlan plan =
      coupling == Coupling::identity ? identity_plan(orig, pert, t) : exact_ot(orig, pert, t);
  if (plan.distance == kInf)
    throw ValidationError("project_ball: infinite transport distance (labels not aligned)");

  LabeledDataset out = orig;

  if (sphere) {
    // literal first-order transport step: rescale along the coupling whether
    // inside the ball or not; degenerate zero distance passes through
    if (plan.distance == 0.0) {
      for (std::size_t i = 0; i < out.size(); ++i) out.samples[i].x = pert.samples[plan.pairs[i]].x;
      return out;
    }
    const double scalef = t.delta / plan.distance;
    for (std::size_t i = 0; i < out.size(); ++i) {
      const Tensor& target = pert.samples[plan.pairs[i]].x;
      Tensor& x = out.samples[i].x;
      for (std::size_t k = 0; k < x.values.size(); ++k)
        x[k] = orig.samples[i].x[k] + scalef * (target[k] - orig.samples[i].x[k]);
    }
    return out;
  }

  if (plan.distance <= t.delta) {
    for (std::size_t i = 0; i < out.size(); ++i) out.samples[i].x = pert.samples[plan.pairs[i]].x;
    return out;
  }

  if (t.p == Norm::l2) {
    const double scalef = t.delta / plan.distance;
    for (std::size_t i = 0; i < out.size(); ++i) {
      const Tensor& target = pert.samples[plan.pairs[i]].x;
      Tensor& x = out.samples[i].x;
      for (std::size_t k = 0; k < x.values.size(); ++k)
        x[k] = orig.samples[i].x[k] + scalef * (target[k] - orig.samples[i].x[k]);
    }
    return out;
  }

  // p = inf: the ball constraint is max_i ||x_i' - x_i||_r <= delta, which
  // separates across samples; project each displacement onto its own ball
  for (std::size_t i = 0; i < out.size(); ++i) {
    const Tensor& anchor = orig.samples[i].x;
    const Tensor& target = pert.samples[plan.pairs[i]].x;
    Tensor& x = out.samples[i].x;
    if (t.r == Norm::linf) {
      for (std::size_t k = 0; k < x.values.size(); ++k) {
        const double lo = anchor[k] - t.delta;
        const double hi = anchor[k] + t.delta;
        x[k] = target[k] < lo ? lo : (target[k] > hi ? hi : target[k]);
      }
    } else {
      Tensor disp = target;
      for (std::size_t k = 0; k < disp.values.size(); ++k) disp[k] -= anchor[k];
      const double norm = primal_norm(disp, Norm::l2);
      if (norm <= t.delta) {
        x = target;
      } else {
        const double scalef = t.delta / norm;
        for (std::size_t k = 0; k < x.values.size(); ++k) x[k] = anchor[k] + scalef * disp[k];
      }
    }
  }
  return out;
}

LabeledDataset project_ball(const LabeledDataset& orig, const LabeledDataset& pert,
                            const ThreatModel& t, Coupling coupling, bool sphere) {
  LabeledDataset out = project_ball_unclamped(orig, pert, t, coupling, sphere);
  clamp_features(out);
  return out;
}

}  // namespace wdro
