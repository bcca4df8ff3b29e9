#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "wdro/dataset.hpp"
#include "wdro/tensor.hpp"

namespace wdro {

// Norm indices are restricted to {2, inf}; the conjugate of 2 is 2 and the
// conjugate of inf is 1, so dual norms are restricted to {1, 2}.
enum class Norm { l2, linf };
enum class DualNorm { l1, l2 };

const char* norm_name(Norm n);           // "2" / "inf"
Norm norm_from_name(const std::string&);
DualNorm conjugate(Norm n);
double dual_exponent(Norm n);  // q for p, s for r, as a double in {1, 2}

// Threat model (W_p, l_r): p couples samples across the dataset, r measures
// single-sample feature moves, delta is the adversarial budget.
struct ThreatModel {
  Norm p = Norm::linf;
  Norm r = Norm::linf;
  double delta = 0.0;

  double q() const { return dual_exponent(p); }
  DualNorm s() const { return conjugate(r); }
};

void validate_threat(const ThreatModel& t);

double primal_norm(const Tensor& v, Norm r);
double dual_norm_value(const Tensor& v, DualNorm s);

// Alignment map h with <h(v), v> = ||v||_s and ||h(v)||_r <= 1:
// sgn(v) componentwise for s=1, v/||v||_2 for s=2, h(0) = 0.
Tensor h_map(const Tensor& v, DualNorm s);

// ||x1 - x2||_r when labels agree, +inf otherwise.
double pseudo_distance(const Sample& a, const Sample& b, Norm r);

// Label-matched bijection between two equal-size datasets. pairs[i] = j
// couples left sample i with right sample j.
struct TransportPlan {
  std::vector<std::size_t> pairs;
  std::vector<double> ground_costs;  // pseudo-distance per coupled pair
  double distance = 0.0;             // W_p value of this plan
};

enum class Coupling { identity, exact };

TransportPlan identity_plan(const LabeledDataset& a, const LabeledDataset& b,
                            const ThreatModel& t);

// W_p under a fixed plan: (mean of d^p)^(1/p) for p=2, max d for p=inf.
double empirical_wasserstein(const LabeledDataset& a, const LabeledDataset& b,
                             const ThreatModel& t, const TransportPlan& plan);

// Optimal label-matched bijection. p=2 minimizes the mean of squared ground
// costs (assignment problem per label class); p=inf minimizes the largest
// ground cost (bottleneck assignment). Throws ValidationError when label
// multisets differ or a class exceeds size_cap.
TransportPlan exact_ot(const LabeledDataset& a, const LabeledDataset& b, const ThreatModel& t,
                       std::size_t size_cap = 512);

// Projection of pert into the W_p ball of radius t.delta around orig,
// followed by a clamp into [0,1]^n. Ball semantics: inside the ball the
// points pass through unchanged (then clamped). Outside:
//   p=2:   every displacement along the coupling is rescaled by delta/d_cur
//   p=inf: each sample is projected onto its own l_r ball of radius delta
//          (the W_inf constraint separates per sample; this is the metric
//          projection and keeps the degeneration to classical PGD exact)
// sphere=true applies the p=2-style rescale unconditionally (the literal
// first-order transport formula), even when already inside.
LabeledDataset project_ball(const LabeledDataset& orig, const LabeledDataset& pert,
                            const ThreatModel& t, Coupling coupling, bool sphere = false);

// Same projection without the final clamp; the budget invariant
// |W_p(orig, result) - min(d_cur, delta)| <= 1e-9 holds on this output.
LabeledDataset project_ball_unclamped(const LabeledDataset& orig, const LabeledDataset& pert,
                                      const ThreatModel& t, Coupling coupling,
                                      bool sphere = false);

}  // namespace wdro
