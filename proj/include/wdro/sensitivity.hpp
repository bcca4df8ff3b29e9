#pragma once

#include <vector>

#include "wdro/dataset.hpp"
#include "wdro/losses.hpp"
#include "wdro/model.hpp"
#include "wdro/transport.hpp"

namespace wdro {

// First-order sensitivity of the expected loss to a W_p budget:
//   Upsilon = (mean over samples of ||grad_x J||_s^q)^(1/q),  q = conj(p).
struct SensitivityReport {
  double upsilon = 0.0;
  double v0 = 0.0;  // mean clean loss
  std::vector<double> dual_norms;
  bool degenerate = false;  // upsilon == 0
};

SensitivityReport sensitivity(const Network& net, LossKind kind, const LabeledDataset& data,
                              const ThreatModel& threat);

// V(0) + delta * Upsilon, the first-order adversarial loss expansion.
double first_order_adv_loss(double v0, double delta, double upsilon);

struct DisplaceResult {
  LabeledDataset perturbed;  // clamped into [0,1]^n
  LabeledDataset pre_clamp;  // same points before the box clamp
  SensitivityReport report;
};

// First-order worst-case displacement: each sample moves by
//   delta * h(g_i) * (||g_i||_s / Upsilon)^(q-1),   g_i = grad_x J at sample i,
// with 0^0 taken as 0 so zero-gradient samples stay put. Under the identity
// coupling the pre-clamp W_p distance spends the whole budget: exactly delta
// for p=2 (when some gradient is nonzero), at most delta for p=inf.
// Degenerate Upsilon = 0 returns the data unchanged with the flag set.
DisplaceResult qdelta_displace(const Network& net, LossKind kind, const LabeledDataset& data,
                               const ThreatModel& threat);

}  // namespace wdro
