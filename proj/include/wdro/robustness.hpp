#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "wdro/attack.hpp"
#include "wdro/dataset.hpp"
#include "wdro/losses.hpp"
#include "wdro/model.hpp"
#include "wdro/transport.hpp"

namespace wdro {

// Clean-loss decomposition over the correct set S and its complement.
// A * C0 + (1 - A) * W0 == V0 up to rounding (checked to 1e-9 in tests).
struct CleanLosses {
  double A = 0.0;   // clean accuracy
  double C0 = 0.0;  // mean loss over correctly classified samples
  double W0 = 0.0;  // mean loss over misclassified samples
  double V0 = 0.0;  // mean loss overall
};

// Throws DegeneracyError when A is 0 or 1 (one of the two conditional means
// does not exist).
CleanLosses conditional_clean_losses(const Network& net, LossKind kind,
                                     const LabeledDataset& data);

double adv_accuracy(const Network& net, const LabeledDataset& adversarial);

// R^u = Q_delta(S) / A, accuracy ratio under any feasible attack measure.
double r_upper(double a_clean, double a_qdelta);

struct LowerBounds {
  double tilde = 0.0;  // (W0 - E_{Q_delta}[J]) / (W0 - V0)
  double bar = 0.0;    // (W0 - V0 - delta*Upsilon) / (W0 - V0)
  double min = 0.0;
};

// Throws DegeneracyError when W0 - V0 < 1e-12.
LowerBounds r_lower(double w0, double v0, double delta, double upsilon, double e_qdelta_loss);

struct RefinedLower {
  double value = 0.0;      // (W0 - V(delta,n)) / (W0 - V0)
  double v_delta_n = 0.0;  // best mean loss over the first n W-PGD iterates
};

// V(delta,n) is the running maximum of the attack's mean-loss trajectory
// (iterate 0 = clean data included), so it is nondecreasing in n for a fixed
// trajectory and the refined bound tightens monotonically downward.
RefinedLower r_lower_n(const Network& net, LossKind kind, const LabeledDataset& data,
                       const ThreatModel& threat, int steps, std::uint64_t seed = 0);

struct ConcentrationParams {
  double K = 1.0;   // measure-concentration constant, user supplied
  int n = 1;        // feature dimension
  std::size_t N = 0;  // training sample count
  std::size_t M = 0;  // test sample count (two-sample mode)
  double epsilon = 0.0;
  double delta = 0.0;
};

// One-sample: min(1, K exp(-K N eps^n)); two-sample replaces N by min(M, N)
// and doubles the constant. This is the probability that the empirical
// measure strays at least eps from the truth, so guarantees hold with one
// minus this.
double concentration_probability(const ConcentrationParams& params, bool two_sample);

struct GuaranteeRecord {
  std::string name;
  double value = 0.0;
  double failure_bound = 0.0;  // concentration bound on the bad event
  double probability = 0.0;    // 1 - failure_bound, clipped into [0,1]
  std::string caveat;          // always "asymptotic, first-order"
};

// Inputs oos_guarantees reads from a certification run.
struct OosInputs {
  double a_hat = 0.0;      // empirical clean accuracy
  double v0 = 0.0;         // empirical V(0)
  double c0 = 0.0;         // empirical C(0)
  double w0 = 0.0;         // empirical W(0)
  double upsilon = 0.0;
  double v_delta_hat = 0.0;  // empirical adversarial loss estimate V(delta,n)
  double lipschitz = 0.0;    // empirical L-hat
  double delta = 0.0;
};

// Three records: out-of-sample clean accuracy lower bound A_hat * R^l_{2eps}
// (first-order form), adversarial loss upper bound V_hat + L_hat * eps, and
// the accuracy-drop bound (V_hat(delta) - V_hat(0) + 2 L_hat delta)/(W0 - C0).
std::vector<GuaranteeRecord> oos_guarantees(const OosInputs& in, const ConcentrationParams& params);

// Everything certify reports. Field names here are the JSON field names.
struct RobustnessReport {
  double A = 0.0;
  double A_delta = 0.0;
  double R = 0.0;
  double R_upper = 0.0;
  double R_lower_tilde = 0.0;
  double R_lower_bar = 0.0;
  double R_lower = 0.0;
  double V0 = 0.0;
  double C0 = 0.0;
  double W0 = 0.0;
  double Upsilon = 0.0;
  double V_delta_n = 0.0;
  double delta = 0.0;
  ThreatModel threat;
  LossKind loss = LossKind::ce;
};

// Loss driving the reference 50-step W-PGD estimate of A_delta: ReDLR for
// p=2 when the class count allows it, otherwise the certification loss.
LossKind reference_attack_loss(const ThreatModel& threat, int num_classes, LossKind cert_loss);

RobustnessReport certify(const Network& net, const LabeledDataset& data, const ThreatModel& threat,
                         LossKind kind, int attack_steps = 50, std::uint64_t seed = 0);

}  // namespace wdro
