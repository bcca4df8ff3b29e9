#include "wdro/robustness.hpp"

#include <algorithm>
#include <cmath>

#include "wdro/errors.hpp"
#include "wdro/sensitivity.hpp"

namespace wdro {

namespace {
constexpr double kGapFloor = 1e-12;
}

CleanLosses conditional_clean_losses(const Network& net, LossKind kind,
                                     const LabeledDataset& data) {
  validate_dataset(data);
  CleanLosses out;
  double sum_correct = 0.0, sum_wrong = 0.0;
  std::size_t n_correct = 0, n_wrong = 0;
  for (const Sample& s : data.samples) {
    const Tensor logits = forward(net, s.x);
    double loss = 0.0;
    switch (kind) {
      case LossKind::ce: loss = ce(logits, s.y); break;
      case LossKind::dlr: loss = dlr(logits, s.y); break;
      case LossKind::redlr: loss = redlr(logits, s.y); break;
    }
    if (logits_in_set_s(logits, s.y)) {
      sum_correct += loss;
      ++n_correct;
    } else {
      sum_wrong += loss;
      ++n_wrong;
    }
  }
  const double total = static_cast<double>(data.samples.size());
  out.A = static_cast<double>(n_correct) / total;
  out.V0 = (sum_correct + sum_wrong) / total;
  if (n_correct == 0 || n_wrong == 0)
    throw DegeneracyError("conditional_clean_losses: clean accuracy is " +
                          std::to_string(out.A) +
                          "; conditional losses need both correct and misclassified samples");
  out.C0 = sum_correct / static_cast<double>(n_correct);
  out.W0 = sum_wrong / static_cast<double>(n_wrong);
  return out;
}

double adv_accuracy(const Network& net, const LabeledDataset& adversarial) {
  return clean_accuracy(net, adversarial);
}

double r_upper(double a_clean, double a_qdelta) {
  if (!(a_clean > 0.0)) throw DegeneracyError("r_upper: clean accuracy is zero");
  return a_qdelta / a_clean;
}

LowerBounds r_lower(double w0, double v0, double delta, double upsilon, double e_qdelta_loss) {
  const double gap = w0 - v0;
  if (gap < kGapFloor)
    throw DegeneracyError("r_lower: loss gap W(0)-V(0) = " + std::to_string(gap) +
                          " is below 1e-12; bounds are undefined");
  LowerBounds lb;
  lb.tilde = (w0 - e_qdelta_loss) / gap;
  lb.bar = (w0 - v0 - delta * upsilon) / gap;
  lb.min = std::min(lb.tilde, lb.bar);
  return lb;
}

RefinedLower r_lower_n(const Network& net, LossKind kind, const LabeledDataset& data,
                       const ThreatModel& threat, int steps, std::uint64_t seed) {
  const CleanLosses cl = conditional_clean_losses(net, kind, data);
  const double gap = cl.W0 - cl.V0;
  if (gap < kGapFloor)
    throw DegeneracyError("r_lower_n: loss gap W(0)-V(0) below 1e-12");

  AttackConfig cfg;
  cfg.threat = threat;
  cfg.loss = kind;
  cfg.steps = steps;
  cfg.seed = seed;
  const AttackResult atk = wpgd(net, data, cfg);

  RefinedLower out;
  out.v_delta_n = cl.V0;
  for (double v : atk.loss_trajectory) out.v_delta_n = std::max(out.v_delta_n, v);
  out.value = (cl.W0 - out.v_delta_n) / gap;
  return out;
}

double concentration_probability(const ConcentrationParams& params, bool two_sample) {
  if (params.K <= 0.0) throw ValidationError("concentration: K must be positive");
  if (params.n < 1) throw ValidationError("concentration: dimension must be at least 1");
  if (params.epsilon < 0.0) throw ValidationError("concentration: epsilon must be nonnegative");
  if (params.N == 0) throw ValidationError("concentration: N must be positive");
  const double eps_pow = std::pow(params.epsilon, static_cast<double>(params.n));
  double bound;
  if (two_sample) {
    if (params.M == 0) throw ValidationError("concentration: M must be positive in two-sample mode");
    const double count = static_cast<double>(std::min(params.M, params.N));
    bound = 2.0 * params.K * std::exp(-params.K * eps_pow * count);
  } else {
    bound = params.K * std::exp(-params.K * static_cast<double>(params.N) * eps_pow);
  }
  return std::min(1.0, bound);
}

std::vector<GuaranteeRecord> oos_guarantees(const OosInputs& in,
                                            const ConcentrationParams& params) {
  const char* caveat = "asymptotic, first-order";
  std::vector<GuaranteeRecord> records;

  const double gap = in.w0 - in.v0;
  if (gap < kGapFloor)
    throw DegeneracyError("oos_guarantees: loss gap W(0)-V(0) below 1e-12");

  // (i) clean accuracy out of sample: A_hat * R^l at doubled radius, the
  // first-order closed form (W0 - V0 - 2 eps Upsilon)/(W0 - V0)
  {
    GuaranteeRecord rec;
    rec.name = "clean_accuracy_lower_bound";
    const double r_lower_2eps = (in.w0 - in.v0 - 2.0 * params.epsilon * in.upsilon) / gap;
    rec.value = in.a_hat * r_lower_2eps;
    rec.failure_bound = concentration_probability(params, true);
    rec.probability = std::max(0.0, 1.0 - rec.failure_bound);
    rec.caveat = caveat;
    records.push_back(std::move(rec));
  }

  // (ii) adversarial loss out of sample: V_hat(delta) + L_hat * eps
  {
    GuaranteeRecord rec;
    rec.name = "adversarial_loss_upper_bound";
    rec.value = in.v_delta_hat + in.lipschitz * params.epsilon;
    rec.failure_bound = concentration_probability(params, false);
    rec.probability = std::max(0.0, 1.0 - rec.failure_bound);
    rec.caveat = caveat;
    records.push_back(std::move(rec));
  }

  // (iii) accuracy drop: (V_hat(delta) - V_hat(0) + 2 L_hat delta)/(W0 - C0),
  // concentration evaluated at radius delta
  {
    const double denom = in.w0 - in.c0;
    if (denom < kGapFloor)
      throw DegeneracyError("oos_guarantees: denominator W(0)-C(0) below 1e-12");
    GuaranteeRecord rec;
    rec.name = "accuracy_drop_upper_bound";
    rec.value = (in.v_delta_hat - in.v0 + 2.0 * in.lipschitz * in.delta) / denom;
    ConcentrationParams at_delta = params;
    at_delta.epsilon = in.delta;
    rec.failure_bound = concentration_probability(at_delta, false);
    rec.probability = std::max(0.0, 1.0 - rec.failure_bound);
    rec.caveat = caveat;
    records.push_back(std::move(rec));
  }
  return records;
}

LossKind reference_attack_loss(const ThreatModel& threat, int num_classes, LossKind cert_loss) {
  if (threat.p == Norm::l2 && num_classes >= 3) return LossKind::redlr;
  return cert_loss;
}

RobustnessReport certify(const Network& net, const LabeledDataset& data, const ThreatModel& threat,
                         LossKind kind, int attack_steps, std::uint64_t seed) {
  validate_network(net);
  validate_dataset(data);
  validate_threat(threat);
  if (net.input_dim != data.n) throw ValidationError("certify: model/data dimension mismatch");

  RobustnessReport rep;
  rep.threat = threat;
  rep.delta = threat.delta;
  rep.loss = kind;

  const CleanLosses cl = conditional_clean_losses(net, kind, data);
  rep.A = cl.A;
  rep.V0 = cl.V0;
  rep.C0 = cl.C0;
  rep.W0 = cl.W0;

  const DisplaceResult disp = qdelta_displace(net, kind, data, threat);
  rep.Upsilon = disp.report.upsilon;
  if (disp.report.degenerate)
    throw DegeneracyError("certify: sensitivity Upsilon is zero; nothing to certify");

  const double a_qdelta = adv_accuracy(net, disp.perturbed);
  rep.R_upper = r_upper(cl.A, a_qdelta);

  double e_qdelta_loss = 0.0;
  for (const Sample& s : disp.perturbed.samples)
    e_qdelta_loss += loss_value(net, kind, s.x, s.y);
  e_qdelta_loss /= static_cast<double>(disp.perturbed.samples.size());

  const LowerBounds lb = r_lower(cl.W0, cl.V0, threat.delta, rep.Upsilon, e_qdelta_loss);
  rep.R_lower_tilde = lb.tilde;
  rep.R_lower_bar = lb.bar;
  rep.R_lower = lb.min;

  AttackConfig atk_cfg;
  atk_cfg.threat = threat;
  atk_cfg.loss = reference_attack_loss(threat, net.num_classes, kind);
  atk_cfg.steps = attack_steps;
  atk_cfg.seed = seed;
  const AttackResult atk = wpgd(net, data, atk_cfg);
  rep.A_delta = atk.final_adv_accuracy;
  rep.R = rep.A_delta / rep.A;

  // V(delta, n) on the certification loss: reuse the attack trajectory when
  // the losses coincide, otherwise rescore the reference attack's iterates
  if (atk_cfg.loss == kind) {
    rep.V_delta_n = cl.V0;
    for (double v : atk.loss_trajectory) rep.V_delta_n = std::max(rep.V_delta_n, v);
  } else {
    const RefinedLower refined = r_lower_n(net, kind, data, threat, attack_steps, seed);
    rep.V_delta_n = refined.v_delta_n;
  }
  return rep;
}

}  // namespace wdro
