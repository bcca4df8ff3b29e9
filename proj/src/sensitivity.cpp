#include "wdro/sensitivity.hpp"

#include <cmath>

#include "wdro/errors.hpp"
#include "wdro/parallel.hpp"

namespace wdro {

SensitivityReport sensitivity(const Network& net, LossKind kind, const LabeledDataset& data,
                              const ThreatModel& threat) {
  if (data.samples.empty()) throw ValidationError("sensitivity: empty dataset");
  validate_threat(threat);

  const std::size_t count = data.samples.size();
  SensitivityReport rep;
  rep.dual_norms.assign(count, 0.0);
  std::vector<double> losses(count, 0.0);
  const DualNorm s = threat.s();
  parallel_for(count, [&](std::size_t i) {
    const Sample& smp = data.samples[i];
    InputGradResult r = loss_with_input_grad(net, kind, smp.x, smp.y);
    losses[i] = r.value;
    rep.dual_norms[i] = dual_norm_value(r.grad, s);
  });

  double loss_acc = 0.0;
  for (double v : losses) loss_acc += v;
  rep.v0 = loss_acc / static_cast<double>(count);

  const double q = threat.q();
  double norm_acc = 0.0;
  for (double v : rep.dual_norms) norm_acc += (q == 1.0) ? v : v * v;
  const double mean = norm_acc / static_cast<double>(count);
  rep.upsilon = (q == 1.0) ? mean : std::sqrt(mean);
  rep.degenerate = rep.upsilon == 0.0;
  return rep;
}

double first_order_adv_loss(double v0, double delta, double upsilon) {
  return v0 + delta * upsilon;
}

DisplaceResult qdelta_displace(const Network& net, LossKind kind, const LabeledDataset& data,
                               const ThreatModel& threat) {
  DisplaceResult res;
  res.report = sensitivity(net, kind, data, threat);
  res.pre_clamp = data;
  if (res.report.degenerate || threat.delta == 0.0) {
    res.perturbed = data;
    return res;
  }

  const std::size_t count = data.samples.size();
  const DualNorm s = threat.s();
  const double q = threat.q();
  parallel_for(count, [&](std::size_t i) {
    const Sample& smp = data.samples[i];
    const Tensor g = input_grad(net, kind, smp.x, smp.y);
    const double gnorm = res.report.dual_norms[i];
    // weight (||g||/Upsilon)^(q-1); q=1 gives the 0^0 := 0 convention, so a
    // vanishing gradient freezes the sample instead of moving it by delta
    double weight;
    if (q == 1.0) {
      weight = gnorm > 0.0 ? 1.0 : 0.0;
    } else {
      weight = gnorm / res.report.upsilon;
    }
    if (weight == 0.0) return;
    const Tensor dir = h_map(g, s);
    Tensor& x = res.pre_clamp.samples[i].x;
    for (std::size_t k = 0; k < x.values.size(); ++k)
      x[k] += threat.delta * dir[k] * weight;
  });

  res.perturbed = res.pre_clamp;
  clamp_features(res.perturbed);
  return res;
}

}  // namespace wdro
