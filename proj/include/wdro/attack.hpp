#pragma once

#include <cstdint>
#include <vector>

#include "wdro/dataset.hpp"
#include "wdro/losses.hpp"
#include "wdro/model.hpp"
#include "wdro/transport.hpp"

namespace wdro {

// Which iterates feed the per-iteration sensitivity estimate in W-PGD:
// the current adversarial iterates (the default) or the clean data once.
enum class UpsilonSource { iterate, clean };

struct AttackConfig {
  ThreatModel threat;
  LossKind loss = LossKind::ce;
  int steps = 50;
  double ratio = 2.5;  // step size alpha = ratio * delta / steps
  std::uint64_t seed = 0;
  Coupling coupling = Coupling::identity;
  UpsilonSource upsilon_source = UpsilonSource::iterate;
  int restarts = 0;  // extra runs from random feasible starts
  bool project_to_sphere = false;
};

struct AttackResult {
  LabeledDataset adversarial;   // best-accuracy iterate, clamped
  double achieved_distance = 0.0;  // pre-clamp identity-coupling W_p of that iterate
  std::vector<double> accuracy_trajectory;  // entry 0 is the starting point
  std::vector<double> loss_trajectory;      // mean loss per iterate
  double final_adv_accuracy = 1.0;
  int best_iteration = 0;  // index into the trajectories of the winning run
  int best_restart = 0;    // 0 = deterministic start from the clean data
  bool degenerate_upsilon = false;  // sensitivity vanished at some iteration
};

// Single distributional gradient step of magnitude delta, projected and
// clamped. At p = r = inf this is classical FGSM.
AttackResult wfgsm(const Network& net, const LabeledDataset& data, const AttackConfig& cfg);

// Iterated distributional PGD: per-iteration sensitivity, step
// alpha * h(g) * (||g||_s / Upsilon)^(q-1), projection onto the W_p ball
// around the clean data, clamp, best-accuracy iterate returned (the starting
// point counts, so the attack never reports worse than clean accuracy).
AttackResult wpgd(const Network& net, const LabeledDataset& data, const AttackConfig& cfg);

// Pointwise PGD in the per-sample l_r ball. Only defined for p = inf, where
// the W_inf ball separates per sample and this coincides with wpgd.
AttackResult classic_pgd(const Network& net, const LabeledDataset& data, const AttackConfig& cfg);

}  // namespace wdro
