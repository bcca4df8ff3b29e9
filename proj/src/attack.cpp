#include "wdro/attack.hpp"

#include <cmath>
#include <string>

#include "wdro/errors.hpp"
#include "wdro/parallel.hpp"
#include "wdro/rng.hpp"

namespace wdro {

namespace {

void validate_attack(const Network& net, const LabeledDataset& data, const AttackConfig& cfg) {
  validate_network(net);
  validate_dataset(data);
  validate_threat(cfg.threat);
  if (net.input_dim != data.n) throw ValidationError("attack: model/data dimension mismatch");
  if (net.num_classes != data.m && data.m > net.num_classes)
    throw ValidationError("attack: data labels exceed model classes");
  if (cfg.steps < 1) throw ValidationError("attack: steps must be positive");
  if (!(cfg.ratio > 0.0)) throw ValidationError("attack: ratio must be positive");
  if (cfg.restarts < 0) throw ValidationError("attack: restarts must be nonnegative");
}

struct IterateStats {
  double accuracy = 0.0;
  double mean_loss = 0.0;
};

// one forward per sample: accuracy and mean loss together
IterateStats measure(const Network& net, LossKind kind, const LabeledDataset& data) {
  const std::size_t count = data.samples.size();
  std::vector<double> losses(count, 0.0);
  std::vector<char> hits(count, 0);
  parallel_for(count, [&](std::size_t i) {
    const Sample& s = data.samples[i];
    const Tensor logits = forward(net, s.x);
    hits[i] = logits_in_set_s(logits, s.y) ? 1 : 0;
    switch (kind) {
      case LossKind::ce: losses[i] = ce(logits, s.y); break;
      case LossKind::dlr: losses[i] = dlr(logits, s.y); break;
      case LossKind::redlr: losses[i] = redlr(logits, s.y); break;
    }
  });
  IterateStats st;
  double acc = 0.0, loss_acc = 0.0;
  for (std::size_t i = 0; i < count; ++i) {
    acc += hits[i];
    loss_acc += losses[i];
  }
  st.accuracy = acc / static_cast<double>(count);
  st.mean_loss = loss_acc / static_cast<double>(count);
  return st;
}

struct GradPass {
  std::vector<Tensor> grads;
  std::vector<double> dual_norms;
  double upsilon = 0.0;
};

GradPass gradient_pass(const Network& net, LossKind kind, const LabeledDataset& data,
                       const ThreatModel& threat) {
  GradPass pass;
  const std::size_t count = data.samples.size();
  pass.grads.assign(count, Tensor{});
  pass.dual_norms.assign(count, 0.0);
  const DualNorm s = threat.s();
  parallel_for(count, [&](std::size_t i) {
    pass.grads[i] = input_grad(net, kind, data.samples[i].x, data.samples[i].y);
    pass.dual_norms[i] = dual_norm_value(pass.grads[i], s);
  });
  const double q = threat.q();
  double acc = 0.0;
  for (double v : pass.dual_norms) acc += (q == 1.0) ? v : v * v;
  const double mean = acc / static_cast<double>(count);
  pass.upsilon = (q == 1.0) ? mean : std::sqrt(mean);
  return pass;
}

struct RunOutcome {
  LabeledDataset best;
  double best_distance = 0.0;
  double best_accuracy = 1.0;
  int best_iteration = 0;
  std::vector<double> accuracy_trajectory;
  std::vector<double> loss_trajectory;
  bool degenerate = false;
};

// core W-PGD loop; start_raw/start is the (possibly random) initial iterate
RunOutcome run_attack(const Network& net, const LabeledDataset& clean, const AttackConfig& cfg,
                      const LabeledDataset& start_raw, const LabeledDataset& start, int steps) {
  RunOutcome out;
  const ThreatModel& threat = cfg.threat;
  const double q = threat.q();
  const DualNorm s = threat.s();
  const double alpha = cfg.ratio * threat.delta / static_cast<double>(steps);

  double clean_upsilon = 0.0;
  if (cfg.upsilon_source == UpsilonSource::clean)
    clean_upsilon = gradient_pass(net, cfg.loss, clean, threat).upsilon;

  LabeledDataset cur = start;
  {
    const IterateStats st = measure(net, cfg.loss, cur);
    out.accuracy_trajectory.push_back(st.accuracy);
    out.loss_trajectory.push_back(st.mean_loss);
    out.best = cur;
    out.best_accuracy = st.accuracy;
    out.best_iteration = 0;
    ThreatModel ident = threat;
    out.best_distance = empirical_wasserstein(clean, start_raw, ident,
                                              identity_plan(clean, start_raw, ident));
  }

  for (int t = 1; t <= steps; ++t) {
    const GradPass pass = gradient_pass(net, cfg.loss, cur, threat);
    const double ups = cfg.upsilon_source == UpsilonSource::clean ? clean_upsilon : pass.upsilon;
    if (ups == 0.0) {
      out.degenerate = true;
      break;  // no ascent direction anywhere; iterates would stay put
    }

    LabeledDataset stepped = cur;
    parallel_for(cur.samples.size(), [&](std::size_t i) {
      const double gnorm = pass.dual_norms[i];
      double weight;
      if (q == 1.0) {
        weight = gnorm > 0.0 ? 1.0 : 0.0;  // 0^0 := 0, zero-gradient samples freeze
      } else {
        weight = gnorm / ups;
      }
      if (weight == 0.0) return;
      const Tensor dir = h_map(pass.grads[i], s);
      Tensor& x = stepped.samples[i].x;
      for (std::size_t k = 0; k < x.values.size(); ++k) x[k] += alpha * dir[k] * weight;
    });

    LabeledDataset raw =
        project_ball_unclamped(clean, stepped, threat, cfg.coupling, cfg.project_to_sphere);
    LabeledDataset next = raw;
    clamp_features(next);

    const IterateStats st = measure(net, cfg.loss, next);
    out.accuracy_trajectory.push_back(st.accuracy);
    out.loss_trajectory.push_back(st.mean_loss);
    if (st.accuracy < out.best_accuracy) {
      out.best_accuracy = st.accuracy;
      out.best = next;
      out.best_iteration = t;
      out.best_distance =
          empirical_wasserstein(clean, raw, threat, identity_plan(clean, raw, threat));
    }
    cur = std::move(next);
  }
  return out;
}

LabeledDataset random_start(const LabeledDataset& clean, const ThreatModel& threat,
                            std::mt19937_64& rng) {
  LabeledDataset out = clean;
  for (Sample& smp : out.samples) {
    if (threat.r == Norm::linf) {
      for (double& v : smp.x.values) v += uniform_in(rng, -threat.delta, threat.delta);
    } else {
      Tensor dir = Tensor::zeros(smp.x.shape);
      double norm2 = 0.0;
      for (double& d : dir.values) {
        d = normal01(rng);
        norm2 += d * d;
      }
      const double norm = std::sqrt(norm2);
      const double radius =
          threat.delta *
          std::pow(uniform01(rng), 1.0 / static_cast<double>(smp.x.numel()));
      if (norm > 0.0)
        for (std::size_t k = 0; k < smp.x.values.size(); ++k)
          smp.x[k] += radius * dir[k] / norm;
    }
  }
  return out;
}

AttackResult finalize(const RunOutcome& best_run, int restart_index) {
  AttackResult res;
  res.adversarial = best_run.best;
  res.achieved_distance = best_run.best_distance;
  res.accuracy_trajectory = best_run.accuracy_trajectory;
  res.loss_trajectory = best_run.loss_trajectory;
  res.final_adv_accuracy = best_run.best_accuracy;
  res.best_iteration = best_run.best_iteration;
  res.best_restart = restart_index;
  res.degenerate_upsilon = best_run.degenerate;
  return res;
}

}  // namespace

AttackResult wpgd(const Network& net, const LabeledDataset& data, const AttackConfig& cfg) {
  validate_attack(net, data, cfg);

  RunOutcome best = run_attack(net, data, cfg, data, data, cfg.steps);
  int best_restart = 0;
  if (cfg.restarts > 0) {
    auto rng = make_rng(cfg.seed, "attack.restarts");
    for (int r = 1; r <= cfg.restarts; ++r) {
      LabeledDataset raw = random_start(data, cfg.threat, rng);
      LabeledDataset start = raw;
      clamp_features(start);
      RunOutcome run = run_attack(net, data, cfg, raw, start, cfg.steps);
      if (run.best_accuracy < best.best_accuracy) {
        best = std::move(run);
        best_restart = r;
      }
    }
  }
  return finalize(best, best_restart);
}

AttackResult wfgsm(const Network& net, const LabeledDataset& data, const AttackConfig& cfg) {
  validate_attack(net, data, cfg);
  const ThreatModel& threat = cfg.threat;
  const double q = threat.q();
  const DualNorm s = threat.s();

  const GradPass pass = gradient_pass(net, cfg.loss, data, threat);
  AttackResult res;
  const IterateStats clean_st = measure(net, cfg.loss, data);
  res.accuracy_trajectory.push_back(clean_st.accuracy);
  res.loss_trajectory.push_back(clean_st.mean_loss);

  if (pass.upsilon == 0.0) {
    res.adversarial = data;
    res.final_adv_accuracy = clean_st.accuracy;
    res.degenerate_upsilon = true;
    return res;
  }

  LabeledDataset stepped = data;
  parallel_for(data.samples.size(), [&](std::size_t i) {
    const double gnorm = pass.dual_norms[i];
    double weight;
    if (q == 1.0) {
      weight = gnorm > 0.0 ? 1.0 : 0.0;
    } else {
      weight = gnorm / pass.upsilon;
    }
    if (weight == 0.0) return;
    const Tensor dir = h_map(pass.grads[i], s);
    Tensor& x = stepped.samples[i].x;
    for (std::size_t k = 0; k < x.values.size(); ++k) x[k] += threat.delta * dir[k] * weight;
  });

  LabeledDataset raw =
      project_ball_unclamped(data, stepped, threat, cfg.coupling, cfg.project_to_sphere);
  res.adversarial = raw;
  clamp_features(res.adversarial);
  res.achieved_distance =
      empirical_wasserstein(data, raw, threat, identity_plan(data, raw, threat));
  const IterateStats st = measure(net, cfg.loss, res.adversarial);
  res.accuracy_trajectory.push_back(st.accuracy);
  res.loss_trajectory.push_back(st.mean_loss);
  res.final_adv_accuracy = st.accuracy;
  res.best_iteration = 1;
  return res;
}

AttackResult classic_pgd(const Network& net, const LabeledDataset& data, const AttackConfig& cfg) {
  if (cfg.threat.p != Norm::linf)
    throw ValidationError("classic_pgd: per-sample projection is only defined for p=inf");
  return wpgd(net, data, cfg);
}

}  // namespace wdro
