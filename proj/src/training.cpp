#include "wdro/training.hpp"

#include <cmath>
#include <numeric>

#include "wdro/errors.hpp"
#include "wdro/parallel.hpp"
#include "wdro/rng.hpp"
#include "wdro/sensitivity.hpp"

namespace wdro {

const char* train_method_name(TrainMethod m) {
  switch (m) {
    case TrainMethod::clean: return "clean";
    case TrainMethod::regularized: return "regularized";
    case TrainMethod::perturbed: return "perturbed";
  }
  return "clean";
}

TrainMethod train_method_from_name(const std::string& name) {
  if (name == "clean") return TrainMethod::clean;
  if (name == "regularized") return TrainMethod::regularized;
  if (name == "perturbed") return TrainMethod::perturbed;
  throw ValidationError("training: unknown method '" + name + "'");
}

namespace {

void validate_train(const Network& net, const LabeledDataset& data, const TrainConfig& cfg) {
  validate_network(net);
  validate_dataset(data);
  validate_threat(cfg.threat);
  if (net.input_dim != data.n) throw ValidationError("training: model/data dimension mismatch");
  if (data.m > net.num_classes)
    throw ValidationError("training: data labels exceed model classes");
  if (!(cfg.lr > 0.0)) throw ValidationError("training: learning rate must be positive");
  if (cfg.epochs < 0) throw ValidationError("training: epochs must be nonnegative");
  if (cfg.batch_size < 1) throw ValidationError("training: batch size must be positive");
  if (static_cast<std::size_t>(cfg.batch_size) > data.samples.size())
    throw ValidationError("training: batch size exceeds the dataset size");
  if (!(cfg.fd_epsilon > 0.0)) throw ValidationError("training: fd_epsilon must be positive");
}

struct BatchGrad {
  double mean_loss = 0.0;
  std::vector<double> grad;  // mean over the batch, flat parameter layout
};

BatchGrad batch_param_grad(const Network& net, LossKind kind, const LabeledDataset& data,
                           const std::vector<std::size_t>& index, std::size_t lo, std::size_t hi) {
  const std::size_t count = hi - lo;
  std::vector<ParamGradResult> per(count);
  parallel_for(count, [&](std::size_t k) {
    const Sample& s = data.samples[index[lo + k]];
    per[k] = loss_with_param_grad(net, kind, s.x, s.y);
  });
  BatchGrad out;
  out.grad.assign(net.param_count(), 0.0);
  for (std::size_t k = 0; k < count; ++k) {
    out.mean_loss += per[k].value;
    for (std::size_t j = 0; j < out.grad.size(); ++j) out.grad[j] += per[k].grad[j];
  }
  const double inv = 1.0 / static_cast<double>(count);
  out.mean_loss *= inv;
  for (double& g : out.grad) g *= inv;
  return out;
}

void check_finite(double batch_loss, const std::vector<double>& params, int epoch, int batch) {
  bool ok = std::isfinite(batch_loss);
  if (ok)
    for (double p : params)
      if (!std::isfinite(p)) {
        ok = false;
        break;
      }
  if (!ok)
    throw DegeneracyError("training diverged: non-finite loss or parameters at epoch " +
                          std::to_string(epoch) + ", batch " + std::to_string(batch) +
                          " (last batch loss " + std::to_string(batch_loss) + ")");
}

LabeledDataset gather_batch(const LabeledDataset& data, const std::vector<std::size_t>& index,
                            std::size_t lo, std::size_t hi) {
  LabeledDataset batch;
  batch.n = data.n;
  batch.m = data.m;
  batch.samples.reserve(hi - lo);
  for (std::size_t k = lo; k < hi; ++k) batch.samples.push_back(data.samples[index[k]]);
  return batch;
}

// shared loop; `extra` hooks per-batch behavior of the three methods
TrainResult run_training(Network net, const LabeledDataset& data, const TrainConfig& cfg) {
  validate_train(net, data, cfg);
  const bool robust = cfg.method != TrainMethod::clean && cfg.threat.delta > 0.0;

  TrainResult result;
  auto shuffle_rng = make_rng(cfg.seed, "training.shuffle");
  std::vector<std::size_t> index(data.samples.size());
  std::iota(index.begin(), index.end(), 0);

  Network snapshot = net;  // theta_star, refreshed per epoch
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    double snapshot_upsilon = 0.0;
    if (robust) {
      snapshot_upsilon = sensitivity(snapshot, cfg.loss, data, cfg.threat).upsilon;
      result.epoch_upsilon.push_back(snapshot_upsilon);
      if (snapshot_upsilon == 0.0) result.upsilon_degenerate = true;
    }

    shuffle(index, shuffle_rng);
    double epoch_loss = 0.0;
    std::size_t seen = 0;
    int batch_no = 0;
    for (std::size_t lo = 0; lo < index.size(); lo += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t hi =
          std::min(index.size(), lo + static_cast<std::size_t>(cfg.batch_size));
      ++batch_no;

      std::vector<double> params = flatten_params(net);
      BatchGrad bg;
      if (cfg.method == TrainMethod::perturbed && robust && snapshot_upsilon > 0.0) {
        // single-step displacement of the batch at the current parameters,
        // scaled by the snapshot sensitivity, then projected within the batch
        LabeledDataset batch = gather_batch(data, index, lo, hi);
        LabeledDataset stepped = batch;
        const DualNorm s = cfg.threat.s();
        const double q = cfg.threat.q();
        parallel_for(batch.samples.size(), [&](std::size_t k) {
          const Sample& smp = batch.samples[k];
          const Tensor g = input_grad(net, cfg.loss, smp.x, smp.y);
          const double gnorm = dual_norm_value(g, s);
          double weight;
          if (q == 1.0) {
            weight = gnorm > 0.0 ? 1.0 : 0.0;
          } else {
            weight = gnorm / snapshot_upsilon;
          }
          if (weight == 0.0) return;
          const Tensor dir = h_map(g, s);
          Tensor& x = stepped.samples[k].x;
          for (std::size_t j = 0; j < x.values.size(); ++j)
            x[j] += cfg.threat.delta * dir[j] * weight;
        });
        LabeledDataset perturbed = project_ball(batch, stepped, cfg.threat, Coupling::identity);
        std::vector<std::size_t> ident(perturbed.samples.size());
        std::iota(ident.begin(), ident.end(), 0);
        bg = batch_param_grad(net, cfg.loss, perturbed, ident, 0, ident.size());
        for (std::size_t j = 0; j < params.size(); ++j) params[j] -= cfg.lr * bg.grad[j];
      } else if (cfg.method == TrainMethod::regularized && robust && snapshot_upsilon > 0.0) {
        bg = batch_param_grad(net, cfg.loss, data, index, lo, hi);
        LabeledDataset batch = gather_batch(data, index, lo, hi);
        const std::vector<double> gups = grad_theta_upsilon(net, cfg.loss, batch, cfg.threat,
                                                            cfg.fd_epsilon, snapshot_upsilon);
        for (std::size_t j = 0; j < params.size(); ++j)
          params[j] -= cfg.lr * (bg.grad[j] + cfg.threat.delta * gups[j]);
      } else {
        bg = batch_param_grad(net, cfg.loss, data, index, lo, hi);
        for (std::size_t j = 0; j < params.size(); ++j) params[j] -= cfg.lr * bg.grad[j];
      }

      check_finite(bg.mean_loss, params, epoch, batch_no);
      assign_params(net, params);
      epoch_loss += bg.mean_loss * static_cast<double>(hi - lo);
      seen += hi - lo;
    }
    result.epoch_mean_loss.push_back(epoch_loss / static_cast<double>(seen));
    if (robust) snapshot = net;
  }
  result.net = std::move(net);
  return result;
}

}  // namespace

std::vector<double> mixed_directional_fd(
    const std::function<std::vector<double>(const Tensor&)>& grad_theta_at, const Tensor& x,
    const Tensor& v, double eps) {
  if (!(eps > 0.0)) throw ValidationError("mixed_directional_fd: eps must be positive");
  const std::vector<double> base = grad_theta_at(x);
  Tensor probe = x;
  for (std::size_t k = 0; k < probe.values.size(); ++k) probe[k] += eps * v[k];
  const std::vector<double> shifted = grad_theta_at(probe);
  if (shifted.size() != base.size())
    throw ValidationError("mixed_directional_fd: inconsistent gradient sizes");
  std::vector<double> out(base.size());
  for (std::size_t j = 0; j < out.size(); ++j) out[j] = (shifted[j] - base[j]) / eps;
  return out;
}

std::vector<double> grad_theta_upsilon(const Network& net, LossKind kind,
                                       const LabeledDataset& batch, const ThreatModel& threat,
                                       double fd_epsilon, double upsilon_star) {
  if (batch.samples.empty()) throw ValidationError("grad_theta_upsilon: empty batch");
  const std::size_t count = batch.samples.size();
  const std::size_t dim = net.param_count();
  std::vector<double> acc(dim, 0.0);
  if (upsilon_star == 0.0) return acc;  // degenerate snapshot, zero gradient

  const DualNorm s = threat.s();
  const double q = threat.q();
  std::vector<std::vector<double>> per(count);
  parallel_for(count, [&](std::size_t i) {
    const Sample& smp = batch.samples[i];
    const FullGradResult full = loss_with_all_grads(net, kind, smp.x, smp.y);
    const double gnorm = dual_norm_value(full.grad_x, s);
    if (gnorm == 0.0) return;  // h(0) = 0, the contraction vanishes
    const double weight = (q == 1.0) ? 1.0 : gnorm;
    const Tensor v = h_map(full.grad_x, s);

    Tensor probe = smp.x;
    for (std::size_t k = 0; k < probe.values.size(); ++k) probe[k] += fd_epsilon * v[k];
    const std::vector<double> shifted = loss_with_param_grad(net, kind, probe, smp.y).grad;

    std::vector<double> contrib(dim);
    for (std::size_t j = 0; j < dim; ++j)
      contrib[j] = weight * (shifted[j] - full.grad_theta[j]) / fd_epsilon;
    per[i] = std::move(contrib);
  });

  for (const auto& contrib : per) {
    if (contrib.empty()) continue;
    for (std::size_t j = 0; j < dim; ++j) acc[j] += contrib[j];
  }
  const double prefactor =
      (q == 1.0) ? 1.0 : 1.0 / upsilon_star;  // Upsilon^(1-q) with q in {1,2}
  const double inv = prefactor / static_cast<double>(count);
  for (double& g : acc) g *= inv;
  return acc;
}

TrainResult train_clean(Network init, const LabeledDataset& data, const TrainConfig& cfg) {
  TrainConfig c = cfg;
  c.method = TrainMethod::clean;
  return run_training(std::move(init), data, c);
}

TrainResult train_regularized(Network init, const LabeledDataset& data, const TrainConfig& cfg) {
  TrainConfig c = cfg;
  c.method = TrainMethod::regularized;
  return run_training(std::move(init), data, c);
}

TrainResult train_perturbed(Network init, const LabeledDataset& data, const TrainConfig& cfg) {
  TrainConfig c = cfg;
  c.method = TrainMethod::perturbed;
  return run_training(std::move(init), data, c);
}

TrainResult train(Network init, const LabeledDataset& data, const TrainConfig& cfg) {
  return run_training(std::move(init), data, cfg);
}

}  // namespace wdro
