#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "wdro/dataset.hpp"
#include "wdro/losses.hpp"
#include "wdro/model.hpp"
#include "wdro/transport.hpp"

namespace wdro {

enum class TrainMethod { clean, regularized, perturbed };

const char* train_method_name(TrainMethod m);
TrainMethod train_method_from_name(const std::string& name);

struct TrainConfig {
  TrainMethod method = TrainMethod::clean;
  ThreatModel threat;  // delta = 0 collapses both robust methods to clean SGD
  LossKind loss = LossKind::ce;
  double lr = 0.1;
  int epochs = 10;
  int batch_size = 32;
  double fd_epsilon = 1e-4;  // probe step for the mixed parameter/input derivative
  std::uint64_t seed = 0;
};

struct TrainResult {
  Network net;
  std::vector<double> epoch_mean_loss;  // running mean of batch losses per epoch
  std::vector<double> epoch_upsilon;    // snapshot sensitivity per epoch (robust methods)
  bool upsilon_degenerate = false;      // some epoch saw a zero snapshot sensitivity
};

// Gradient of the sensitivity with respect to the parameters, estimated on a
// batch:
//   Upsilon_star^(1-q) * mean_i [ <d/dx grad_theta J, h(g_i)> * ||g_i||_s^(q-1) ],
// with the mixed derivative contracted by a forward finite difference of
// grad_theta along v = h(g_i). upsilon_star comes from the previous-epoch
// snapshot; a vanishing snapshot yields a zero gradient.
std::vector<double> grad_theta_upsilon(const Network& net, LossKind kind,
                                       const LabeledDataset& batch, const ThreatModel& threat,
                                       double fd_epsilon, double upsilon_star);

// Mixed-derivative helper: (grad_theta(x + eps v) - grad_theta(x)) / eps.
// Exposed so the estimator can be checked against closed forms directly.
std::vector<double> mixed_directional_fd(
    const std::function<std::vector<double>(const Tensor&)>& grad_theta_at, const Tensor& x,
    const Tensor& v, double eps);

TrainResult train_clean(Network init, const LabeledDataset& data, const TrainConfig& cfg);

// SGD on J + delta * Upsilon with the sensitivity prefactor frozen at the
// previous epoch's parameters (updated each epoch end).
TrainResult train_regularized(Network init, const LabeledDataset& data, const TrainConfig& cfg);

// SGD on single-step distributional perturbations of each batch (budget
// delta, batch treated as its own empirical measure), sensitivity snapshot
// frozen per epoch.
TrainResult train_perturbed(Network init, const LabeledDataset& data, const TrainConfig& cfg);

TrainResult train(Network init, const LabeledDataset& data, const TrainConfig& cfg);

}  // namespace wdro
