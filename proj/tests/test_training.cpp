#include <cmath>
#include <cstring>
#include <numeric>
#include <vector>

#include "doctest.h"

#include "wdro/attack.hpp"
#include "wdro/data.hpp"
#include "wdro/dataset.hpp"
#include "wdro/errors.hpp"
#include "wdro/losses.hpp"
#include "wdro/model.hpp"
#include "wdro/rng.hpp"
#include "wdro/sensitivity.hpp"
#include "wdro/tensor.hpp"
#include "wdro/training.hpp"
#include "wdro/transport.hpp"

using namespace wdro;

namespace {

LabeledDataset blobs(int count, std::uint64_t seed, double separation = 6.0) {
  DatasetSpec spec;
  spec.kind = GeneratorKind::gaussian_blobs;
  spec.n = 2;
  spec.m = 2;
  spec.count = count;
  spec.seed = seed;
  spec.separation = separation;
  return generate(spec);
}

TrainConfig base_config(TrainMethod method, double delta, std::uint64_t seed) {
  TrainConfig cfg;
  cfg.method = method;
  cfg.threat = ThreatModel{Norm::linf, Norm::linf, delta};
  cfg.lr = 0.4;
  cfg.epochs = 10;
  cfg.batch_size = 16;
  cfg.seed = seed;
  return cfg;
}

bool params_same_bits(const Network& a, const Network& b) {
  const std::vector<double> pa = flatten_params(a);
  const std::vector<double> pb = flatten_params(b);
  if (pa.size() != pb.size()) return false;
  for (std::size_t k = 0; k < pa.size(); ++k) {
    if (std::memcmp(&pa[k], &pb[k], sizeof(double)) != 0) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("clean training separates the blobs") {
  LabeledDataset data = blobs(80, 41);
  Network init = make_network({2, 8, 2}, Activation::relu, 41);
  TrainResult res = train_clean(init, data, base_config(TrainMethod::clean, 0.0, 41));
  CHECK(clean_accuracy(res.net, data) >= 0.95);
  CHECK(res.epoch_mean_loss.size() == 10);
  CHECK(res.epoch_mean_loss.back() < res.epoch_mean_loss.front());
  CHECK(res.epoch_upsilon.empty());
}

TEST_CASE("zero epochs leave the parameters untouched") {
  LabeledDataset data = blobs(40, 42);
  Network init = make_network({2, 4, 2}, Activation::tanh_act, 42);
  TrainConfig cfg = base_config(TrainMethod::clean, 0.0, 42);
  cfg.epochs = 0;
  TrainResult res = train_clean(init, data, cfg);
  CHECK(params_same_bits(res.net, init));
  CHECK(res.epoch_mean_loss.empty());
}

TEST_CASE("fixed seed reproduces the trained weights bit for bit") {
  LabeledDataset data = blobs(60, 43);
  for (TrainMethod method :
       {TrainMethod::clean, TrainMethod::regularized, TrainMethod::perturbed}) {
    Network init = make_network({2, 6, 2}, Activation::relu, 43);
    TrainConfig cfg = base_config(method, 0.1, 43);
    cfg.epochs = 4;
    TrainResult a = train(init, data, cfg);
    TrainResult b = train(init, data, cfg);
    CHECK(params_same_bits(a.net, b.net));
    CHECK(a.epoch_mean_loss == b.epoch_mean_loss);
    CHECK(a.epoch_upsilon == b.epoch_upsilon);
  }
}

TEST_CASE("zero budget collapses both robust methods to clean sgd") {
  LabeledDataset data = blobs(50, 44);
  Network init = make_network({2, 5, 2}, Activation::tanh_act, 44);
  TrainConfig cfg = base_config(TrainMethod::clean, 0.0, 44);
  cfg.epochs = 6;
  TrainResult clean = train_clean(init, data, cfg);
  TrainResult reg = train_regularized(init, data, cfg);
  TrainResult pert = train_perturbed(init, data, cfg);
  CHECK(params_same_bits(clean.net, reg.net));
  CHECK(params_same_bits(clean.net, pert.net));
  CHECK(clean.epoch_mean_loss == reg.epoch_mean_loss);
  CHECK(clean.epoch_mean_loss == pert.epoch_mean_loss);
  CHECK(reg.epoch_upsilon.empty());
  CHECK(pert.epoch_upsilon.empty());
}

TEST_CASE("mixed directional derivative matches the quadratic closed form") {
  // J(theta, x) = (theta . x)^2 gives grad_theta J = 2 (theta . x) x whose
  // derivative along v is 2 (theta . v) x + 2 (theta . x) v
  const std::vector<double> theta{0.7, -0.3, 0.2};
  const Tensor x = Tensor::vector({0.4, 0.1, 0.9});
  const Tensor v = Tensor::vector({0.5, -0.2, 0.3});

  auto grad_theta_at = [&](const Tensor& point) {
    double dot = 0.0;
    for (std::size_t k = 0; k < theta.size(); ++k) dot += theta[k] * point[k];
    std::vector<double> g(theta.size());
    for (std::size_t k = 0; k < g.size(); ++k) g[k] = 2.0 * dot * point[k];
    return g;
  };

  const std::vector<double> fd = mixed_directional_fd(grad_theta_at, x, v, 1e-4);
  double tx = 0.0, tv = 0.0;
  for (std::size_t k = 0; k < theta.size(); ++k) {
    tx += theta[k] * x[k];
    tv += theta[k] * v[k];
  }
  for (std::size_t k = 0; k < fd.size(); ++k) {
    const double analytic = 2.0 * tv * x[k] + 2.0 * tx * v[k];
    CHECK(std::fabs(fd[k] - analytic) / std::max(1.0, std::fabs(analytic)) <= 1e-3);
  }
  CHECK_THROWS_AS(mixed_directional_fd(grad_theta_at, x, v, 0.0), ValidationError);
}

TEST_CASE("sensitivity gradient vanishes when the loss ignores the input") {
  // zero weights make the logits constant in x, so Upsilon and its gradient
  // are both zero
  Network net = make_network({2, 2}, Activation::identity, 0);
  for (Layer& layer : net.layers)
    for (std::size_t k = 0; k < layer.w.numel(); ++k) layer.w[k] = 0.0;
  LabeledDataset batch;
  batch.n = 2;
  batch.m = 2;
  batch.samples.push_back({Tensor::vector({0.3, 0.7}), 1});
  const ThreatModel threat{Norm::l2, Norm::l2, 0.1};
  const std::vector<double> g = grad_theta_upsilon(net, LossKind::ce, batch, threat, 1e-4, 0.0);
  for (double v : g) CHECK(v == 0.0);
}

TEST_CASE("regularizer contribution is linear in the budget") {
  LabeledDataset data = blobs(30, 45);
  Network net = make_network({2, 4, 2}, Activation::tanh_act, 45);
  const ThreatModel threat{Norm::l2, Norm::l2, 0.1};
  const double upsilon = sensitivity(net, LossKind::ce, data, threat).upsilon;
  REQUIRE(upsilon > 0.0);
  const std::vector<double> g =
      grad_theta_upsilon(net, LossKind::ce, data, threat, 1e-4, upsilon);
  double norm = 0.0;
  for (double v : g) norm += v * v;
  CHECK(norm > 0.0);
  const double delta = 0.07;
  for (double v : g) CHECK((2.0 * delta) * v == 2.0 * (delta * v));
}

TEST_CASE("perturbed training at p r infinity is fgsm adversarial training") {
  // one epoch, one batch: replay the shuffle, displace by delta sign steps,
  // and take the same sgd step by hand
  LabeledDataset data = blobs(20, 46);
  Network init = make_network({2, 4, 2}, Activation::tanh_act, 46);
  TrainConfig cfg = base_config(TrainMethod::perturbed, 0.08, 46);
  cfg.epochs = 1;
  cfg.batch_size = static_cast<int>(data.size());
  TrainResult res = train_perturbed(init, data, cfg);

  auto rng = make_rng(cfg.seed, "training.shuffle");
  std::vector<std::size_t> index(data.size());
  std::iota(index.begin(), index.end(), 0);
  shuffle(index, rng);

  LabeledDataset batch;
  batch.n = data.n;
  batch.m = data.m;
  for (std::size_t idx : index) batch.samples.push_back(data.samples[idx]);

  LabeledDataset stepped = batch;
  for (Sample& s : stepped.samples) {
    const Tensor g = input_grad(init, cfg.loss, s.x, s.y);
    bool any = false;
    for (std::size_t k = 0; k < g.numel(); ++k) any = any || g[k] != 0.0;
    if (!any) continue;
    for (std::size_t k = 0; k < s.x.numel(); ++k)
      s.x[k] += cfg.threat.delta * (g[k] > 0.0 ? 1.0 : (g[k] < 0.0 ? -1.0 : 0.0)) * 1.0;
  }
  LabeledDataset perturbed = project_ball(batch, stepped, cfg.threat, Coupling::identity);

  std::vector<double> params = flatten_params(init);
  std::vector<double> grad(params.size(), 0.0);
  for (const Sample& s : perturbed.samples) {
    const ParamGradResult pg = loss_with_param_grad(init, cfg.loss, s.x, s.y);
    for (std::size_t j = 0; j < grad.size(); ++j) grad[j] += pg.grad[j];
  }
  const double inv = 1.0 / static_cast<double>(perturbed.samples.size());
  for (std::size_t j = 0; j < params.size(); ++j) params[j] -= cfg.lr * (grad[j] * inv);

  Network expected = init;
  assign_params(expected, params);
  CHECK(params_same_bits(res.net, expected));
}

TEST_CASE("regularized training shrinks the sensitivity") {
  // moderate overlap keeps clean-trained gradients alive, so the penalty
  // has something to shrink
  LabeledDataset data = blobs(60, 47, 2.5);
  Network init = make_network({2, 8, 2}, Activation::tanh_act, 47);
  const ThreatModel threat{Norm::l2, Norm::l2, 0.3};

  TrainConfig cfg = base_config(TrainMethod::clean, 0.0, 47);
  cfg.epochs = 12;
  TrainResult clean = train_clean(init, data, cfg);

  TrainConfig reg_cfg = cfg;
  reg_cfg.threat = threat;
  TrainResult reg = train_regularized(init, data, reg_cfg);

  const double ups_clean = sensitivity(clean.net, LossKind::ce, data, threat).upsilon;
  const double ups_reg = sensitivity(reg.net, LossKind::ce, data, threat).upsilon;
  CHECK(ups_reg < ups_clean);
  CHECK(reg.epoch_upsilon.size() == static_cast<std::size_t>(reg_cfg.epochs));
  for (double u : reg.epoch_upsilon) CHECK(u >= 0.0);
}

TEST_CASE("perturbed training improves adversarial accuracy on the blobs") {
  // extra noise dimensions let the clean boundary tilt into non-robust
  // directions, which the hardened run straightens out
  DatasetSpec spec;
  spec.kind = GeneratorKind::gaussian_blobs;
  spec.n = 4;
  spec.m = 2;
  spec.count = 80;
  spec.seed = 103;
  spec.separation = 2.5;
  LabeledDataset data = generate(spec);
  Network init = make_network({4, 8, 2}, Activation::relu, 3);
  const double delta = 0.15;

  TrainConfig cfg = base_config(TrainMethod::clean, 0.0, 3);
  cfg.lr = 0.5;
  cfg.epochs = 60;
  TrainResult clean = train_clean(init, data, cfg);
  TrainConfig adv_cfg = cfg;
  adv_cfg.method = TrainMethod::perturbed;
  adv_cfg.threat = ThreatModel{Norm::linf, Norm::linf, delta};
  TrainResult hardened = train_perturbed(init, data, adv_cfg);

  AttackConfig atk;
  atk.threat = ThreatModel{Norm::linf, Norm::linf, delta};
  atk.loss = LossKind::ce;
  atk.steps = 20;
  const double a_clean = wpgd(clean.net, data, atk).final_adv_accuracy;
  const double a_hard = wpgd(hardened.net, data, atk).final_adv_accuracy;
  CHECK(a_hard >= a_clean - 0.01);
  CHECK(a_hard > a_clean);
}

TEST_CASE("degenerate snapshot sensitivity is flagged and training continues") {
  LabeledDataset data = blobs(30, 49);
  Network init = make_network({2, 2}, Activation::identity, 49);
  for (Layer& layer : init.layers)
    for (std::size_t k = 0; k < layer.w.numel(); ++k) layer.w[k] = 0.0;
  TrainConfig cfg = base_config(TrainMethod::regularized, 0.1, 49);
  cfg.epochs = 3;
  TrainResult res = train_regularized(init, data, cfg);
  CHECK(res.upsilon_degenerate);
  CHECK(res.epoch_upsilon.front() == 0.0);
  CHECK(!params_same_bits(res.net, init));  // the clean part of the step still runs
}

TEST_CASE("divergent training aborts with a degeneracy error") {
  // a step this size overflows the logits within a couple of batches
  LabeledDataset data = blobs(30, 50);
  Network init = make_network({2, 4, 2}, Activation::tanh_act, 50);
  TrainConfig cfg = base_config(TrainMethod::clean, 0.0, 50);
  cfg.lr = 1e308;
  cfg.epochs = 4;
  CHECK_THROWS_AS(train_clean(init, data, cfg), DegeneracyError);
}

TEST_CASE("training configs are validated") {
  LabeledDataset data = blobs(20, 51);
  Network init = make_network({2, 2}, Activation::identity, 51);
  TrainConfig good = base_config(TrainMethod::clean, 0.0, 51);
  good.batch_size = 10;
  CHECK_NOTHROW(train(init, data, good));

  TrainConfig bad = good;
  bad.lr = 0.0;
  CHECK_THROWS_AS(train(init, data, bad), ValidationError);
  bad = good;
  bad.epochs = -1;
  CHECK_THROWS_AS(train(init, data, bad), ValidationError);
  bad = good;
  bad.batch_size = 0;
  CHECK_THROWS_AS(train(init, data, bad), ValidationError);
  bad = good;
  bad.batch_size = 21;
  CHECK_THROWS_AS(train(init, data, bad), ValidationError);
  bad = good;
  bad.fd_epsilon = 0.0;
  CHECK_THROWS_AS(train(init, data, bad), ValidationError);

  Network wrong_dim = make_network({3, 2}, Activation::identity, 51);
  CHECK_THROWS_AS(train(wrong_dim, data, good), ValidationError);

  CHECK(train_method_from_name("perturbed") == TrainMethod::perturbed);
  CHECK(train_method_name(TrainMethod::regularized) == std::string("regularized"));
  CHECK_THROWS_AS(train_method_from_name("trades"), ValidationError);
}
