#include <cmath>
#include <vector>

#include "doctest.h"

#include "wdro/dataset.hpp"
#include "wdro/errors.hpp"
#include "wdro/losses.hpp"
#include "wdro/model.hpp"
#include "wdro/rng.hpp"
#include "wdro/tensor.hpp"
#include "wdro/transport.hpp"

using namespace wdro;

namespace {

Network linear_net(int n, int m, const std::vector<double>& w_rows) {
  Network net;
  net.input_dim = n;
  net.num_classes = m;
  Layer layer;
  layer.spec = {n, m, Activation::identity};
  layer.w = Tensor::matrix(static_cast<std::size_t>(m), static_cast<std::size_t>(n), w_rows);
  layer.b = Tensor::zeros({static_cast<std::size_t>(m)});
  net.layers.push_back(layer);
  return net;
}

Network identity_logits(int m) {
  std::vector<double> rows(static_cast<std::size_t>(m * m), 0.0);
  for (int i = 0; i < m; ++i) rows[static_cast<std::size_t>(i * m + i)] = 1.0;
  return linear_net(m, m, rows);
}

}  // namespace

TEST_CASE("cross entropy on uniform and skewed logits") {
  CHECK(ce(Tensor::vector({0.0, 0.0}), 1) == doctest::Approx(std::log(2.0)).epsilon(1e-14));
  // softmax(ln 3, 0) = (3/4, 1/4), so -log(3/4) = log(4/3)
  CHECK(ce(Tensor::vector({std::log(3.0), 0.0}), 1) ==
        doctest::Approx(std::log(4.0 / 3.0)).epsilon(1e-14));
}

TEST_CASE("cross entropy is invariant to shifting all logits") {
  const Tensor z = Tensor::vector({1.4, -2.2, 0.7});
  Tensor shifted = z;
  for (std::size_t i = 0; i < shifted.numel(); ++i) shifted[i] += 5.0;
  for (int y = 1; y <= 3; ++y) CHECK(std::fabs(ce(z, y) - ce(shifted, y)) <= 1e-12);
}

TEST_CASE("cross entropy stays finite and nonnegative on extreme logits") {
  // with the label logit dominant the exact value underflows to 0.0
  CHECK(std::isfinite(ce(Tensor::vector({1000.0, -1000.0, 0.0}), 2)));
  CHECK(ce(Tensor::vector({1000.0, -1000.0, 0.0}), 1) >= 0.0);
  CHECK(std::isfinite(ce(Tensor::vector({1000.0, -1000.0, 0.0}), 1)));
  CHECK(ce(Tensor::vector({30.0, -30.0}), 1) >= 0.0);
  CHECK(ce(Tensor::vector({-30.0, 30.0}), 1) > 50.0);
}

TEST_CASE("dlr evaluates both branches") {
  CHECK(dlr(Tensor::vector({3.0, 1.0, 0.0}), 1) == doctest::Approx(-2.0 / 3.0).epsilon(1e-14));
  CHECK(dlr(Tensor::vector({1.0, 3.0, 0.0}), 1) == doctest::Approx(2.0 / 3.0).epsilon(1e-14));
}

TEST_CASE("dlr degenerate logits return the inert zero") {
  CHECK(dlr(Tensor::vector({0.7, 0.7, 0.7}), 2) == 0.0);
  CHECK(dlr(Tensor::vector({-3.0, -3.0, -3.0}), 1) == 0.0);
}

TEST_CASE("redlr rectifies the misclassified branch") {
  CHECK(redlr(Tensor::vector({3.0, 1.0, 0.0}), 1) == doctest::Approx(-2.0 / 3.0).epsilon(1e-14));
  CHECK(redlr(Tensor::vector({1.0, 3.0, 0.0}), 1) == 0.0);
}

TEST_CASE("redlr is dlr clipped from above at zero") {
  std::mt19937_64 rng = make_rng(31, "test.losses.clip");
  for (int trial = 0; trial < 200; ++trial) {
    const int m = 3 + static_cast<int>(uniform_index(rng, 3));
    Tensor z = Tensor::zeros({static_cast<std::size_t>(m)});
    for (std::size_t i = 0; i < z.numel(); ++i) z[i] = uniform_in(rng, -2.0, 2.0);
    const int y = 1 + static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(m)));
    const double d = dlr(z, y);
    CHECK(d >= -1.0 - 1e-12);
    // the label logit can sink below the third order statistic once m > 3,
    // so the unit upper bound is a three-class fact only
    if (m == 3) CHECK(d <= 1.0 + 1e-12);
    CHECK(redlr(z, y) == doctest::Approx(std::min(d, 0.0)).epsilon(1e-14));
    CHECK(redlr(z, y) <= 0.0);
    CHECK(redlr(z, y) >= -1.0 - 1e-12);
  }
}

TEST_CASE("dlr sees z only through the label logit and the top three") {
  const Tensor z = Tensor::vector({5.0, 1.0, 4.0, 3.0, 0.5});
  // swap two coordinates that sit below the top three and are not the label
  const Tensor swapped = Tensor::vector({5.0, 0.5, 4.0, 3.0, 1.0});
  for (int y : {1, 3}) {
    CHECK(dlr(z, y) == dlr(swapped, y));
    CHECK(redlr(z, y) == redlr(swapped, y));
  }
  CHECK(dlr(z, 1) == doctest::Approx(-0.5).epsilon(1e-14));
}

TEST_CASE("identity network composes ce unchanged") {
  Network net = identity_logits(3);
  const Tensor x = Tensor::vector({0.2, 0.5, 0.3});
  for (int y = 1; y <= 3; ++y)
    CHECK(loss_value(net, LossKind::ce, x, y) == doctest::Approx(ce(x, y)).epsilon(1e-14));
}

TEST_CASE("input gradients match finite differences through a small net") {
  Network net = make_network({3, 6, 4}, Activation::tanh_act, 77);
  std::mt19937_64 rng = make_rng(78, "test.losses.fd");
  const double h = 1e-5;
  for (const LossKind kind : {LossKind::ce, LossKind::dlr, LossKind::redlr}) {
    for (int trial = 0; trial < 5; ++trial) {
      Tensor x = Tensor::zeros({3});
      for (std::size_t i = 0; i < 3; ++i) x[i] = uniform_in(rng, 0.1, 0.9);
      const int y = 1 + static_cast<int>(uniform_index(rng, 4));
      const Tensor grad = input_grad(net, kind, x, y);
      for (std::size_t i = 0; i < 3; ++i) {
        Tensor xp = x;
        Tensor xm = x;
        xp[i] += h;
        xm[i] -= h;
        const double fd = (loss_value(net, kind, xp, y) - loss_value(net, kind, xm, y)) / (2 * h);
        const double err =
            std::fabs(grad[i] - fd) / std::max({1.0, std::fabs(grad[i]), std::fabs(fd)});
        CHECK(err <= 1e-4);
      }
    }
  }
}

TEST_CASE("redlr gradient vanishes exactly on misclassified points") {
  Network net = identity_logits(3);
  // label 1 but the top logit is coordinate 2
  const Tensor x = Tensor::vector({0.1, 0.9, 0.2});
  CHECK(loss_value(net, LossKind::redlr, x, 1) == 0.0);
  const Tensor grad = input_grad(net, LossKind::redlr, x, 1);
  for (std::size_t i = 0; i < grad.numel(); ++i) CHECK(grad[i] == 0.0);
}

TEST_CASE("degenerate dlr logits carry a zero gradient") {
  Network net = identity_logits(3);
  const Tensor x = Tensor::vector({0.4, 0.4, 0.4});
  CHECK(loss_value(net, LossKind::dlr, x, 1) == 0.0);
  const Tensor grad = input_grad(net, LossKind::dlr, x, 1);
  for (std::size_t i = 0; i < grad.numel(); ++i) CHECK(grad[i] == 0.0);
}

TEST_CASE("lipschitz estimate is the euclidean norm on a crafted gradient") {
  // z = Wx with W = [[6,8],[0,0]]; at x = (0,0) softmax is uniform and the
  // ce input gradient is W^T (softmax - onehot(1)) = (-3, -4)
  Network net = linear_net(2, 2, {6.0, 8.0, 0.0, 0.0});
  LabeledDataset data;
  data.n = 2;
  data.m = 2;
  data.samples.push_back({Tensor::vector({0.0, 0.0}), 1});
  const double lhat = estimate_lipschitz(net, LossKind::ce, data, DualNorm::l2);
  CHECK(lhat == doctest::Approx(5.0).epsilon(1e-12));

  const Tensor grad = input_grad(net, LossKind::ce, Tensor::vector({0.0, 0.0}), 1);
  CHECK(grad[0] == doctest::Approx(-3.0).epsilon(1e-12));
  CHECK(grad[1] == doctest::Approx(-4.0).epsilon(1e-12));
}

TEST_CASE("lipschitz estimate of a constant net is zero") {
  Network net = linear_net(2, 2, {0.0, 0.0, 0.0, 0.0});
  LabeledDataset data;
  data.n = 2;
  data.m = 2;
  data.samples.push_back({Tensor::vector({0.3, 0.6}), 1});
  data.samples.push_back({Tensor::vector({0.8, 0.1}), 2});
  CHECK(estimate_lipschitz(net, LossKind::ce, data, DualNorm::l2) == 0.0);
}

TEST_CASE("lipschitz estimate of a union is the max of the parts") {
  Network net = make_network({2, 5, 3}, Activation::relu, 13);
  std::mt19937_64 rng = make_rng(14, "test.losses.union");
  LabeledDataset d1, d2, all;
  d1.n = d2.n = all.n = 2;
  d1.m = d2.m = all.m = 3;
  for (int i = 0; i < 6; ++i) {
    Sample s{Tensor::vector({uniform01(rng), uniform01(rng)}),
             1 + static_cast<int>(uniform_index(rng, 3))};
    (i < 3 ? d1 : d2).samples.push_back(s);
    all.samples.push_back(s);
  }
  const double lhat1 = estimate_lipschitz(net, LossKind::ce, d1, DualNorm::l1);
  const double lhat2 = estimate_lipschitz(net, LossKind::ce, d2, DualNorm::l1);
  const double lhat = estimate_lipschitz(net, LossKind::ce, all, DualNorm::l1);
  CHECK(lhat == doctest::Approx(std::max(lhat1, lhat2)).epsilon(1e-15));
}

TEST_CASE("loss names round-trip and reject junk") {
  CHECK(loss_from_name("ce") == LossKind::ce);
  CHECK(loss_from_name("dlr") == LossKind::dlr);
  CHECK(loss_from_name("redlr") == LossKind::redlr);
  CHECK(std::string(loss_name(LossKind::redlr)) == "redlr");
  CHECK_THROWS_AS(loss_from_name("hinge"), ValidationError);
}

TEST_CASE("dlr requires at least three classes") {
  CHECK_THROWS_AS(dlr(Tensor::vector({1.0, 0.0}), 1), ValidationError);
  CHECK_THROWS_AS(redlr(Tensor::vector({1.0, 0.0}), 1), ValidationError);
}
