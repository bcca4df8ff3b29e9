#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "doctest.h"

#include "wdro/dataset.hpp"
#include "wdro/errors.hpp"
#include "wdro/model.hpp"
#include "wdro/rng.hpp"
#include "wdro/tensor.hpp"

using namespace wdro;

namespace {

Network identity_head(int m) {
  // one identity layer with w = I, b = 0 on top of nothing: logits = x
  Network net;
  net.input_dim = m;
  net.num_classes = m;
  Layer layer;
  layer.spec = {m, m, Activation::identity};
  Tensor w = Tensor::zeros({static_cast<std::size_t>(m), static_cast<std::size_t>(m)});
  for (int i = 0; i < m; ++i) w.at(static_cast<std::size_t>(i), static_cast<std::size_t>(i)) = 1.0;
  layer.w = w;
  layer.b = Tensor::zeros({static_cast<std::size_t>(m)});
  net.layers.push_back(layer);
  return net;
}

std::string temp_path(const char* name) {
  return std::string("wdro_test_") + name;
}

}  // namespace

TEST_CASE("identity network forwards its input") {
  Network net = identity_head(3);
  validate_network(net);
  Tensor z = forward(net, Tensor::vector({0.2, 0.9, 0.1}));
  CHECK(z[0] == 0.2);
  CHECK(z[1] == 0.9);
  CHECK(z[2] == 0.1);
}

TEST_CASE("relu hidden layer matches the hand computation") {
  // hidden: w = [[1,0],[0,-1]], b = (0,1), relu; top: identity passthrough
  Network net;
  net.input_dim = 2;
  net.num_classes = 2;
  Layer hidden;
  hidden.spec = {2, 2, Activation::relu};
  hidden.w = Tensor::matrix(2, 2, {1.0, 0.0, 0.0, -1.0});
  hidden.b = Tensor::vector({0.0, 1.0});
  Layer top;
  top.spec = {2, 2, Activation::identity};
  top.w = Tensor::matrix(2, 2, {1.0, 0.0, 0.0, 1.0});
  top.b = Tensor::vector({0.0, 0.0});
  net.layers = {hidden, top};
  validate_network(net);

  Tensor z = forward(net, Tensor::vector({0.5, 0.5}));
  CHECK(z[0] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(z[1] == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("set S needs a strict unique argmax at the label") {
  CHECK(logits_in_set_s(Tensor::vector({3.0, 1.0, 0.0}), 1));
  CHECK(!logits_in_set_s(Tensor::vector({2.0, 2.0, 0.0}), 1));
  CHECK(!logits_in_set_s(Tensor::vector({1.0, 3.0, 0.0}), 1));
  CHECK(logits_in_set_s(Tensor::vector({1.0, 3.0, 0.0}), 2));
}

TEST_CASE("clean accuracy is the mean of indicators") {
  Network net = identity_head(2);
  LabeledDataset data;
  data.n = 2;
  data.m = 2;
  // logits are the features, so y=1 wants f0 > f1
  data.samples.push_back({Tensor::vector({0.9, 0.1}), 1});
  data.samples.push_back({Tensor::vector({0.8, 0.2}), 1});
  data.samples.push_back({Tensor::vector({0.2, 0.7}), 2});
  data.samples.push_back({Tensor::vector({0.6, 0.4}), 2});  // miss
  CHECK(clean_accuracy(net, data) == doctest::Approx(0.75).epsilon(1e-15));

  for (Sample& s : data.samples) s.y = 3 - s.y;  // flip every label
  CHECK(clean_accuracy(net, data) == doctest::Approx(0.25).epsilon(1e-15));
}

TEST_CASE("model json round-trip reproduces logits bit-exactly") {
  Network net = make_network({3, 5, 4}, Activation::relu, 99);
  const std::string text = model_to_json(net);
  Network back = model_from_json(text);

  std::mt19937_64 rng = make_rng(4, "test.model.roundtrip");
  for (int trial = 0; trial < 10; ++trial) {
    Tensor x = Tensor::zeros({3});
    for (std::size_t i = 0; i < 3; ++i) x[i] = uniform01(rng);
    CHECK(same_bits(forward(net, x), forward(back, x)));
  }
}

TEST_CASE("model file io round-trips through disk") {
  const std::string path = temp_path("model_io.json");
  Network net = make_network({2, 6, 3}, Activation::tanh_act, 123);
  save_model(path, net);
  Network back = load_model(path);
  CHECK(same_bits(forward(net, Tensor::vector({0.25, 0.75})),
                  forward(back, Tensor::vector({0.25, 0.75}))));
  std::remove(path.c_str());
}

TEST_CASE("hand-written single-layer file loads and evaluates") {
  const std::string path = temp_path("hand_model.json");
  {
    std::ofstream out(path);
    out << R"({"n":2,"m":2,"layers":[{"in":2,"out":2,"activation":"identity",)"
        << R"("w":[[1,0],[0,-1]],"b":[0,1]}]})";
  }
  Network net = load_model(path);
  Tensor z = forward(net, Tensor::vector({0.5, 0.5}));
  CHECK(z[0] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(z[1] == doctest::Approx(0.5).epsilon(1e-15));
  std::remove(path.c_str());
}

TEST_CASE("mismatched dimensions in a model file are rejected") {
  CHECK_THROWS_AS(
      model_from_json(R"({"n":3,"m":2,"layers":[{"in":2,"out":2,"activation":"identity",)"
                      R"("w":[[1,0],[0,1]],"b":[0,0]}]})"),
      ValidationError);
  CHECK_THROWS_AS(
      model_from_json(R"({"n":2,"m":2,"layers":[{"in":2,"out":2,"activation":"identity",)"
                      R"("w":[[1,0],[0,1]],"b":[0]}]})"),
      ValidationError);
  CHECK_THROWS_AS(model_from_json("not json at all"), ValidationError);
}

TEST_CASE("network validation enforces the layer chain") {
  Network net = make_network({2, 4, 3}, Activation::relu, 1);
  net.layers[0].spec.out = 5;  // breaks the chain against layer 1
  CHECK_THROWS_AS(validate_network(net), ValidationError);

  Network last = make_network({2, 4, 3}, Activation::relu, 1);
  last.layers.back().spec.activation = Activation::relu;  // logits must be raw
  CHECK_THROWS_AS(validate_network(last), ValidationError);
}

TEST_CASE("initialization is seeded, bounded and zero-biased") {
  Network a = make_network({4, 8, 8, 3}, Activation::relu, 7);
  Network b = make_network({4, 8, 8, 3}, Activation::relu, 7);
  Network c = make_network({4, 8, 8, 3}, Activation::relu, 8);
  CHECK(flatten_params(a) == flatten_params(b));
  CHECK(flatten_params(a) != flatten_params(c));

  for (const Layer& layer : a.layers) {
    const double bound = std::sqrt(6.0 / (layer.spec.in + layer.spec.out));
    for (double w : layer.w.values) CHECK(std::fabs(w) <= bound);
    for (double bias : layer.b.values) CHECK(bias == 0.0);
  }
}

TEST_CASE("flatten and assign round-trip the parameters") {
  Network net = make_network({3, 7, 4}, Activation::tanh_act, 21);
  std::vector<double> flat = flatten_params(net);
  CHECK(flat.size() == net.param_count());

  std::vector<double> shifted = flat;
  for (double& v : shifted) v += 0.25;
  Network other = net;
  assign_params(other, shifted);
  std::vector<double> back = flatten_params(other);
  CHECK(back == shifted);

  assign_params(other, flat);
  CHECK(same_bits(forward(net, Tensor::vector({0.1, 0.5, 0.9})),
                  forward(other, Tensor::vector({0.1, 0.5, 0.9}))));
}
