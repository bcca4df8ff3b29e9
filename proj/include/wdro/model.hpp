#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "wdro/dataset.hpp"
#include "wdro/tensor.hpp"

namespace wdro {

enum class Activation { relu, tanh_act, identity };

const char* activation_name(Activation a);
Activation activation_from_name(const std::string& name);

struct LayerSpec {
  int in = 0;
  int out = 0;
  Activation activation = Activation::identity;
};

struct Layer {
  LayerSpec spec;
  Tensor w;  // [out, in], row-major
  Tensor b;  // [out]
};

// Feedforward classifier x in [0,1]^n -> logits in R^m. The final layer
// carries the identity activation; softmax lives inside the loss.
struct Network {
  int input_dim = 0;    // n
  int num_classes = 0;  // m, at least 2
  std::vector<Layer> layers;

  std::size_t param_count() const;
};

void validate_network(const Network& net);

// Weights uniform in [-a, a] with a = sqrt(6 / (in + out)), biases zero.
Network init_network(int input_dim, const std::vector<LayerSpec>& hidden_and_output,
                     std::uint64_t seed);

// Convenience builder: dims = {n, h1, ..., m}. Hidden layers get `hidden`
// activation, the last layer is identity.
Network make_network(const std::vector<int>& dims, Activation hidden, std::uint64_t seed);

// Logits for a single input. Inputs outside [0,1]^n are tolerated (attack
// iterates and finite-difference probes pass through here before clamping);
// the first occurrence prints a one-time note to stderr.
Tensor forward(const Network& net, const Tensor& x);

// Strict unique argmax of the logits equals y. Any tie for the top logit
// counts as a miss.
bool in_set_s(const Network& net, const Tensor& x, int y);
bool logits_in_set_s(const Tensor& logits, int y);

double clean_accuracy(const Network& net, const LabeledDataset& data);

// JSON round-trip:
// {"n":..., "m":..., "layers":[{"in":..., "out":..., "activation":...,
//  "w":[[...row...], ...], "b":[...]}]}
std::string model_to_json(const Network& net);
Network model_from_json(const std::string& text);
void save_model(const std::string& path, const Network& net);
Network load_model(const std::string& path);

// Flat parameter vector: layer by layer, w row-major then b.
std::vector<double> flatten_params(const Network& net);
void assign_params(Network& net, const std::vector<double>& flat);

}  // namespace wdro
