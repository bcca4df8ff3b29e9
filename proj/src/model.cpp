#include "wdro/model.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "json.hpp"

#include "wdro/errors.hpp"
#include "wdro/rng.hpp"

namespace wdro {

using json = nlohmann::json;

const char* activation_name(Activation a) {
  switch (a) {
    case Activation::relu: return "relu";
    case Activation::tanh_act: return "tanh";
    case Activation::identity: return "identity";
  }
  return "identity";
}

Activation activation_from_name(const std::string& name) {
  if (name == "relu") return Activation::relu;
  if (name == "tanh") return Activation::tanh_act;
  if (name == "identity") return Activation::identity;
  throw ValidationError("model: unknown activation '" + name + "'");
}

std::size_t Network::param_count() const {
  std::size_t n = 0;
  for (const Layer& l : layers) n += l.w.numel() + l.b.numel();
  return n;
}

void validate_network(const Network& net) {
  if (net.layers.size() < 1) throw ValidationError("model: no layers");
  if (net.input_dim <= 0) throw ValidationError("model: input dimension must be positive");
  if (net.num_classes < 2) throw ValidationError("model: need at least two classes");
  int prev = net.input_dim;
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    const Layer& l = net.layers[i];
    if (l.spec.in != prev)
      throw ValidationError("model: layer " + std::to_string(i) + " expects in=" +
                            std::to_string(l.spec.in) + " but previous width is " +
                            std::to_string(prev));
    if (l.spec.out <= 0) throw ValidationError("model: layer width must be positive");
    if (l.w.shape != std::vector<std::size_t>{static_cast<std::size_t>(l.spec.out),
                                              static_cast<std::size_t>(l.spec.in)})
      throw ValidationError("model: layer " + std::to_string(i) + " weight shape " +
                            l.w.shape_str() + " mismatches spec");
    if (l.b.shape != std::vector<std::size_t>{static_cast<std::size_t>(l.spec.out)})
      throw ValidationError("model: layer " + std::to_string(i) + " bias shape mismatch");
    if (!l.w.all_finite() || !l.b.all_finite())
      throw ValidationError("model: layer " + std::to_string(i) + " has non-finite parameters");
    prev = l.spec.out;
  }
  if (prev != net.num_classes)
    throw ValidationError("model: final width " + std::to_string(prev) +
                          " does not equal class count " + std::to_string(net.num_classes));
  if (net.layers.back().spec.activation != Activation::identity)
    throw ValidationError("model: final layer must use the identity activation");
}

Network init_network(int input_dim, const std::vector<LayerSpec>& specs, std::uint64_t seed) {
  Network net;
  net.input_dim = input_dim;
  if (specs.empty()) throw ValidationError("model: no layer specs");
  net.num_classes = specs.back().out;
  auto rng = make_rng(seed, "model.init");
  for (const LayerSpec& spec : specs) {
    Layer l;
    l.spec = spec;
    const double a = std::sqrt(6.0 / (spec.in + spec.out));
    std::vector<double> w(static_cast<std::size_t>(spec.in) * static_cast<std::size_t>(spec.out));
    for (double& v : w) v = uniform_in(rng, -a, a);
    l.w = Tensor::matrix(static_cast<std::size_t>(spec.out), static_cast<std::size_t>(spec.in),
                         std::move(w));
    l.b = Tensor::zeros({static_cast<std::size_t>(spec.out)});
    net.layers.push_back(std::move(l));
  }
  validate_network(net);
  return net;
}

Network make_network(const std::vector<int>& dims, Activation hidden, std::uint64_t seed) {
  if (dims.size() < 2) throw ValidationError("model: need at least input and output widths");
  std::vector<LayerSpec> specs;
  for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
    LayerSpec s;
    s.in = dims[i];
    s.out = dims[i + 1];
    s.activation = (i + 2 < dims.size()) ? hidden : Activation::identity;
    specs.push_back(s);
  }
  return init_network(dims[0], specs, seed);
}

namespace {
std::atomic<bool> warned_box{false};

void note_box_violation(const Tensor& x) {
  for (double v : x.values) {
    if (v < 0.0 || v > 1.0) {
      if (!warned_box.exchange(true))
        std::fprintf(stderr,
                     "note: forward() saw an input outside [0,1]^n; expected transiently "
                     "during attacks and finite-difference probes\n");
      return;
    }
  }
}
}  // namespace

Tensor forward(const Network& net, const Tensor& x) {
  if (x.shape != std::vector<std::size_t>{static_cast<std::size_t>(net.input_dim)})
    throw ValidationError("forward: input shape " + x.shape_str() + ", expected {" +
                          std::to_string(net.input_dim) + "}");
  if (!x.all_finite()) throw ValidationError("forward: non-finite input");
  note_box_violation(x);

  Tensor cur = x;
  for (const Layer& l : net.layers) {
    const std::size_t rows = l.w.shape[0], cols = l.w.shape[1];
    Tensor next = Tensor::zeros({rows});
    for (std::size_t r = 0; r < rows; ++r) {
      double acc = l.b[r];
      for (std::size_t c = 0; c < cols; ++c) acc += l.w[r * cols + c] * cur[c];
      next[r] = acc;
    }
    switch (l.spec.activation) {
      case Activation::relu:
        for (double& v : next.values) v = v > 0.0 ? v : 0.0;
        break;
      case Activation::tanh_act:
        for (double& v : next.values) v = std::tanh(v);
        break;
      case Activation::identity:
        break;
    }
    cur = std::move(next);
  }
  if (!cur.all_finite()) throw ValidationError("forward: non-finite logits");
  return cur;
}

bool logits_in_set_s(const Tensor& logits, int y) {
  const std::size_t idx = static_cast<std::size_t>(y - 1);
  if (y < 1 || idx >= logits.numel()) return false;
  const double zy = logits[idx];
  for (std::size_t k = 0; k < logits.numel(); ++k) {
    if (k == idx) continue;
    if (!(logits[k] < zy)) return false;  // ties count as misclassified
  }
  return true;
}

bool in_set_s(const Network& net, const Tensor& x, int y) {
  return logits_in_set_s(forward(net, x), y);
}

double clean_accuracy(const Network& net, const LabeledDataset& data) {
  if (data.samples.empty()) throw ValidationError("clean_accuracy: empty dataset");
  std::size_t hits = 0;
  for (const Sample& s : data.samples)
    if (in_set_s(net, s.x, s.y)) ++hits;
  return static_cast<double>(hits) / static_cast<double>(data.samples.size());
}

std::string model_to_json(const Network& net) {
  validate_network(net);
  json j;
  j["n"] = net.input_dim;
  j["m"] = net.num_classes;
  j["layers"] = json::array();
  for (const Layer& l : net.layers) {
    json jl;
    jl["in"] = l.spec.in;
    jl["out"] = l.spec.out;
    jl["activation"] = activation_name(l.spec.activation);
    json rows = json::array();
    for (int r = 0; r < l.spec.out; ++r) {
      json row = json::array();
      for (int c = 0; c < l.spec.in; ++c)
        row.push_back(l.w[static_cast<std::size_t>(r) * static_cast<std::size_t>(l.spec.in) +
                          static_cast<std::size_t>(c)]);
      rows.push_back(std::move(row));
    }
    jl["w"] = std::move(rows);
    json bias = json::array();
    for (int r = 0; r < l.spec.out; ++r) bias.push_back(l.b[static_cast<std::size_t>(r)]);
    jl["b"] = std::move(bias);
    j["layers"].push_back(std::move(jl));
  }
  return j.dump(2);
}

Network model_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("model: invalid JSON: ") + e.what());
  }
  Network net;
  try {
    net.input_dim = j.at("n").get<int>();
    net.num_classes = j.at("m").get<int>();
    for (const json& jl : j.at("layers")) {
      Layer l;
      l.spec.in = jl.at("in").get<int>();
      l.spec.out = jl.at("out").get<int>();
      l.spec.activation = activation_from_name(jl.at("activation").get<std::string>());
      const json& rows = jl.at("w");
      if (!rows.is_array() || rows.size() != static_cast<std::size_t>(l.spec.out))
        throw ValidationError("model: weight row count mismatch");
      std::vector<double> w;
      w.reserve(static_cast<std::size_t>(l.spec.in) * static_cast<std::size_t>(l.spec.out));
      for (const json& row : rows) {
        if (!row.is_array() || row.size() != static_cast<std::size_t>(l.spec.in))
          throw ValidationError("model: weight row length mismatch");
        for (const json& v : row) w.push_back(v.get<double>());
      }
      l.w = Tensor::matrix(static_cast<std::size_t>(l.spec.out),
                           static_cast<std::size_t>(l.spec.in), std::move(w));
      const json& bias = jl.at("b");
      if (!bias.is_array() || bias.size() != static_cast<std::size_t>(l.spec.out))
        throw ValidationError("model: bias length mismatch");
      std::vector<double> b;
      for (const json& v : bias) b.push_back(v.get<double>());
      l.b = Tensor::vector(std::move(b));
      net.layers.push_back(std::move(l));
    }
  } catch (const json::exception& e) {
    throw ValidationError(std::string("model: malformed model file: ") + e.what());
  }
  validate_network(net);
  return net;
}

void save_model(const std::string& path, const Network& net) {
  std::ofstream out(path);
  if (!out) throw ValidationError("model: cannot write " + path);
  out << model_to_json(net) << "\n";
}

Network load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("model: cannot read " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return model_from_json(ss.str());
}

std::vector<double> flatten_params(const Network& net) {
  std::vector<double> flat;
  flat.reserve(net.param_count());
  for (const Layer& l : net.layers) {
    flat.insert(flat.end(), l.w.values.begin(), l.w.values.end());
    flat.insert(flat.end(), l.b.values.begin(), l.b.values.end());
  }
  return flat;
}

void assign_params(Network& net, const std::vector<double>& flat) {
  if (flat.size() != net.param_count())
    throw ValidationError("model: parameter vector length mismatch");
  std::size_t k = 0;
  for (Layer& l : net.layers) {
    for (double& v : l.w.values) v = flat[k++];
    for (double& v : l.b.values) v = flat[k++];
  }
}

}  // namespace wdro
