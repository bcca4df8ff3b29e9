// wdro: command-line front end for the W-DRO robustness library.
//
// Subcommands: gen, train, attack, certify, oos-bound, gradcheck. Every run
// prints a RunReport JSON to stdout: the resolved config (flags + defaults),
// content hashes of the input files, the module outputs, and timings. Report
// subcommands also write the report to --out. Exit codes: 0 ok, 1 validation
// failure, 2 numeric degeneracy.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "wdro/attack.hpp"
#include "wdro/data.hpp"
#include "wdro/errors.hpp"
#include "wdro/losses.hpp"
#include "wdro/model.hpp"
#include "wdro/parallel.hpp"
#include "wdro/rng.hpp"
#include "wdro/robustness.hpp"
#include "wdro/sensitivity.hpp"
#include "wdro/training.hpp"
#include "wdro/transport.hpp"

namespace {

using json = nlohmann::ordered_json;
using namespace wdro;

double elapsed_ms(std::chrono::steady_clock::time_point start) {
  const auto d = std::chrono::steady_clock::now() - start;
  return std::chrono::duration<double, std::milli>(d).count();
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hash_tag(const std::string& bytes) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "fnv1a64:%016llx",
                static_cast<unsigned long long>(fnv1a64(bytes)));
  return buf;
}

json file_stamp(const std::string& path) {
  return json{{"path", path}, {"content_hash", hash_tag(read_file(path))}};
}

ThreatModel make_threat(const std::string& p, const std::string& r, double delta) {
  ThreatModel t;
  t.p = norm_from_name(p);
  t.r = norm_from_name(r);
  t.delta = delta;
  validate_threat(t);
  return t;
}

json threat_json(const ThreatModel& t) {
  return json{{"p", norm_name(t.p)}, {"r", norm_name(t.r)}, {"delta", t.delta}};
}

json report_json(const RobustnessReport& rep) {
  json j;
  j["A"] = rep.A;
  j["A_delta"] = rep.A_delta;
  j["R"] = rep.R;
  j["R_upper"] = rep.R_upper;
  j["R_lower_tilde"] = rep.R_lower_tilde;
  j["R_lower_bar"] = rep.R_lower_bar;
  j["R_lower"] = rep.R_lower;
  j["V0"] = rep.V0;
  j["C0"] = rep.C0;
  j["W0"] = rep.W0;
  j["Upsilon"] = rep.Upsilon;
  j["V_delta_n"] = rep.V_delta_n;
  j["delta"] = rep.delta;
  j["threat"] = threat_json(rep.threat);
  j["loss"] = loss_name(rep.loss);
  return j;
}

// What a run hands back to main: module outputs, input stamps, exit code.
struct RunOutcome {
  json inputs = json::object();
  json outputs = json::object();
  int exit_code = 0;
};

// ---------------------------------------------------------------- gen ----

struct GenArgs {
  std::string kind = "gaussian-blobs";
  int n = 2;
  int m = 2;
  int count = 200;
  std::uint64_t seed = 0;
  double separation = 4.0;
  std::string out;
};

json gen_config(const GenArgs& a) {
  return json{{"kind", a.kind},      {"n", a.n},
              {"m", a.m},            {"N", a.count},
              {"seed", a.seed},      {"separation", a.separation},
              {"out", a.out}};
}

RunOutcome run_gen(const GenArgs& a) {
  DatasetSpec spec;
  spec.kind = generator_from_name(a.kind);
  spec.n = a.n;
  spec.m = a.m;
  spec.count = a.count;
  spec.seed = a.seed;
  spec.separation = a.separation;
  const LabeledDataset data = generate(spec);
  save_csv(a.out, data);

  std::vector<int> class_counts(static_cast<std::size_t>(data.m), 0);
  for (const Sample& s : data.samples) ++class_counts[static_cast<std::size_t>(s.y - 1)];

  RunOutcome res;
  res.outputs["data"] = file_stamp(a.out);
  res.outputs["n"] = data.n;
  res.outputs["m"] = data.m;
  res.outputs["count"] = data.samples.size();
  res.outputs["class_counts"] = class_counts;
  return res;
}

// -------------------------------------------------------------- train ----

struct TrainArgs {
  std::string data;
  std::string method = "clean";
  std::string p = "inf";
  std::string r = "inf";
  double delta = 0.0;
  std::string loss = "ce";
  double lr = 0.1;
  int epochs = 10;
  int batch = 32;
  double fd_epsilon = 1e-4;
  std::uint64_t seed = 0;
  std::string hidden = "16";
  std::string activation = "relu";
  std::string out;
};

std::vector<int> parse_hidden(const std::string& text) {
  std::vector<int> widths;
  if (text.empty() || text == "none") return widths;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      const int w = std::stoi(item, &used);
      if (used != item.size() || w <= 0) throw std::invalid_argument(item);
      widths.push_back(w);
    } catch (const std::exception&) {
      throw ValidationError("bad hidden layer width: '" + item + "'");
    }
  }
  return widths;
}

json train_config(const TrainArgs& a) {
  return json{{"data", a.data},
              {"method", a.method},
              {"p", a.p},
              {"r", a.r},
              {"delta", a.delta},
              {"loss", a.loss},
              {"lr", a.lr},
              {"epochs", a.epochs},
              {"batch", a.batch},
              {"fd-epsilon", a.fd_epsilon},
              {"seed", a.seed},
              {"hidden", a.hidden},
              {"activation", a.activation},
              {"out", a.out}};
}

RunOutcome run_train(const TrainArgs& a) {
  const LabeledDataset data = load_csv(a.data);

  std::vector<int> dims = {data.n};
  for (int w : parse_hidden(a.hidden)) dims.push_back(w);
  dims.push_back(data.m);
  Network init = make_network(dims, activation_from_name(a.activation), a.seed);

  TrainConfig cfg;
  cfg.method = train_method_from_name(a.method);
  cfg.threat = make_threat(a.p, a.r, a.delta);
  cfg.loss = loss_from_name(a.loss);
  cfg.lr = a.lr;
  cfg.epochs = a.epochs;
  cfg.batch_size = a.batch;
  cfg.fd_epsilon = a.fd_epsilon;
  cfg.seed = a.seed;

  const TrainResult result = train(std::move(init), data, cfg);
  save_model(a.out, result.net);

  RunOutcome res;
  res.inputs["data"] = file_stamp(a.data);
  res.outputs["model"] = file_stamp(a.out);
  res.outputs["epoch_mean_loss"] = result.epoch_mean_loss;
  res.outputs["epoch_upsilon"] = result.epoch_upsilon;
  res.outputs["upsilon_degenerate"] = result.upsilon_degenerate;
  res.outputs["final_clean_accuracy"] = clean_accuracy(result.net, data);
  res.outputs["param_count"] = result.net.param_count();
  if (result.upsilon_degenerate) res.exit_code = 2;
  return res;
}

// ------------------------------------------------------------- attack ----

struct AttackArgs {
  std::string model;
  std::string data;
  std::string p = "inf";
  std::string r = "inf";
  double delta = 0.0;
  std::string loss = "ce";
  int steps = 50;
  double ratio = 2.5;
  std::uint64_t seed = 0;
  int restarts = 0;
  std::string algo = "wpgd";
  std::string upsilon_source = "iterate";
  std::string coupling = "identity";
  bool sphere = false;
  std::string out;
  std::string adv_out;
};

json attack_config(const AttackArgs& a) {
  return json{{"model", a.model},
              {"data", a.data},
              {"p", a.p},
              {"r", a.r},
              {"delta", a.delta},
              {"loss", a.loss},
              {"steps", a.steps},
              {"ratio", a.ratio},
              {"seed", a.seed},
              {"restarts", a.restarts},
              {"algo", a.algo},
              {"upsilon-source", a.upsilon_source},
              {"coupling", a.coupling},
              {"sphere", a.sphere},
              {"out", a.out},
              {"adv-out", a.adv_out}};
}

RunOutcome run_attack(const AttackArgs& a) {
  const Network net = load_model(a.model);
  const LabeledDataset data = load_csv(a.data);

  AttackConfig cfg;
  cfg.threat = make_threat(a.p, a.r, a.delta);
  cfg.loss = loss_from_name(a.loss);
  cfg.steps = a.steps;
  cfg.ratio = a.ratio;
  cfg.seed = a.seed;
  cfg.restarts = a.restarts;
  cfg.project_to_sphere = a.sphere;
  cfg.upsilon_source =
      a.upsilon_source == "clean" ? UpsilonSource::clean : UpsilonSource::iterate;
  cfg.coupling = a.coupling == "exact" ? Coupling::exact : Coupling::identity;

  AttackResult result;
  if (a.algo == "wfgsm") {
    result = wfgsm(net, data, cfg);
  } else if (a.algo == "pgd") {
    result = classic_pgd(net, data, cfg);
  } else {
    result = wpgd(net, data, cfg);
  }

  RunOutcome res;
  res.inputs["model"] = file_stamp(a.model);
  res.inputs["data"] = file_stamp(a.data);
  res.outputs["clean_accuracy"] = clean_accuracy(net, data);
  res.outputs["final_adv_accuracy"] = result.final_adv_accuracy;
  res.outputs["achieved_distance"] = result.achieved_distance;
  res.outputs["best_iteration"] = result.best_iteration;
  res.outputs["best_restart"] = result.best_restart;
  res.outputs["degenerate_upsilon"] = result.degenerate_upsilon;
  res.outputs["accuracy_trajectory"] = result.accuracy_trajectory;
  res.outputs["loss_trajectory"] = result.loss_trajectory;
  if (!a.adv_out.empty()) {
    save_csv(a.adv_out, result.adversarial);
    res.outputs["adversarial_data"] = file_stamp(a.adv_out);
  }
  if (result.degenerate_upsilon) res.exit_code = 2;
  return res;
}

// ------------------------------------------------------------ certify ----

struct CertifyArgs {
  std::string model;
  std::string data;
  std::string p = "inf";
  std::string r = "inf";
  double delta = 0.0;
  std::string loss = "ce";
  double K = 1.0;
  int steps = 50;
  std::uint64_t seed = 0;
  std::string out;
};

json certify_config(const CertifyArgs& a) {
  return json{{"model", a.model}, {"data", a.data},   {"p", a.p},
              {"r", a.r},         {"delta", a.delta}, {"loss", a.loss},
              {"K", a.K},         {"steps", a.steps}, {"seed", a.seed},
              {"out", a.out}};
}

RunOutcome run_certify(const CertifyArgs& a) {
  const Network net = load_model(a.model);
  const LabeledDataset data = load_csv(a.data);
  const ThreatModel threat = make_threat(a.p, a.r, a.delta);
  const RobustnessReport rep =
      certify(net, data, threat, loss_from_name(a.loss), a.steps, a.seed);

  RunOutcome res;
  res.inputs["model"] = file_stamp(a.model);
  res.inputs["data"] = file_stamp(a.data);
  res.outputs = report_json(rep);
  return res;
}

// ---------------------------------------------------------- oos-bound ----

struct OosArgs {
  std::string model;
  std::string data;
  std::string test_data;
  std::string p = "2";
  std::string r = "2";
  double delta = 0.0;
  std::string loss = "ce";
  double K = 1.0;
  double epsilon = -1.0;    // < 0 means "use delta"
  double lipschitz = -1.0;  // < 0 means "estimate from the data"
  int steps = 50;
  std::uint64_t seed = 0;
  std::string out;
};

json oos_config(const OosArgs& a) {
  return json{{"model", a.model},
              {"data", a.data},
              {"test-data", a.test_data},
              {"p", a.p},
              {"r", a.r},
              {"delta", a.delta},
              {"loss", a.loss},
              {"K", a.K},
              {"epsilon", a.epsilon},
              {"lipschitz", a.lipschitz},
              {"steps", a.steps},
              {"seed", a.seed},
              {"out", a.out}};
}

RunOutcome run_oos(const OosArgs& a) {
  const Network net = load_model(a.model);
  const LabeledDataset data = load_csv(a.data);
  const ThreatModel threat = make_threat(a.p, a.r, a.delta);
  if (threat.p == Norm::linf)
    std::fprintf(stderr,
                 "warning: concentration rates assume p < inf; the emitted "
                 "bounds are not covered by the W_inf theory\n");

  const LossKind kind = loss_from_name(a.loss);
  const RobustnessReport rep = certify(net, data, threat, kind, a.steps, a.seed);

  const double lip = a.lipschitz >= 0.0
                         ? a.lipschitz
                         : estimate_lipschitz(net, kind, data, threat.s());
  const double eps = a.epsilon >= 0.0 ? a.epsilon : a.delta;

  std::size_t m_count = data.samples.size();
  RunOutcome res;
  res.inputs["model"] = file_stamp(a.model);
  res.inputs["data"] = file_stamp(a.data);
  if (!a.test_data.empty()) {
    const LabeledDataset test = load_csv(a.test_data);
    m_count = test.samples.size();
    res.inputs["test_data"] = file_stamp(a.test_data);
  }

  OosInputs in;
  in.a_hat = rep.A;
  in.v0 = rep.V0;
  in.c0 = rep.C0;
  in.w0 = rep.W0;
  in.upsilon = rep.Upsilon;
  in.v_delta_hat = rep.V_delta_n;
  in.lipschitz = lip;
  in.delta = a.delta;

  ConcentrationParams params;
  params.K = a.K;
  params.n = data.n;
  params.N = data.samples.size();
  params.M = m_count;
  params.epsilon = eps;
  params.delta = a.delta;

  const std::vector<GuaranteeRecord> records = oos_guarantees(in, params);

  res.outputs["certify"] = report_json(rep);
  res.outputs["lipschitz"] = lip;
  res.outputs["epsilon"] = eps;
  res.outputs["concentration"] =
      json{{"K", params.K}, {"n", params.n}, {"N", params.N}, {"M", params.M}};
  json recs = json::array();
  for (const GuaranteeRecord& rec : records)
    recs.push_back(json{{"name", rec.name},
                        {"value", rec.value},
                        {"failure_bound", rec.failure_bound},
                        {"probability", rec.probability},
                        {"caveat", rec.caveat}});
  res.outputs["guarantees"] = recs;
  return res;
}

// ---------------------------------------------------------- gradcheck ----

struct GradcheckArgs {
  std::uint64_t seed = 7;
  int count = 100;
  double tolerance = 1e-4;
  std::string out;
};

json gradcheck_config(const GradcheckArgs& a) {
  return json{
      {"seed", a.seed}, {"count", a.count}, {"tolerance", a.tolerance}, {"out", a.out}};
}

// Branch signature of the probe point: relu on/off pattern plus the DLR
// order-statistic indices and clip state. A finite-difference probe is only
// meaningful when both endpoints share the signature (the loss is smooth on
// the segment); kink-crossing probes are skipped, not scored.
std::string probe_signature(const Network& net, LossKind kind, const Tensor& x, int y) {
  std::string sig;
  Tensor cur = x;
  for (const Layer& layer : net.layers) {
    Tensor next = Tensor::zeros({static_cast<std::size_t>(layer.spec.out)});
    for (int o = 0; o < layer.spec.out; ++o) {
      double acc = layer.b[static_cast<std::size_t>(o)];
      for (int i = 0; i < layer.spec.in; ++i)
        acc += layer.w.at(static_cast<std::size_t>(o), static_cast<std::size_t>(i)) *
               cur[static_cast<std::size_t>(i)];
      if (layer.spec.activation == Activation::relu) {
        sig += acc > 0.0 ? '1' : '0';
        next[static_cast<std::size_t>(o)] = acc > 0.0 ? acc : 0.0;
      } else if (layer.spec.activation == Activation::tanh_act) {
        next[static_cast<std::size_t>(o)] = std::tanh(acc);
      } else {
        next[static_cast<std::size_t>(o)] = acc;
      }
    }
    cur = next;
  }
  if (kind == LossKind::dlr || kind == LossKind::redlr) {
    std::vector<std::size_t> order(cur.numel());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t lhs, std::size_t rhs) {
      if (cur[lhs] != cur[rhs]) return cur[lhs] > cur[rhs];
      return lhs < rhs;
    });
    sig += '|';
    for (int k = 0; k < 3; ++k) sig += static_cast<char>('a' + order[static_cast<std::size_t>(k)]);
    sig += logits_in_set_s(cur, y) ? 'c' : 'w';
    sig += (cur[order[0]] - cur[order[2]] < 1e-12) ? 't' : 'f';
    if (kind == LossKind::redlr) sig += dlr(cur, y) < 0.0 ? 'n' : 'p';
  }
  return sig;
}

RunOutcome run_gradcheck(const GradcheckArgs& a) {
  if (a.count < 1) throw ValidationError("gradcheck: count must be positive");
  std::mt19937_64 rng = make_rng(a.seed, "gradcheck");
  const double h = 1e-5;
  double max_err = 0.0;
  long probes = 0;
  long skipped = 0;

  const auto score = [&](double ad, double fd) {
    const double denom = std::max({1.0, std::fabs(ad), std::fabs(fd)});
    max_err = std::max(max_err, std::fabs(ad - fd) / denom);
    ++probes;
  };

  for (int case_i = 0; case_i < a.count; ++case_i) {
    const int n = 2 + static_cast<int>(uniform_index(rng, 5));
    const int m = 3 + static_cast<int>(uniform_index(rng, 3));
    const int hidden_layers = static_cast<int>(uniform_index(rng, 3));
    std::vector<LayerSpec> specs;
    int prev = n;
    for (int l = 0; l < hidden_layers; ++l) {
      const int width = 2 + static_cast<int>(uniform_index(rng, 7));
      const Activation act =
          uniform01(rng) < 0.5 ? Activation::relu : Activation::tanh_act;
      specs.push_back({prev, width, act});
      prev = width;
    }
    specs.push_back({prev, m, Activation::identity});
    const Network net =
        init_network(n, specs, derive_seed(a.seed, "gradcheck.net") + static_cast<std::uint64_t>(case_i));

    Tensor x = Tensor::zeros({static_cast<std::size_t>(n)});
    for (int i = 0; i < n; ++i) x[static_cast<std::size_t>(i)] = uniform_in(rng, 0.05, 0.95);
    const int y = 1 + static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(m)));

    for (const LossKind kind : {LossKind::ce, LossKind::dlr, LossKind::redlr}) {
      const FullGradResult grads = loss_with_all_grads(net, kind, x, y);

      for (int i = 0; i < n; ++i) {
        Tensor xp = x;
        Tensor xm = x;
        xp[static_cast<std::size_t>(i)] += h;
        xm[static_cast<std::size_t>(i)] -= h;
        if (probe_signature(net, kind, xp, y) != probe_signature(net, kind, xm, y)) {
          ++skipped;
          continue;
        }
        const double fd = (loss_value(net, kind, xp, y) - loss_value(net, kind, xm, y)) / (2 * h);
        score(grads.grad_x[static_cast<std::size_t>(i)], fd);
      }

      const std::vector<double> flat = flatten_params(net);
      for (std::size_t j = 0; j < flat.size(); ++j) {
        Network np = net;
        Network nm = net;
        std::vector<double> fp = flat;
        std::vector<double> fm = flat;
        fp[j] += h;
        fm[j] -= h;
        assign_params(np, fp);
        assign_params(nm, fm);
        if (probe_signature(np, kind, x, y) != probe_signature(nm, kind, x, y)) {
          ++skipped;
          continue;
        }
        const double fd = (loss_value(np, kind, x, y) - loss_value(nm, kind, x, y)) / (2 * h);
        score(grads.grad_theta[j], fd);
      }
    }
  }

  const bool pass = max_err <= a.tolerance;
  RunOutcome res;
  res.outputs["cases"] = a.count;
  res.outputs["probes"] = probes;
  res.outputs["skipped_probes"] = skipped;
  res.outputs["max_rel_error"] = max_err;
  res.outputs["tolerance"] = a.tolerance;
  res.outputs["pass"] = pass;
  if (!pass) res.exit_code = 1;
  return res;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Wasserstein distributional robustness toolkit"};
  app.require_subcommand(1);

  GenArgs gen_args;
  CLI::App* gen_cmd = app.add_subcommand("gen", "generate a synthetic labeled dataset");
  gen_cmd->add_option("--kind", gen_args.kind, "generator")
      ->check(CLI::IsMember({"gaussian-blobs", "concentric-rings", "xor-grid"}))
      ->capture_default_str();
  gen_cmd->add_option("--n", gen_args.n, "feature dimension")->capture_default_str();
  gen_cmd->add_option("--m", gen_args.m, "number of classes")->capture_default_str();
  gen_cmd->add_option("--N", gen_args.count, "sample count")->capture_default_str();
  gen_cmd->add_option("--seed", gen_args.seed, "rng seed")->capture_default_str();
  gen_cmd->add_option("--separation", gen_args.separation, "class separation in noise units")
      ->capture_default_str();
  gen_cmd->add_option("--out", gen_args.out, "output CSV path")->required();

  TrainArgs train_args;
  CLI::App* train_cmd = app.add_subcommand("train", "train a feedforward classifier");
  train_cmd->add_option("--data", train_args.data, "training CSV")->required();
  train_cmd->add_option("--method", train_args.method, "training method")
      ->check(CLI::IsMember({"clean", "regularized", "perturbed"}))
      ->capture_default_str();
  train_cmd->add_option("--p", train_args.p, "transport norm index")
      ->check(CLI::IsMember({"2", "inf"}))
      ->capture_default_str();
  train_cmd->add_option("--r", train_args.r, "feature norm index")
      ->check(CLI::IsMember({"2", "inf"}))
      ->capture_default_str();
  train_cmd->add_option("--delta", train_args.delta, "adversarial budget")->capture_default_str();
  train_cmd->add_option("--loss", train_args.loss, "training loss")
      ->check(CLI::IsMember({"ce", "dlr", "redlr"}))
      ->capture_default_str();
  train_cmd->add_option("--lr", train_args.lr, "learning rate")->capture_default_str();
  train_cmd->add_option("--epochs", train_args.epochs, "epochs")->capture_default_str();
  train_cmd->add_option("--batch", train_args.batch, "batch size")->capture_default_str();
  train_cmd->add_option("--fd-epsilon", train_args.fd_epsilon, "mixed-derivative probe step")
      ->capture_default_str();
  train_cmd->add_option("--seed", train_args.seed, "rng seed")->capture_default_str();
  train_cmd->add_option("--hidden", train_args.hidden, "hidden widths, comma separated")
      ->capture_default_str();
  train_cmd->add_option("--activation", train_args.activation, "hidden activation")
      ->check(CLI::IsMember({"relu", "tanh"}))
      ->capture_default_str();
  train_cmd->add_option("--out", train_args.out, "output model JSON path")->required();

  AttackArgs attack_args;
  CLI::App* attack_cmd = app.add_subcommand("attack", "run a distributional attack");
  attack_cmd->add_option("--model", attack_args.model, "model JSON")->required();
  attack_cmd->add_option("--data", attack_args.data, "data CSV")->required();
  attack_cmd->add_option("--p", attack_args.p, "transport norm index")
      ->check(CLI::IsMember({"2", "inf"}))
      ->capture_default_str();
  attack_cmd->add_option("--r", attack_args.r, "feature norm index")
      ->check(CLI::IsMember({"2", "inf"}))
      ->capture_default_str();
  attack_cmd->add_option("--delta", attack_args.delta, "adversarial budget")->required();
  attack_cmd->add_option("--loss", attack_args.loss, "attack loss")
      ->check(CLI::IsMember({"ce", "dlr", "redlr"}))
      ->capture_default_str();
  attack_cmd->add_option("--steps", attack_args.steps, "iterations")->capture_default_str();
  attack_cmd->add_option("--ratio", attack_args.ratio, "step size ratio, alpha = ratio*delta/steps")
      ->capture_default_str();
  attack_cmd->add_option("--seed", attack_args.seed, "rng seed")->capture_default_str();
  attack_cmd->add_option("--restarts", attack_args.restarts, "extra random-start runs")
      ->capture_default_str();
  attack_cmd->add_option("--algo", attack_args.algo, "attack algorithm")
      ->check(CLI::IsMember({"wpgd", "wfgsm", "pgd"}))
      ->capture_default_str();
  attack_cmd->add_option("--upsilon-source", attack_args.upsilon_source,
                         "iterates feeding the per-step sensitivity")
      ->check(CLI::IsMember({"iterate", "clean"}))
      ->capture_default_str();
  attack_cmd->add_option("--coupling", attack_args.coupling, "projection coupling")
      ->check(CLI::IsMember({"identity", "exact"}))
      ->capture_default_str();
  attack_cmd->add_flag("--sphere", attack_args.sphere, "project onto the sphere, not the ball");
  attack_cmd->add_option("--out", attack_args.out, "report JSON path");
  attack_cmd->add_option("--adv-out", attack_args.adv_out, "adversarial dataset CSV path");

  CertifyArgs certify_args;
  CLI::App* certify_cmd = app.add_subcommand("certify", "robustness bounds for a model");
  certify_cmd->add_option("--model", certify_args.model, "model JSON")->required();
  certify_cmd->add_option("--data", certify_args.data, "data CSV")->required();
  certify_cmd->add_option("--p", certify_args.p, "transport norm index")
      ->check(CLI::IsMember({"2", "inf"}))
      ->capture_default_str();
  certify_cmd->add_option("--r", certify_args.r, "feature norm index")
      ->check(CLI::IsMember({"2", "inf"}))
      ->capture_default_str();
  certify_cmd->add_option("--delta", certify_args.delta, "adversarial budget")->required();
  certify_cmd->add_option("--loss", certify_args.loss, "certification loss")
      ->check(CLI::IsMember({"ce", "dlr", "redlr"}))
      ->capture_default_str();
  certify_cmd->add_option("--K", certify_args.K, "concentration constant (used by oos-bound)")
      ->capture_default_str();
  certify_cmd->add_option("--steps", certify_args.steps, "reference attack iterations")
      ->capture_default_str();
  certify_cmd->add_option("--seed", certify_args.seed, "rng seed")->capture_default_str();
  certify_cmd->add_option("--out", certify_args.out, "report JSON path");

  OosArgs oos_args;
  CLI::App* oos_cmd = app.add_subcommand("oos-bound", "out-of-sample guarantee records");
  oos_cmd->add_option("--model", oos_args.model, "model JSON")->required();
  oos_cmd->add_option("--data", oos_args.data, "training data CSV")->required();
  oos_cmd->add_option("--test-data", oos_args.test_data, "held-out CSV (sets M)");
  oos_cmd->add_option("--p", oos_args.p, "transport norm index")
      ->check(CLI::IsMember({"2", "inf"}))
      ->capture_default_str();
  oos_cmd->add_option("--r", oos_args.r, "feature norm index")
      ->check(CLI::IsMember({"2", "inf"}))
      ->capture_default_str();
  oos_cmd->add_option("--delta", oos_args.delta, "adversarial budget")->required();
  oos_cmd->add_option("--loss", oos_args.loss, "loss")
      ->check(CLI::IsMember({"ce", "dlr", "redlr"}))
      ->capture_default_str();
  oos_cmd->add_option("--K", oos_args.K, "concentration constant")->capture_default_str();
  oos_cmd->add_option("--epsilon", oos_args.epsilon, "concentration radius (default: delta)")
      ->capture_default_str();
  oos_cmd->add_option("--lipschitz", oos_args.lipschitz,
                      "Lipschitz estimate (default: max dual gradient norm on the data)")
      ->capture_default_str();
  oos_cmd->add_option("--steps", oos_args.steps, "reference attack iterations")
      ->capture_default_str();
  oos_cmd->add_option("--seed", oos_args.seed, "rng seed")->capture_default_str();
  oos_cmd->add_option("--out", oos_args.out, "report JSON path");

  GradcheckArgs gradcheck_args;
  CLI::App* gradcheck_cmd =
      app.add_subcommand("gradcheck", "finite-difference audit of the gradients");
  gradcheck_cmd->add_option("--seed", gradcheck_args.seed, "rng seed")->capture_default_str();
  gradcheck_cmd->add_option("--count", gradcheck_args.count, "number of random networks")
      ->capture_default_str();
  gradcheck_cmd->add_option("--tolerance", gradcheck_args.tolerance, "max relative error allowed")
      ->capture_default_str();
  gradcheck_cmd->add_option("--out", gradcheck_args.out, "report JSON path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  const auto start = std::chrono::steady_clock::now();
  std::string name;
  json config;
  std::string report_path;
  RunOutcome outcome;
  try {
    if (gen_cmd->parsed()) {
      name = "gen";
      config = gen_config(gen_args);
      outcome = run_gen(gen_args);
    } else if (train_cmd->parsed()) {
      name = "train";
      config = train_config(train_args);
      outcome = run_train(train_args);
    } else if (attack_cmd->parsed()) {
      name = "attack";
      config = attack_config(attack_args);
      report_path = attack_args.out;
      outcome = run_attack(attack_args);
    } else if (certify_cmd->parsed()) {
      name = "certify";
      config = certify_config(certify_args);
      report_path = certify_args.out;
      outcome = run_certify(certify_args);
    } else if (oos_cmd->parsed()) {
      name = "oos-bound";
      config = oos_config(oos_args);
      report_path = oos_args.out;
      outcome = run_oos(oos_args);
    } else if (gradcheck_cmd->parsed()) {
      name = "gradcheck";
      config = gradcheck_config(gradcheck_args);
      report_path = gradcheck_args.out;
      outcome = run_gradcheck(gradcheck_args);
    }
  } catch (const DegeneracyError& e) {
    std::fprintf(stderr, "degeneracy: %s\n", e.what());
    return 2;
  } catch (const ValidationError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }

  json report;
  report["subcommand"] = name;
  report["config"] = config;
  report["threads"] = thread_budget();
  report["inputs"] = outcome.inputs;
  report["outputs"] = outcome.outputs;
  report["status"] = outcome.exit_code == 2 ? "degenerate" : "ok";
  report["timings_ms"] = json{{"total", elapsed_ms(start)}};

  const std::string text = report.dump(2);
  std::fputs(text.c_str(), stdout);
  std::fputc('\n', stdout);
  if (!report_path.empty()) {
    std::ofstream out(report_path, std::ios::binary);
    if (!out) {
      std::fprintf(stderr, "error: cannot write report: %s\n", report_path.c_str());
      return 1;
    }
    out << text << '\n';
  }
  return outcome.exit_code;
}
