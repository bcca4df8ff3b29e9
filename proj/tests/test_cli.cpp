#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <sys/wait.h>

#include "doctest.h"
#include "json.hpp"

#include "wdro/data.hpp"
#include "wdro/dataset.hpp"

using json = nlohmann::json;

namespace {

const std::string& work_dir() {
  static const std::string dir = [] {
    std::string d = "/tmp/wdro_cli_tests";
    std::filesystem::create_directories(d);
    return d;
  }();
  return dir;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spit(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

struct CliRun {
  int code = -1;
  std::string raw;
  json out;  // parsed stdout when it is JSON
};

CliRun run_cli(const std::string& args) {
  const std::string out_path = work_dir() + "/stdout.txt";
  const std::string err_path = work_dir() + "/stderr.txt";
  const std::string cmd =
      std::string(WDRO_BIN_PATH) + " " + args + " >" + out_path + " 2>" + err_path;
  const int rc = std::system(cmd.c_str());
  CliRun r;
  r.code = WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
  r.raw = slurp(out_path);
  if (!r.raw.empty() && (r.raw[0] == '{' || r.raw[0] == '[')) {
    r.out = json::parse(r.raw, nullptr, false);
  }
  return r;
}

// shared pipeline artifacts, built once
struct Pipeline {
  std::string data_csv;
  std::string model_json;
};

const Pipeline& pipeline() {
  static const Pipeline p = [] {
    Pipeline out;
    out.data_csv = work_dir() + "/train.csv";
    out.model_json = work_dir() + "/model.json";
    CliRun gen = run_cli("gen --kind gaussian-blobs --n 2 --m 2 --N 60 --seed 3 --separation 3 "
                         "--out " + out.data_csv);
    REQUIRE(gen.code == 0);
    CliRun train = run_cli("train --data " + out.data_csv +
                           " --method clean --epochs 8 --lr 0.5 --batch 15 --seed 3 "
                           "--hidden 8 --out " + out.model_json);
    REQUIRE(train.code == 0);
    return out;
  }();
  return p;
}

}  // namespace

TEST_CASE("cli pipeline runs and reports are well formed") {
  const Pipeline& p = pipeline();

  CliRun gen = run_cli("gen --kind gaussian-blobs --n 2 --m 2 --N 60 --seed 3 --separation 3 "
                       "--out " + work_dir() + "/again.csv");
  REQUIRE(gen.code == 0);
  CHECK(gen.out["subcommand"] == "gen");
  CHECK(gen.out["status"] == "ok");
  CHECK(gen.out["outputs"]["count"] == 60);
  CHECK(gen.out["outputs"]["data"]["content_hash"].get<std::string>().rfind("fnv1a64:", 0) == 0);
  CHECK(gen.out["config"].contains("kind"));
  CHECK(gen.out["config"].contains("separation"));
  CHECK(gen.out.contains("threads"));
  CHECK(gen.out.contains("timings_ms"));

  CliRun train = run_cli("train --data " + p.data_csv +
                         " --method clean --epochs 8 --lr 0.5 --batch 15 --seed 3 "
                         "--hidden 8 --out " + work_dir() + "/model_again.json");
  REQUIRE(train.code == 0);
  CHECK(train.out["outputs"]["final_clean_accuracy"].get<double>() >= 0.9);
  CHECK(train.out["outputs"]["param_count"].get<int>() == 2 * 8 + 8 + 8 * 2 + 2);
}

TEST_CASE("cli attack respects the budget and writes usable artifacts") {
  const Pipeline& p = pipeline();
  const std::string report_path = work_dir() + "/attack.json";
  const std::string adv_path = work_dir() + "/adv.csv";
  CliRun atk = run_cli("attack --model " + p.model_json + " --data " + p.data_csv +
                       " --p inf --r inf --delta 0.05 --loss ce --steps 10 --seed 1 --out " +
                       report_path + " --adv-out " + adv_path);
  REQUIRE(atk.code == 0);
  const double clean = atk.out["outputs"]["clean_accuracy"].get<double>();
  const double adv = atk.out["outputs"]["final_adv_accuracy"].get<double>();
  CHECK(adv <= clean);
  CHECK(atk.out["outputs"]["achieved_distance"].get<double>() <= 0.05 + 1e-9);

  // the report file carries the same JSON that went to stdout
  CHECK(json::parse(slurp(report_path)) == atk.out);

  // the adversarial dataset is a valid CSV within the pointwise budget
  wdro::LabeledDataset orig = wdro::load_csv(p.data_csv);
  wdro::LabeledDataset adv_data = wdro::load_csv(adv_path);
  REQUIRE(adv_data.size() == orig.size());
  for (std::size_t i = 0; i < orig.size(); ++i) {
    CHECK(adv_data.samples[i].y == orig.samples[i].y);
    for (std::size_t k = 0; k < orig.samples[i].x.numel(); ++k) {
      CHECK(std::fabs(adv_data.samples[i].x[k] - orig.samples[i].x[k]) <= 0.05 + 1e-9);
    }
  }
}

TEST_CASE("cli certify output satisfies the bound ordering") {
  const Pipeline& p = pipeline();
  CliRun cert = run_cli("certify --model " + p.model_json + " --data " + p.data_csv +
                        " --p 2 --r 2 --delta 0.05 --loss ce --out " + work_dir() +
                        "/certify.json");
  REQUIRE(cert.code == 0);
  const json& out = cert.out["outputs"];
  const double a = out["A"].get<double>();
  CHECK(a > 0.0);
  CHECK(a < 1.0);
  CHECK(out["R_lower"].get<double>() <= out["R"].get<double>() + 0.02);
  CHECK(out["R"].get<double>() <= out["R_upper"].get<double>() + 1e-9);
  const double tower = a * out["C0"].get<double>() + (1.0 - a) * out["W0"].get<double>();
  CHECK(std::fabs(out["V0"].get<double>() - tower) <= 1e-9);
  CHECK(out["threat"]["p"] == "2");
  CHECK(cert.out["config"]["K"].get<double>() == 1.0);
}

TEST_CASE("cli reports are bit reproducible modulo timings") {
  const Pipeline& p = pipeline();
  const std::string args = "certify --model " + p.model_json + " --data " + p.data_csv +
                           " --p 2 --r 2 --delta 0.04 --loss ce";
  CliRun first = run_cli(args);
  CliRun second = run_cli(args);
  REQUIRE(first.code == 0);
  REQUIRE(second.code == 0);
  json a = first.out;
  json b = second.out;
  a.erase("timings_ms");
  b.erase("timings_ms");
  CHECK(a.dump() == b.dump());
}

TEST_CASE("cli oos-bound emits three guarantees") {
  const Pipeline& p = pipeline();
  CliRun oos = run_cli("oos-bound --model " + p.model_json + " --data " + p.data_csv +
                       " --p 2 --r 2 --delta 0.05 --loss ce --K 1 --epsilon 0.1");
  REQUIRE(oos.code == 0);
  const json& out = oos.out["outputs"];
  REQUIRE(out["guarantees"].size() == 3);
  for (const json& rec : out["guarantees"]) {
    CHECK(rec["caveat"] == "asymptotic, first-order");
    const double prob = rec["probability"].get<double>();
    CHECK(prob >= 0.0);
    CHECK(prob <= 1.0);
    CHECK(rec["failure_bound"].get<double>() >= 0.0);
    CHECK(rec["failure_bound"].get<double>() <= 1.0);
  }
  CHECK(out["epsilon"].get<double>() == 0.1);
  CHECK(out["lipschitz"].get<double>() > 0.0);
  CHECK(out["certify"]["A"].get<double>() > 0.0);
}

TEST_CASE("cli gradcheck passes on its default corpus") {
  CliRun gc = run_cli("gradcheck --seed 7 --count 6");
  REQUIRE(gc.code == 0);
  const json& out = gc.out["outputs"];
  CHECK(out["pass"] == true);
  CHECK(out["max_rel_error"].get<double>() <= out["tolerance"].get<double>());
  CHECK(out["probes"].get<long long>() > 0);
}

TEST_CASE("cli validation failures exit with code one") {
  const Pipeline& p = pipeline();
  CHECK(run_cli("gen --bogus 3 --out " + work_dir() + "/x.csv").code == 1);
  CHECK(run_cli("gen --kind gaussian-blobs --n 2 --m 2 --N 10 --seed 1").code == 1);  // no --out
  CHECK(run_cli("attack --model " + p.model_json + " --data " + p.data_csv +
                " --p 3 --r 2 --delta 0.1").code == 1);
  CHECK(run_cli("certify --model " + work_dir() + "/missing.json --data " + p.data_csv +
                " --p 2 --r 2 --delta 0.1").code == 1);

  const std::string bad_csv = work_dir() + "/bad.csv";
  spit(bad_csv, "label,f0\n1,2.5\n");
  CHECK(run_cli("train --data " + bad_csv + " --method clean --epochs 1 --batch 1 --out " +
                work_dir() + "/bad_model.json").code == 1);

  CHECK(run_cli("certify --model " + p.model_json + " --data " + p.data_csv +
                " --p 2 --r 2 --delta -0.5").code == 1);
}

TEST_CASE("cli numeric degeneracies exit with code two") {
  const Pipeline& p = pipeline();
  const std::string flat_model = work_dir() + "/flat.json";
  spit(flat_model,
       "{\"n\":2,\"m\":2,\"layers\":[{\"in\":2,\"out\":2,\"activation\":\"identity\","
       "\"w\":[[0.0,0.0],[0.0,0.0]],\"b\":[0.0,0.0]}]}");
  CliRun cert = run_cli("certify --model " + flat_model + " --data " + p.data_csv +
                        " --p 2 --r 2 --delta 0.1");
  CHECK(cert.code == 2);
}
