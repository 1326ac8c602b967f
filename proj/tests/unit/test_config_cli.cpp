#include <sys/wait.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "dabs/config.hpp"
#include "dabs/error.hpp"
#include "testing.hpp"

#ifndef DABS_CLI_PATH
#error "DABS_CLI_PATH must point at the dabs executable"
#endif

using namespace dabs;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json read_json(const fs::path& p) { return json::parse(slurp(p)); }

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("dabs_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

struct Run {
  int code = 0;
  std::string err;
};

// Runs the tool with stdout discarded and stderr captured.
Run dabs_cli(const fs::path& dir, const std::string& args) {
  const fs::path err = dir / "stderr.txt";
  const std::string cmd =
      std::string("\"") + DABS_CLI_PATH + "\" " + args + " > /dev/null 2> \"" + err.string() + "\"";
  const int status = std::system(cmd.c_str());
  Run r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.err = slurp(err);
  return r;
}

// A model small enough that a CLI training run takes about a second.
void write_small_config(const fs::path& path) {
  json j;
  j["model"]["encoder"] = {{"d", 16}, {"layers", 3}, {"heads", 2}, {"ffn_mult", 2}};
  j["model"]["dora"] = {{"k", 3}};
  j["model"]["acbs"] = {{"heads", 2}};
  j["train"] = {{"epochs", 2}, {"batch_size", 16}};
  j["generate"] = {{"n_sentences", 120}};
  j["workload"] = {{"duration", 0.2}};
  j["bench"] = {{"m_values", {1, 2}}, {"warmup", 1}, {"iterations", 3}};
  j["probes"] = {{"rand2l_trials", 3}};
  std::ofstream(path) << j.dump(2);
}

}  // namespace

TEST_SUITE("config") {

TEST_CASE("run configuration round trips through JSON") {
  RunConfig c;
  c.seed = 77;
  c.out = "somewhere";
  c.model.encoder.d = 24;
  c.model.dora.k = 3;
  c.model.dora.layer_order = LayerOrder::kShuffled;
  c.model.acbs.tau_alpha = 0.5;
  c.model.architecture = Architecture::kDoraOnly;
  c.train.epochs = 7;
  c.train.loss.lambda_m = 0.25;
  c.train.loss.mask_l1 = true;
  c.data.test_fraction = 0.3;
  c.generate.m_probs = {0.6, 0.4};
  c.workload.arrival = Arrival::kDeterministic;
  c.bench.m_values = {2, 4};
  c.probes.k_values = {3, 6};
  const json j = run_to_json(c);
  RunConfig back;
  run_from_json(j, back);
  CHECK(run_to_json(back) == j);
  CHECK(back.model.dora.layer_order == LayerOrder::kShuffled);
  CHECK(back.train.loss.mask_l1);
  CHECK(back.bench.m_values == std::vector<std::size_t>{2, 4});
}

TEST_CASE("absent keys keep their defaults") {
  RunConfig c;
  run_from_json(json{{"train", {{"epochs", 3}}}}, c);
  CHECK(c.train.epochs == 3);
  CHECK(c.train.batch_size == 32);
  CHECK(c.model.dora.k == 6);
}

TEST_CASE("unknown keys and mistyped values are rejected") {
  RunConfig c;
  CHECK_THROWS_AS(run_from_json(json{{"bogus", 1}}, c), ConfigError);
  CHECK_THROWS_AS(run_from_json(json{{"model", {{"dora", {{"kk", 3}}}}}}, c), ConfigError);
  CHECK_THROWS_AS(run_from_json(json{{"train", {{"epochs", "many"}}}}, c), ConfigError);
  CHECK_THROWS_AS(run_from_json(json{{"model", {{"architecture", "huge"}}}}, c), ConfigError);

  const fs::path dir = scratch("config");
  std::ofstream(dir / "bad.json") << R"({"seed": 1, "bogus": true})";
  try {
    load_run_config((dir / "bad.json").string());
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("bogus") != std::string::npos);
  }
  std::ofstream(dir / "broken.json") << "{ not json";
  CHECK_THROWS_AS(load_run_config((dir / "broken.json").string()), InputError);
  CHECK_THROWS_AS(load_run_config((dir / "missing.json").string()), InputError);
}

}  // TEST_SUITE

TEST_SUITE("cli") {

TEST_CASE("generate, train and eval agree on the best test metric") {
  const fs::path dir = scratch("pipeline");
  write_small_config(dir / "cfg.json");
  const std::string cfg = "--config \"" + (dir / "cfg.json").string() + "\" ";
  REQUIRE(dabs_cli(dir, cfg + "--seed 3 --out \"" + (dir / "gen").string() + "\" generate").code == 0);
  const fs::path corpus = dir / "gen" / "corpus.jsonl";
  CHECK(fs::exists(dir / "gen" / "manifest.json"));

  REQUIRE(dabs_cli(dir, cfg + "--out \"" + (dir / "stats").string() + "\" stats --data \"" +
                            corpus.string() + "\"").code == 0);
  CHECK(read_json(dir / "stats" / "stats.json")["sentences"] == 120);

  const fs::path model = dir / "model";
  REQUIRE(dabs_cli(dir, cfg + "--seed 3 --out \"" + model.string() + "\" train --data \"" +
                            corpus.string() + "\"").code == 0);
  for (const char* f : {"model.dabs", "vocab.json", "model_config.json", "metrics.csv",
                        "train_summary.json", "resolved_config.json"})
    CHECK(fs::exists(model / f));
  const json summary = read_json(model / "train_summary.json");
  CHECK(summary.contains("protocol"));

  REQUIRE(dabs_cli(dir, "--out \"" + (dir / "eval").string() + "\" eval --model \"" +
                            model.string() + "\" --data \"" + corpus.string() + "\"").code == 0);
  const json ev = read_json(dir / "eval" / "eval.json");
  CHECK(ev["macro_f1"].get<double>() == summary["best"]["macro_f1"].get<double>());
  CHECK(ev["n"] == summary["best"]["n"]);

  REQUIRE(dabs_cli(dir, "--out \"" + (dir / "trace").string() + "\" trace --model \"" +
                            model.string() + "\" --data \"" + corpus.string() + "\"").code == 0);
  std::ifstream traces(dir / "trace" / "traces.jsonl");
  std::string line;
  REQUIRE(std::getline(traces, line));
  const json t = json::parse(line);
  CHECK(t["alpha"].size() == 3);
  CHECK(t["g"].size() == 3);
}

TEST_CASE("replaying a resolved config reproduces the run") {
  const fs::path dir = scratch("replay");
  write_small_config(dir / "cfg.json");
  const std::string cfg = "--config \"" + (dir / "cfg.json").string() + "\" ";
  REQUIRE(dabs_cli(dir, cfg + "--seed 5 --out \"" + (dir / "gen").string() + "\" generate").code == 0);
  const std::string data = " --data \"" + (dir / "gen" / "corpus.jsonl").string() + "\"";
  REQUIRE(dabs_cli(dir, cfg + "--seed 2 --out \"" + (dir / "a").string() + "\" train" + data).code == 0);
  const std::string replay = "--config \"" + (dir / "a" / "resolved_config.json").string() + "\" ";
  REQUIRE(dabs_cli(dir, replay + "--out \"" + (dir / "b").string() + "\" train" + data).code == 0);
  CHECK(slurp(dir / "a" / "metrics.csv") == slurp(dir / "b" / "metrics.csv"));
  CHECK(slurp(dir / "a" / "model.dabs") == slurp(dir / "b" / "model.dabs"));
}

TEST_CASE("probe ablation rows carry report labels") {
  const fs::path dir = scratch("probe");
  write_small_config(dir / "cfg.json");
  const std::string cfg = "--config \"" + (dir / "cfg.json").string() + "\" ";
  REQUIRE(dabs_cli(dir, cfg + "--out \"" + (dir / "gen").string() + "\" generate").code == 0);
  const std::string data = " --data \"" + (dir / "gen" / "corpus.jsonl").string() + "\"";
  REQUIRE(dabs_cli(dir, cfg + "--out \"" + (dir / "p").string() +
                            "\" probe --ablate token_sel --seeds 1 2 --epochs 1" + data)
              .code == 0);
  const std::string csv = slurp(dir / "p" / "ablations.csv");
  CHECK(csv.find("- Token Sel.") != std::string::npos);
  CHECK(csv.find("DABS (Full)") != std::string::npos);

  REQUIRE(dabs_cli(dir, cfg + "--out \"" + (dir / "q").string() +
                            "\" probe --architectures --seeds 1 2 --epochs 1" + data)
              .code == 0);
  const std::string arch = slurp(dir / "q" / "architectures.csv");
  const std::string header = arch.substr(0, arch.find('\n'));
  CHECK(header.find(",t,") != std::string::npos);
  CHECK(header.find(",p,") != std::string::npos);
  CHECK(arch.find("encoder_only") != std::string::npos);
}

TEST_CASE("simulated bench writes the sweep") {
  const fs::path dir = scratch("bench");
  write_small_config(dir / "cfg.json");
  REQUIRE(dabs_cli(dir, "--config \"" + (dir / "cfg.json").string() + "\" --out \"" +
                            (dir / "b").string() + "\" bench --simulated --m 1 2 4")
              .code == 0);
  const std::string csv = slurp(dir / "b" / "bench.csv");
  CHECK(csv.rfind("M,p50_reuse", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 4);
  CHECK(fs::exists(dir / "b" / "bench.json"));
  CHECK(read_json(dir / "b" / "resolved_config.json")["command"] == "bench");
}

TEST_CASE("errors map to exit codes with a JSON line on stderr") {
  const fs::path dir = scratch("errors");
  std::ofstream(dir / "bad.json") << R"({"bogus": 1})";
  Run r = dabs_cli(dir, "--config \"" + (dir / "bad.json").string() + "\" generate");
  CHECK(r.code == 1);
  json e = json::parse(r.err.substr(0, r.err.find('\n')));
  CHECK(e["exit_code"] == 1);
  CHECK(e["message"].get<std::string>().find("bogus") != std::string::npos);

  r = dabs_cli(dir, "--out \"" + dir.string() + "\" stats --data \"" + (dir / "nope.jsonl").string() + "\"");
  CHECK(r.code == 2);
  e = json::parse(r.err.substr(0, r.err.find('\n')));
  CHECK(e["exit_code"] == 2);

  std::ofstream(dir / "garbage.jsonl") << "{\"text\": 3}\n";
  r = dabs_cli(dir, "--out \"" + dir.string() + "\" stats --data \"" + (dir / "garbage.jsonl").string() + "\"");
  CHECK(r.code == 2);

  r = dabs_cli(dir, "frobnicate");
  CHECK(r.code == 1);
  CHECK(json::parse(r.err.substr(0, r.err.find('\n')))["error"] == "usage");
}

}  // TEST_SUITE
