#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include "fluctuant/config.hpp"
#include "fluctuant/errors.hpp"
#include "fluctuant/experiments.hpp"
#include "fluctuant/observers.hpp"
#include "fluctuant/toml.hpp"

using namespace fluctuant;
using nlohmann::json;

namespace {

template <typename F>
std::string error_message(F&& fn) {
  try {
    fn();
  } catch (const std::exception& e) {
    return e.what();
  }
  return {};
}

bool mentions(const std::string& msg, const std::string& needle) {
  return msg.find(needle) != std::string::npos;
}

std::filesystem::path write_temp(const std::string& name,
                                 const std::string& content) {
  auto p = std::filesystem::temp_directory_path() / name;
  std::ofstream out(p, std::ios::binary);
  out << content;
  return p;
}

}  // namespace

TEST_CASE("toml parses tables, scalars, and arrays") {
  const std::string doc =
      "seed = 1_000\n"
      "title = \"ring gas\\n\"   # trailing comment\n"
      "\n"
      "[experiment]\n"
      "name = \"kv\"\n"
      "t_grid = [\n"
      "  1.0, 5.0,\n"
      "  25.0,\n"
      "]\n"
      "\n"
      "[model]\n"
      "kind = \"mean-zero\"\n"
      "kernel = [[2, 0.3], [-1, 0.7]]\n"
      "exact = true\n";
  json j = parse_toml(doc);
  CHECK(j["seed"] == 1000);
  CHECK(j["title"] == "ring gas\n");
  CHECK(j["experiment"]["name"] == "kv");
  CHECK(j["experiment"]["t_grid"] == json({1.0, 5.0, 25.0}));
  CHECK(j["model"]["kernel"][0] == json({2, 0.3}));
  CHECK(j["model"]["kernel"][1][0] == -1);
  CHECK(j["model"]["exact"] == true);
}

TEST_CASE("toml keeps hash marks inside strings") {
  json j = parse_toml("label = \"a # b\"\n");
  CHECK(j["label"] == "a # b");
}

TEST_CASE("toml rejects malformed input with line numbers") {
  CHECK(mentions(error_message([] { parse_toml("a = 1\na = 2\n"); }),
                 "duplicate key"));
  CHECK(mentions(error_message([] { parse_toml("[t]\nx = 1\n[t]\ny = 2\n"); }),
                 "redefin"));
  CHECK(mentions(error_message([] { parse_toml("a = 1\n[a]\nb = 2\n"); }),
                 "not a table"));
  CHECK(mentions(error_message([] { parse_toml("s = \"open\n"); }),
                 "unterminated"));
  CHECK(mentions(error_message([] { parse_toml("[[points]]\nx = 1\n"); }),
                 "arrays of tables"));
  CHECK(mentions(error_message([] { parse_toml("a.b = 1\n"); }),
                 "dotted keys"));
  CHECK(mentions(error_message([] { parse_toml("x = zzz\n"); }),
                 "cannot parse value"));
  CHECK(mentions(error_message([] { parse_toml("x = [1, 2\n"); }), "line"));
  // Errors carry the offending line number.
  CHECK(mentions(error_message([] { parse_toml("ok = 1\nbad = @\n"); }),
                 "line 2"));
}

TEST_CASE("load_config_file dispatches on extension") {
  auto toml_path = write_temp("fluctuant_cfg_test.toml",
                              "[experiment]\nname = \"ensembles\"\n");
  json jt = load_config_file(toml_path.string());
  CHECK(jt["experiment"]["name"] == "ensembles");

  auto json_path = write_temp("fluctuant_cfg_test.json",
                              "{\"experiment\": {\"name\": \"kv\"}}");
  json jj = load_config_file(json_path.string());
  CHECK(jj["experiment"]["name"] == "kv");

  CHECK(mentions(error_message([] { load_config_file("/nonexistent.toml"); }),
                 "open"));
}

TEST_CASE("experiment config parses a full document") {
  const std::string doc =
      "seed = 7\n"
      "out_dir = \"out/custom\"\n"
      "[experiment]\n"
      "name = \"kv\"\n"
      "t_grid = [1.0, 5.0, 25.0]\n"
      "[model]\n"
      "kind = \"constant\"\n"
      "r = 1.0\n"
      "[params]\n"
      "rho = 0.5\n"
      "n = 4\n"
      "ring_sites = 4\n"
      "[budget]\n"
      "trajectories = 500\n"
      "workers = 2\n";
  ExperimentConfig cfg = parse_experiment_config(parse_toml(doc));
  CHECK(cfg.experiment == "kv");
  CHECK(cfg.seed == 7);
  CHECK(cfg.out_dir == "out/custom");
  CHECK(cfg.t_grid == std::vector<double>{1.0, 5.0, 25.0});
  CHECK(cfg.model.kind == "constant");
  CHECK(cfg.rho == 0.5);
  CHECK(cfg.n == 4);
  CHECK(cfg.ring_sites == 4);
  CHECK(cfg.trajectories == 500);
  CHECK(cfg.workers == 2);
}

TEST_CASE("experiment config validation names the offending field") {
  auto base = [](const std::string& params) {
    json j;
    j["experiment"] = {{"name", "ensembles"}};
    j["params"] = json::parse(params);
    return j;
  };
  CHECK(mentions(
      error_message([&] { parse_experiment_config(base("{\"rho\": 1.5}")); }),
      "params.rho"));
  CHECK(mentions(
      error_message([&] { parse_experiment_config(base("{\"n\": 1}")); }),
      "params.n"));
  {
    json j;
    j["experiment"] = {{"name", "second-bg"},
                       {"eps_grid", {0.01}}};  // eps*n = 0.64 < 2
    j["params"] = {{"n", 64}, {"ring_sites", 1024}};
    CHECK(mentions(error_message([&] { parse_experiment_config(j); }),
                   "eps_grid"));
  }
  {
    json j;
    j["experiment"] = {{"name", "no-such-experiment"}};
    CHECK(mentions(error_message([&] { parse_experiment_config(j); }),
                   "unknown experiment"));
  }
  {
    json j;
    j["experiment"] = {{"name", "ensembles"}};
    j["paramz"] = {{"rho", 0.5}};
    CHECK(mentions(error_message([&] { parse_experiment_config(j); }),
                   "paramz"));
  }
  {
    json j;
    j["experiment"] = {{"name", "ensembles"}, {"local_function", "bogus"}};
    CHECK(mentions(error_message([&] { parse_experiment_config(j); }),
                   "local_function"));
  }
}

TEST_CASE("named local functions carry the advertised profiles") {
  const double rho = 0.5;
  LocalFunction occ = named_local_function("occupation", rho);
  CHECK(occ.phi(rho) == doctest::Approx(0.0));
  CHECK(occ.phi_prime(rho) == doctest::Approx(1.0));

  LocalFunction pairc = named_local_function("pair-centered", rho);
  CHECK(pairc.phi(rho) == doctest::Approx(0.0));
  CHECK(pairc.phi_prime(rho) == doctest::Approx(2.0 * rho));

  LocalFunction prodc = named_local_function("product-centered", rho);
  CHECK(prodc.phi(rho) == doctest::Approx(0.0));
  CHECK(prodc.phi_prime(rho) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(prodc.phi_second(rho) == doctest::Approx(2.0));

  LocalFunction grad = named_local_function("gradient", rho);
  CHECK(grad.phi(0.3) == doctest::Approx(0.0).epsilon(1e-12));

  CHECK_THROWS_AS(named_local_function("bogus", rho), ConfigError);
}

TEST_CASE("fnv1a matches the reference vectors") {
  CHECK(fnv1a("") == 0xcbf29ce484222325ull);
  CHECK(fnv1a("a") == 0xaf63dc4c8601ec8cull);
  json a = {{"x", 1}, {"y", {1, 2}}};
  json b = {{"y", {1, 2}}, {"x", 1}};  // object order must not matter
  CHECK(config_hash(a) == config_hash(b));
  CHECK(config_hash(a) != config_hash(json{{"x", 2}}));
}

TEST_CASE("ensemble runs are reproducible across worker counts") {
  EnsembleSpec spec;
  spec.model = build_model(ModelConfig{}, 8);
  spec.ring_sites = 16;
  spec.rho = 0.5;
  spec.micro_times = {1.0, 2.0};
  spec.trajectories = 6;
  spec.seed = 99;
  spec.make_observers = [] {
    std::vector<std::unique_ptr<Observer>> obs;
    obs.push_back(std::make_unique<AdditiveObserver>(
        named_local_function("occupation", 0.5),
        std::vector<AdditiveObserver::BoxTable>{}, 1.0));
    return obs;
  };
  spec.workers = 1;
  auto a = run_ensemble(spec);
  spec.workers = 3;
  auto b = run_ensemble(spec);
  REQUIRE(a.size() == 6);
  CHECK(a == b);  // bitwise: per-trajectory streams, index-keyed aggregation
}

TEST_CASE("default experiment configs exist for every name") {
  for (const auto& name : experiment_names()) {
    ExperimentConfig cfg = default_experiment_config(name);
    CHECK(cfg.experiment == name);
    CHECK(!cfg.out_dir.empty());
  }
  CHECK_THROWS_AS(default_experiment_config("bogus"), ConfigError);
}

TEST_CASE("an experiment writes identical artifacts on identical configs") {
  ExperimentConfig cfg = default_experiment_config("ensembles");
  cfg.ell_grid = {8, 16, 32, 64};  // trimmed grid keeps this test quick
  auto dir_a = std::filesystem::temp_directory_path() / "fluctuant_exp_a";
  auto dir_b = std::filesystem::temp_directory_path() / "fluctuant_exp_b";
  std::filesystem::remove_all(dir_a);
  std::filesystem::remove_all(dir_b);

  cfg.out_dir = dir_a.string();
  ExperimentResult ra = run_experiment(cfg);
  cfg.out_dir = dir_b.string();
  ExperimentResult rb = run_experiment(cfg);

  CHECK(ra.pass);  // slope still -2 +- 0.15 on the trimmed grid
  REQUIRE(ra.files == rb.files);
  for (const auto& f : ra.files) {
    if (f == "manifest.json") continue;  // carries wall time
    std::ifstream ia(dir_a / f, std::ios::binary);
    std::ifstream ib(dir_b / f, std::ios::binary);
    std::string ca((std::istreambuf_iterator<char>(ia)),
                   std::istreambuf_iterator<char>());
    std::string cb((std::istreambuf_iterator<char>(ib)),
                   std::istreambuf_iterator<char>());
    CHECK(ca == cb);
    CHECK(!ca.empty());
  }
}
