#include "fluctuant/config.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>

#include "fluctuant/errors.hpp"

namespace fluctuant {
namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& path, const std::string& what) {
  throw ConfigError(path + ": " + what);
}

const json* find(const json& doc, const std::string& key) {
  if (!doc.is_object()) return nullptr;
  auto it = doc.find(key);
  return it == doc.end() ? nullptr : &*it;
}

double as_number(const json& v, const std::string& path) {
  if (!v.is_number()) fail(path, "expected a number");
  return v.get<double>();
}

double opt_number(const json& doc, const std::string& key,
                  const std::string& path, double fallback) {
  const json* v = find(doc, key);
  return v ? as_number(*v, path) : fallback;
}

int as_int(const json& v, const std::string& path) {
  if (!v.is_number_integer()) fail(path, "expected an integer");
  return static_cast<int>(v.get<std::int64_t>());
}

int opt_int(const json& doc, const std::string& key, const std::string& path,
            int fallback) {
  const json* v = find(doc, key);
  return v ? as_int(*v, path) : fallback;
}

std::string as_string(const json& v, const std::string& path) {
  if (!v.is_string()) fail(path, "expected a string");
  return v.get<std::string>();
}

std::string opt_string(const json& doc, const std::string& key,
                       const std::string& path, const std::string& fallback) {
  const json* v = find(doc, key);
  return v ? as_string(*v, path) : fallback;
}

// Reject unknown keys so typos surface as errors, not silent defaults.
void check_keys(const json& doc, const std::string& block,
                std::initializer_list<const char*> allowed) {
  if (!doc.is_object()) return;
  for (auto it = doc.begin(); it != doc.end(); ++it) {
    bool known = false;
    for (const char* k : allowed) {
      if (it.key() == k) {
        known = true;
        break;
      }
    }
    if (!known) {
      std::string path = block.empty() ? it.key() : block + "." + it.key();
      fail(path, "unknown key");
    }
  }
}

ModelConfig parse_model(const json& doc) {
  ModelConfig mc;
  check_keys(doc, "model", {"kind", "b", "r", "a", "gamma", "kernel"});
  mc.kind = opt_string(doc, "kind", "model.kind", "constant");
  if (mc.kind != "nearest" && mc.kind != "constant" && mc.kind != "mean-zero" &&
      mc.kind != "wasep") {
    fail("model.kind", "unknown model '" + mc.kind +
                           "' (expected nearest, constant, mean-zero, wasep)");
  }
  mc.b = opt_number(doc, "b", "model.b", 0.0);
  if (mc.kind == "nearest" && mc.b < 0.0) {
    fail("model.b", "window coefficient must be nonnegative");
  }
  mc.r = opt_number(doc, "r", "model.r", 1.0);
  if (mc.kind == "constant" && mc.r <= 0.0) {
    fail("model.r", "swap rate must be positive");
  }
  mc.a = opt_number(doc, "a", "model.a", 0.0);
  mc.gamma = opt_number(doc, "gamma", "model.gamma", 1.0);
  if (mc.kind == "wasep" && mc.gamma != 1.0 && mc.gamma != 0.5) {
    fail("model.gamma", "asymmetry exponent must be 1 or 0.5");
  }
  if (const json* kern = find(doc, "kernel")) {
    if (!kern->is_array() || kern->empty()) {
      fail("model.kernel", "expected a nonempty array of [step, rate] pairs");
    }
    for (size_t i = 0; i < kern->size(); ++i) {
      const json& entry = (*kern)[i];
      std::string path = "model.kernel[" + std::to_string(i) + "]";
      if (!entry.is_array() || entry.size() != 2) {
        fail(path, "expected a [step, rate] pair");
      }
      JumpModel::Entry e;
      e.z = as_int(entry[0], path + "[0]");
      e.p = as_number(entry[1], path + "[1]");
      if (e.z == 0) fail(path, "step must be nonzero");
      if (e.p <= 0.0) fail(path, "rate must be positive");
      mc.kernel.push_back(e);
    }
  } else if (mc.kind == "mean-zero") {
    fail("model.kernel", "mean-zero model requires a kernel");
  }
  return mc;
}

std::vector<double> parse_number_grid(const json& v, const std::string& path) {
  if (!v.is_array() || v.empty()) fail(path, "expected a nonempty array");
  std::vector<double> out;
  for (size_t i = 0; i < v.size(); ++i) {
    out.push_back(as_number(v[i], path + "[" + std::to_string(i) + "]"));
  }
  return out;
}

std::vector<int> parse_int_grid(const json& v, const std::string& path) {
  if (!v.is_array() || v.empty()) fail(path, "expected a nonempty array");
  std::vector<int> out;
  for (size_t i = 0; i < v.size(); ++i) {
    out.push_back(as_int(v[i], path + "[" + std::to_string(i) + "]"));
  }
  return out;
}

}  // namespace

const std::vector<std::string>& experiment_names() {
  static const std::vector<std::string> names = {
      "ensembles",  "spectral-gap", "kv",          "blocks",
      "local-bg",   "second-bg",    "one-block",   "two-blocks",
      "occupation-fbm", "additive-fbm", "extensive", "wasep",
      "kpz",        "ou-reference", "diffusion"};
  return names;
}

ExperimentConfig parse_experiment_config(const json& doc) {
  if (!doc.is_object()) throw ConfigError("config root must be a table");
  check_keys(doc, "",
             {"model", "params", "experiment", "budget", "seed", "out_dir"});

  ExperimentConfig cfg;
  cfg.raw = doc;

  const json* exp = find(doc, "experiment");
  if (!exp) fail("experiment", "missing block");
  check_keys(*exp, "experiment",
             {"name", "t_grid", "eps_grid", "ell_grid", "radius_grid",
              "local_function", "test_function", "test_cutoff"});
  cfg.experiment = opt_string(*exp, "name", "experiment.name", "");
  const auto& names = experiment_names();
  if (std::find(names.begin(), names.end(), cfg.experiment) == names.end()) {
    fail("experiment.name", "unknown experiment '" + cfg.experiment + "'");
  }

  if (const json* model = find(doc, "model")) {
    cfg.model = parse_model(*model);
  }

  if (const json* params = find(doc, "params")) {
    check_keys(*params, "params", {"rho", "n", "ring_sites", "ring_factor", "T"});
    cfg.rho = opt_number(*params, "rho", "params.rho", cfg.rho);
    if (!(cfg.rho > 0.0 && cfg.rho < 1.0)) {
      fail("params.rho", "density must lie strictly between 0 and 1");
    }
    cfg.n = opt_int(*params, "n", "params.n", cfg.n);
    if (cfg.n < 2) fail("params.n", "scaling parameter must be at least 2");
    const json* sites = find(*params, "ring_sites");
    const json* factor = find(*params, "ring_factor");
    if (sites && factor) {
      fail("params.ring_factor", "give ring_sites or ring_factor, not both");
    }
    if (sites) cfg.ring_sites = as_int(*sites, "params.ring_sites");
    if (factor) cfg.ring_sites = cfg.n * as_int(*factor, "params.ring_factor");
    if ((sites || factor) && cfg.ring_sites < 4) {
      fail(sites ? "params.ring_sites" : "params.ring_factor",
           "ring must have at least 4 sites");
    }
    double horizon = opt_number(*params, "T", "params.T", 0.0);
    if (find(*params, "T") && horizon <= 0.0) {
      fail("params.T", "time horizon must be positive");
    }
    if (horizon > 0.0) cfg.t_grid = {horizon};
  }

  if (const json* grid = find(*exp, "t_grid")) {
    cfg.t_grid = parse_number_grid(*grid, "experiment.t_grid");
    for (size_t i = 0; i < cfg.t_grid.size(); ++i) {
      if (cfg.t_grid[i] <= 0.0) fail("experiment.t_grid", "times must be positive");
      if (i > 0 && cfg.t_grid[i] <= cfg.t_grid[i - 1]) {
        fail("experiment.t_grid", "times must be strictly increasing");
      }
    }
  }
  if (const json* grid = find(*exp, "eps_grid")) {
    cfg.eps_grid = parse_number_grid(*grid, "experiment.eps_grid");
    for (double e : cfg.eps_grid) {
      if (e * cfg.n < 2.0) {
        fail("experiment.eps_grid",
             "width " + std::to_string(e) + " gives a box under 2 sites");
      }
      if (cfg.ring_sites > 0 && e * cfg.n > cfg.ring_sites / 2.0) {
        fail("experiment.eps_grid",
             "width " + std::to_string(e) + " exceeds half the ring");
      }
    }
  }
  if (const json* grid = find(*exp, "ell_grid")) {
    cfg.ell_grid = parse_int_grid(*grid, "experiment.ell_grid");
    for (int ell : cfg.ell_grid) {
      if (ell < 2) fail("experiment.ell_grid", "blocks must have length >= 2");
      if (cfg.ring_sites > 0 && ell > cfg.ring_sites / 2) {
        fail("experiment.ell_grid", "block exceeds half the ring");
      }
    }
  }
  if (const json* grid = find(*exp, "radius_grid")) {
    cfg.radius_grid = parse_int_grid(*grid, "experiment.radius_grid");
    for (int r : cfg.radius_grid) {
      if (r < 0) fail("experiment.radius_grid", "radii must be nonnegative");
      if (r > 8) fail("experiment.radius_grid", "radius above 8 is impractical");
    }
  }
  cfg.local_function =
      opt_string(*exp, "local_function", "experiment.local_function", "");
  if (!cfg.local_function.empty()) {
    named_local_function(cfg.local_function, cfg.rho);  // throws if unknown
  }
  cfg.test_function =
      opt_string(*exp, "test_function", "experiment.test_function", "bump");
  cfg.test_cutoff =
      opt_number(*exp, "test_cutoff", "experiment.test_cutoff", 1.0);
  if (cfg.test_cutoff <= 0.0) {
    fail("experiment.test_cutoff", "cutoff must be positive");
  }
  make_test_function(cfg.test_function, cfg.test_cutoff);  // throws if unknown

  if (const json* budget = find(doc, "budget")) {
    check_keys(*budget, "budget", {"trajectories", "workers"});
    cfg.trajectories = opt_int(*budget, "trajectories", "budget.trajectories", 0);
    if (cfg.trajectories < 0) {
      fail("budget.trajectories", "trajectory count cannot be negative");
    }
    cfg.workers = opt_int(*budget, "workers", "budget.workers", 0);
    if (cfg.workers < 0) fail("budget.workers", "worker count cannot be negative");
  }

  if (const json* seed = find(doc, "seed")) {
    if (!seed->is_number_integer()) fail("seed", "expected an integer");
    cfg.seed = static_cast<std::uint64_t>(seed->get<std::int64_t>());
  }
  cfg.out_dir = opt_string(doc, "out_dir", "out_dir", "");
  return cfg;
}

std::shared_ptr<const Model> build_model(const ModelConfig& mc, int n) {
  if (mc.kind == "nearest") {
    return SpeedChangeModel::nearest_kind(mc.b);
  }
  if (mc.kind == "constant") {
    return SpeedChangeModel::constant_rate(mc.r);
  }
  if (mc.kind == "mean-zero") {
    return make_mean_zero(mc.kernel);
  }
  if (mc.kind == "wasep") {
    return make_wasep(mc.a, mc.gamma, n);
  }
  throw ConfigError("model.kind: unknown model '" + mc.kind + "'");
}

LocalFunction named_local_function(const std::string& name, double rho) {
  using Terms = std::vector<std::pair<std::vector<int>, double>>;
  if (name == "occupation") {
    return LocalFunction(Terms{{{1}, 1.0}, {{}, -rho}});
  }
  if (name == "pair") {
    return LocalFunction(Terms{{{1, 2}, 1.0}});
  }
  if (name == "pair-centered") {
    return LocalFunction(Terms{{{1, 2}, 1.0}, {{}, -rho * rho}});
  }
  if (name == "product-centered") {
    return LocalFunction(
        Terms{{{1, 2}, 1.0}, {{1}, -rho}, {{2}, -rho}, {{}, rho * rho}});
  }
  if (name == "gradient") {
    return LocalFunction(Terms{{{1}, 1.0}, {{2}, -1.0}});
  }
  if (name == "sum-centered") {
    return LocalFunction(Terms{{{1}, 1.0}, {{2}, 1.0}, {{}, -2.0 * rho}});
  }
  throw ConfigError("experiment.local_function: unknown preset '" + name + "'");
}

TestFunction make_test_function(const std::string& name, double cutoff) {
  if (name == "bump") return TestFunction(TestFunction::Kind::Bump, cutoff);
  if (name == "gauss") {
    return TestFunction(TestFunction::Kind::GaussTruncated, cutoff);
  }
  if (name == "indicator") {
    return TestFunction(TestFunction::Kind::IndicatorMollified, cutoff);
  }
  throw ConfigError("experiment.test_function: unknown profile '" + name + "'");
}

std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string canonical_json(const json& j) {
  // nlohmann::json already stores object keys sorted; a plain dump is
  // canonical as long as no NaN/inf sneaks in (dump would emit null).
  return j.dump();
}

std::string config_hash(const json& doc) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(fnv1a(canonical_json(doc))));
  return std::string(buf);
}

}  // namespace fluctuant
