#include "kslab/config.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>

#include "kslab/errors.hpp"

namespace kslab {

using nlohmann::json;

namespace {

std::string join(const std::string& path, const std::string& key) { return path.empty() ? key : path + "." + key; }

[[noreturn]] void fail(const std::string& path, const std::string& msg) { throw ConfigError(path + ": " + msg); }

void check_keys(const json& j, const std::string& path, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) fail(path.empty() ? "config" : path, "expected an object");
  std::set<std::string> ok(allowed.begin(), allowed.end());
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!ok.count(it.key())) fail(join(path, it.key()), "unknown key");
}

double number(const json& j, const std::string& path, const std::string& key, double def) {
  if (!j.contains(key)) return def;
  const json& v = j.at(key);
  if (!v.is_number()) fail(join(path, key), "expected a number");
  const double x = v.get<double>();
  if (!std::isfinite(x)) fail(join(path, key), "must be finite");
  return x;
}

int integer(const json& j, const std::string& path, const std::string& key, int def) {
  if (!j.contains(key)) return def;
  const json& v = j.at(key);
  if (!v.is_number_integer()) fail(join(path, key), "expected an integer");
  return v.get<int>();
}

std::string text(const json& j, const std::string& path, const std::string& key, const std::string& def) {
  if (!j.contains(key)) return def;
  const json& v = j.at(key);
  if (!v.is_string()) fail(join(path, key), "expected a string");
  return v.get<std::string>();
}

bool flag(const json& j, const std::string& path, const std::string& key, bool def) {
  if (!j.contains(key)) return def;
  const json& v = j.at(key);
  if (!v.is_boolean()) fail(join(path, key), "expected true or false");
  return v.get<bool>();
}

std::vector<double> numbers(const json& j, const std::string& path, const std::string& key) {
  if (!j.contains(key)) return {};
  const json& v = j.at(key);
  if (!v.is_array()) fail(join(path, key), "expected an array of numbers");
  std::vector<double> out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!v[i].is_number()) fail(join(path, key) + "[" + std::to_string(i) + "]", "expected a number");
    out.push_back(v[i].get<double>());
  }
  return out;
}

std::pair<double, double> bracket(const json& j, const std::string& path, const std::string& key) {
  const auto v = numbers(j, path, key);
  if (v.size() != 2) fail(join(path, key), "expected [lo, hi]");
  if (!(v[0] > 0.0 && v[1] > v[0])) fail(join(path, key), "must satisfy 0 < lo < hi");
  return {v[0], v[1]};
}

void require(bool ok, const std::string& path, const std::string& msg) {
  if (!ok) fail(path, msg);
}

bool ball_only(const Family& f) { return !std::holds_alternative<Gaussian>(f) && !std::holds_alternative<Constant>(f); }

}  // namespace

std::string criterion_name(CriterionChoice c) {
  switch (c) {
    case CriterionChoice::Eigenvalue: return "eigenvalue";
    case CriterionChoice::Kaplan: return "kaplan";
    case CriterionChoice::None: return "none";
  }
  return "unknown";
}

void RunConfig::require_simulation() const {
  if (!family && !seed) throw ConfigError("family: required (or seed_from_profile) to simulate");
}

InitialSpec RunConfig::initial_spec() const {
  require_simulation();
  if (!family) throw ConfigError("family: not set (config seeds from a profile)");
  return InitialSpec{*family, lambda, domain};
}

std::string config_hash(const json& echo) {
  const std::string s = echo.dump();
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

RunConfig config_from_json(const json& j) {
  check_keys(j, "", {"n", "domain", "R", "far_field", "family", "lambda", "a", "width", "core", "criterion", "grid",
                     "stepper", "monitor", "seed_from_profile", "sweep", "selfsimilar", "out"});
  RunConfig c;
  json echo = json::object();

  if (!j.contains("n")) fail("n", "required");
  c.n = integer(j, "", "n", 3);
  require(c.n >= 2, "n", "must be >= 2 (blowup needs dimension two or more)");
  require(c.n <= 15, "n", "must be <= 15");
  echo["n"] = c.n;

  const std::string domain = text(j, "", "domain", "ball");
  require(domain == "ball" || domain == "whole_space", "domain", "must be \"ball\" or \"whole_space\"");
  const bool ball = domain == "ball";
  const double R = number(j, "", "R", ball ? 1.0 : 10.0);
  require(R > 0.0, "R", "must be positive");
  c.domain = ball ? Domain{Ball{R}} : Domain{WholeSpace{R}};
  echo["domain"] = domain;
  echo["R"] = R;

  const std::string ff = text(j, "", "far_field", "pin");
  require(ff == "pin" || ff == "neumann", "far_field", "must be \"pin\" or \"neumann\"");
  require(!ball || ff == "pin", "far_field", "a ball always uses the boundary value w(R) = mu/n");
  c.far_field = ff == "pin" ? FarField::Pin : FarField::Neumann;
  echo["far_field"] = ff;

  if (j.contains("seed_from_profile")) {
    const json& s = j.at("seed_from_profile");
    check_keys(s, "seed_from_profile", {"T0", "bracket"});
    SeedConfig seed;
    seed.T0 = number(s, "seed_from_profile", "T0", 1.0);
    require(seed.T0 > 0.0, "seed_from_profile.T0", "must be positive");
    if (s.contains("bracket")) seed.bracket = bracket(s, "seed_from_profile", "bracket");
    require(!ball, "seed_from_profile", "self-similar data lives on the whole space");
    require(c.n >= 3, "seed_from_profile", "needs n >= 3");
    require(!j.contains("family") && !j.contains("lambda"), "seed_from_profile", "cannot be combined with family/lambda");
    c.seed = seed;
    echo["seed_from_profile"] = {{"T0", seed.T0}};
    if (seed.bracket) echo["seed_from_profile"]["bracket"] = {seed.bracket->first, seed.bracket->second};
  }

  if (j.contains("family")) {
    const std::string fam = text(j, "", "family", "");
    Family f;
    if (fam == "cosine_cap") {
      const double a = number(j, "", "a", 2.0);
      require(a >= 1.0, "a", "must be >= 1 so the data stays nonnegative");
      f = CosineCap{a};
      echo["a"] = a;
    } else if (fam == "quartic_cap") {
      f = QuarticCap{};
    } else if (fam == "gaussian") {
      const double w = number(j, "", "width", 1.0);
      require(w > 0.0, "width", "must be positive");
      f = Gaussian{w};
      echo["width"] = w;
    } else if (fam == "plateau") {
      const double core = number(j, "", "core", 0.5 * R);
      require(core > 0.0 && core < R, "core", "must lie in (0, R)");
      f = Plateau{core};
      echo["core"] = core;
    } else if (fam == "constant") {
      f = Constant{};
    } else {
      fail("family", "unknown family \"" + fam + "\"");
    }
    if (ball_only(f)) require(ball, "family", fam + " is defined on a ball only");
    if (std::holds_alternative<Gaussian>(f)) require(!ball, "family", "gaussian is defined on the whole space only");
    c.family = f;
    echo["family"] = fam;
    const bool swept = j.contains("sweep") && j.at("sweep").is_object() && j.at("sweep").contains("lambda") &&
                       j.at("sweep").at("lambda").is_array() && !j.at("sweep").at("lambda").empty() &&
                       j.at("sweep").at("lambda")[0].is_number();
    if (!j.contains("lambda") && !swept) fail("lambda", "required with family");
    c.lambda = j.contains("lambda") ? number(j, "", "lambda", 0.0) : j.at("sweep").at("lambda")[0].get<double>();
    require(c.lambda > 0.0, "lambda", "must be positive");
    echo["lambda"] = c.lambda;
  }
  for (const char* k : {"a", "width", "core"}) {
    if (j.contains(k) && !echo.contains(k)) fail(k, "does not apply to the chosen family");
  }
  if (j.contains("lambda") && !j.contains("family") && !j.contains("sweep")) fail("lambda", "requires family");

  const std::string crit = text(j, "", "criterion", ball ? "eigenvalue" : (c.n == 2 ? "none" : "kaplan"));
  if (crit == "eigenvalue") {
    require(ball, "criterion", "eigenvalue criterion needs a ball");
    c.criterion = CriterionChoice::Eigenvalue;
  } else if (crit == "kaplan") {
    require(!ball, "criterion", "kaplan criterion needs the whole space");
    require(c.n >= 3, "criterion", "kaplan criterion is unsupported for n = 2 on the whole space");
    c.criterion = CriterionChoice::Kaplan;
  } else if (crit == "none") {
    c.criterion = CriterionChoice::None;
  } else {
    fail("criterion", "must be \"eigenvalue\", \"kaplan\" or \"none\"");
  }
  echo["criterion"] = crit;

  const json empty = json::object();
  const json& g = j.contains("grid") ? j.at("grid") : empty;
  check_keys(g, "grid", {"N", "grading"});
  c.grid.N = integer(g, "grid", "N", 2048);
  c.grid.grading = number(g, "grid", "grading", 2.0);
  require(c.grid.N >= 8, "grid.N", "must be >= 8");
  require(c.grid.grading >= 1.0 && c.grid.grading <= 4.0, "grid.grading", "must lie in [1, 4]");
  echo["grid"] = {{"N", c.grid.N}, {"grading", c.grid.grading}};

  const json& st = j.contains("stepper") ? j.at("stepper") : empty;
  check_keys(st, "stepper", {"dt_init", "dt_floor", "dt_max", "cfl", "u_blowup_threshold", "t_max"});
  c.stepper.dt_init = number(st, "stepper", "dt_init", c.stepper.dt_init);
  c.stepper.dt_floor = number(st, "stepper", "dt_floor", c.stepper.dt_floor);
  c.stepper.dt_max = number(st, "stepper", "dt_max", c.stepper.dt_max);
  c.stepper.cfl_target = number(st, "stepper", "cfl", c.stepper.cfl_target);
  c.stepper.u_blowup_threshold = number(st, "stepper", "u_blowup_threshold", c.stepper.u_blowup_threshold);
  c.stepper.t_max = number(st, "stepper", "t_max", c.stepper.t_max);
  validate(c.stepper);
  echo["stepper"] = {{"dt_init", c.stepper.dt_init},
                     {"dt_floor", c.stepper.effective_dt_floor()},
                     {"dt_max", c.stepper.dt_max},
                     {"cfl", c.stepper.cfl_target},
                     {"u_blowup_threshold", c.stepper.u_blowup_threshold},
                     {"t_max", c.stepper.t_max}};

  const json& m = j.contains("monitor") ? j.at("monitor") : empty;
  check_keys(m, "monitor", {"stride", "epsilon", "delta", "checkpoint_stride"});
  c.monitor.stride = integer(m, "monitor", "stride", c.monitor.stride);
  c.monitor.epsilon = number(m, "monitor", "epsilon", c.monitor.epsilon);
  c.monitor.deltas = numbers(m, "monitor", "delta");
  c.monitor.checkpoint_stride = integer(m, "monitor", "checkpoint_stride", c.monitor.checkpoint_stride);
  require(c.monitor.stride >= 1, "monitor.stride", "must be >= 1");
  require(c.monitor.epsilon > 0.0, "monitor.epsilon", "must be positive");
  require(c.monitor.checkpoint_stride >= 0, "monitor.checkpoint_stride", "must be >= 0");
  for (std::size_t i = 0; i < c.monitor.deltas.size(); ++i)
    require(c.monitor.deltas[i] >= 0.0 && c.monitor.deltas[i] <= R, "monitor.delta[" + std::to_string(i) + "]",
            "must lie in [0, R]");
  echo["monitor"] = {{"stride", c.monitor.stride},
                     {"epsilon", c.monitor.epsilon},
                     {"delta", c.monitor.deltas},
                     {"checkpoint_stride", c.monitor.checkpoint_stride}};

  if (j.contains("sweep")) {
    const json& s = j.at("sweep");
    check_keys(s, "sweep", {"lambda", "n", "threads"});
    SweepConfig sw;
    sw.lambda = numbers(s, "sweep", "lambda");
    for (double x : numbers(s, "sweep", "n")) {
      require(x == std::floor(x) && x >= 2 && x <= 15, "sweep.n", "entries must be integers in [2, 15]");
      sw.n.push_back(static_cast<int>(x));
    }
    sw.threads = integer(s, "sweep", "threads", 0);
    require(sw.threads >= 0, "sweep.threads", "must be >= 0");
    if (s.contains("lambda")) require(!sw.lambda.empty(), "sweep.lambda", "empty grid");
    if (s.contains("n")) require(!sw.n.empty(), "sweep.n", "empty grid");
    require(!sw.lambda.empty() || !sw.n.empty(), "sweep", "empty grid");
    for (double x : sw.lambda) require(x > 0.0, "sweep.lambda", "entries must be positive");
    c.sweep = sw;
    echo["sweep"] = {{"lambda", sw.lambda}, {"n", sw.n}, {"threads", sw.threads}};
  }

  const json& ss = j.contains("selfsimilar") ? j.at("selfsimilar") : empty;
  check_keys(ss, "selfsimilar", {"bracket", "rho_max", "scan_points", "expect_failure"});
  if (ss.contains("bracket")) c.selfsimilar.bracket = bracket(ss, "selfsimilar", "bracket");
  c.selfsimilar.rho_max = number(ss, "selfsimilar", "rho_max", c.selfsimilar.rho_max);
  c.selfsimilar.scan_points = integer(ss, "selfsimilar", "scan_points", c.selfsimilar.scan_points);
  c.selfsimilar.expect_failure = flag(ss, "selfsimilar", "expect_failure", false);
  require(c.selfsimilar.rho_max >= 20.0, "selfsimilar.rho_max", "must be >= 20");
  require(c.selfsimilar.scan_points >= 2, "selfsimilar.scan_points", "must be >= 2");
  echo["selfsimilar"] = {{"rho_max", c.selfsimilar.rho_max},
                         {"scan_points", c.selfsimilar.scan_points},
                         {"expect_failure", c.selfsimilar.expect_failure}};
  if (c.selfsimilar.bracket)
    echo["selfsimilar"]["bracket"] = {c.selfsimilar.bracket->first, c.selfsimilar.bracket->second};

  c.out = text(j, "", "out", "");
  c.echo = std::move(echo);
  c.hash = config_hash(c.echo);
  return c;
}

RunConfig parse_config(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config: malformed JSON: ") + e.what());
  }
  return config_from_json(j);
}

RunConfig sweep_cell(const RunConfig& base, int n, std::optional<double> lambda) {
  json j = base.echo;
  j.erase("sweep");
  j["n"] = n;
  if (lambda) j["lambda"] = *lambda;
  // Echo keeps stepper.dt_floor resolved; that is a valid explicit value.
  RunConfig c = config_from_json(j);
  c.out = base.out;
  return c;
}

}  // namespace kslab
