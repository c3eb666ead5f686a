#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "kslab/commands.hpp"
#include "kslab/errors.hpp"
#include "kslab/io.hpp"

using namespace kslab;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("kslab_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

const char* kSmall = R"({"n": 3, "domain": "ball", "R": 1, "family": "cosine_cap", "lambda": 40,
  "grid": {"N": 128}, "stepper": {"u_blowup_threshold": 1e6},
  "monitor": {"stride": 5, "checkpoint_stride": 200, "delta": [0.001, 0.01]}})";

json strip_wall_clock(json r) {
  r["status"].erase("wall_clock_seconds");
  r["status"].erase("checkpoints");
  r["status"].erase("resumed_from");
  return r;
}

std::string message_of(const std::string& text) {
  try {
    parse_config(text);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("minimal config gets defaults") {
  const auto c = parse_config(R"({"n":3, "domain":"ball", "R":1, "family":"cosine_cap", "lambda":40})");
  CHECK(c.n == 3);
  CHECK(c.grid.N == 2048);
  CHECK(c.grid.grading == 2.0);
  CHECK(c.stepper.cfl_target == 0.005);
  CHECK(c.monitor.stride == 10);
  CHECK(c.criterion == CriterionChoice::Eigenvalue);
  CHECK(c.echo["a"] == 2.0);
  CHECK(c.hash.size() == 16);
}

TEST_CASE("config errors carry their path") {
  CHECK(message_of(R"({"n":1})").rfind("n:", 0) == 0);
  CHECK(message_of(R"({"n":2, "domain":"whole_space", "criterion":"kaplan"})").rfind("criterion:", 0) == 0);
  CHECK(message_of(R"({"n":3, "bogus":1})").rfind("bogus: unknown key", 0) == 0);
  CHECK(message_of(R"({"n":3, "stepper": {"cfl": 2}})").rfind("stepper.cfl:", 0) == 0);
  CHECK(message_of(R"({"n":3, "monitor": {"foo": 2}})").rfind("monitor.foo: unknown key", 0) == 0);
  CHECK(message_of(R"({"n":3, "grid": {"N": "big"}})").rfind("grid.N:", 0) == 0);
  CHECK(message_of(R"({"n":3, "domain":"ball", "family":"gaussian", "lambda":1})").rfind("family:", 0) == 0);
  CHECK(message_of(R"({"n":3, "sweep": {"lambda": []}})").rfind("sweep.lambda: empty grid", 0) == 0);
  CHECK(message_of("{not json").rfind("config: malformed JSON", 0) == 0);
  CHECK(message_of(R"({"domain":"ball"})").rfind("n: required", 0) == 0);
}

TEST_CASE("config hash detects tampering") {
  const auto c = parse_config(kSmall);
  json report = {{"config", c.echo}, {"config_hash", c.hash}};
  CHECK(verify_report_hash(report));
  report["config"]["lambda"] = 41.0;
  CHECK_FALSE(verify_report_hash(report));
  CHECK(parse_config(kSmall).hash == c.hash);
}

TEST_CASE("sweep cells take the product of the grids") {
  const auto c = parse_config(R"({"n":3, "family":"cosine_cap", "sweep": {"lambda":[1, 2, 3], "n": [2, 3]}})");
  REQUIRE(c.sweep);
  CHECK(c.sweep->lambda.size() * c.sweep->n.size() == 6);
  const auto cell = sweep_cell(c, 2, 3.0);
  CHECK(cell.n == 2);
  CHECK(cell.lambda == 3.0);
  CHECK_FALSE(cell.sweep);
}

TEST_CASE("numbers and checkpoints round-trip exactly") {
  for (double x : {0.1, 1e-300, 123456.789, -2.5e17}) {
    CHECK(parse_hex_double(hex_double(x)) == x);
    CHECK(std::strtod(format_double(x).c_str(), nullptr) == x);
  }
  CHECK(format_double(std::nan("")) == "nan");
  Checkpoint c;
  c.config_hash = "abc";
  c.t = 0.1;
  c.step_index = 7;
  c.w = {1.0 / 3, 0.2};
  c.trace.t = {0.0, 0.1};
  c.trace.u0 = {1.0, 1.1};
  MonitorSample s;
  s.t = 0.1;
  s.r_half = std::nan("");
  s.j_lattice[3] = -0.7;
  c.samples.push_back(s);
  const Checkpoint back = checkpoint_from_json(checkpoint_to_json(c));
  CHECK(back.w == c.w);
  CHECK(back.trace.u0 == c.trace.u0);
  CHECK(back.samples.at(0).j_lattice[3] == -0.7);
  CHECK(std::isnan(back.samples.at(0).r_half));
  CHECK_THROWS_AS(checkpoint_from_json(json{{"format", "other"}}), ConfigError);
}

TEST_CASE("atomic write leaves no temporary file") {
  const fs::path d = scratch("atomic");
  atomic_write(d / "a.txt", "hello");
  CHECK(read_file(d / "a.txt") == "hello");
  CHECK_FALSE(fs::exists(d / "a.txt.tmp"));
}

TEST_CASE("simulate writes every artifact and is deterministic") {
  const auto cfg = parse_config(kSmall);
  const fs::path a = scratch("sim_a"), b = scratch("sim_b");
  const auto ra = simulate(cfg, CommandOptions{a, std::nullopt, true});
  const auto rb = simulate(cfg, CommandOptions{b, std::nullopt, true});
  CHECK(ra.exit_code == 0);
  for (const char* f : {"monitors.csv", "report.json", "profile.csv", "concentration.csv"}) CHECK(fs::exists(a / f));
  CHECK_FALSE(ra.checkpoints.empty());
  CHECK(fs::exists(a / ra.checkpoints.back()));

  const auto [header, rows] = parse_csv(read_file(a / "monitors.csv"));
  CHECK(header == kMonitorHeader);
  CHECK(rows.size() == ra.report["status"]["samples"].get<std::size_t>());
  for (std::size_t i = 1; i < rows.size(); ++i) CHECK(rows[i][0] > rows[i - 1][0]);
  CHECK(read_file(a / "profile.csv").rfind("r,U\n", 0) == 0);

  const json ja = json::parse(read_file(a / "report.json")), jb = json::parse(read_file(b / "report.json"));
  for (const char* k : {"config", "config_hash", "status", "T_est", "T_err", "profile_fit", "criterion",
                        "epsilon_star", "versions"})
    CHECK(ja.contains(k));
  CHECK(ja.size() == 9);
  CHECK(verify_report_hash(ja));
  CHECK(strip_wall_clock(ja).dump() == strip_wall_clock(jb).dump());
  CHECK(read_file(a / "monitors.csv") == read_file(b / "monitors.csv"));
}

TEST_CASE("resume continues from a checkpoint and appends") {
  const auto cfg = parse_config(kSmall);
  const fs::path full = scratch("resume_full"), part = scratch("resume_part");
  const auto rf = simulate(cfg, CommandOptions{full, std::nullopt, true});
  REQUIRE(rf.checkpoints.size() >= 2);
  const fs::path ck = full / rf.checkpoints.front();
  const auto before = load_checkpoint(ck).samples.size();
  const auto rr = simulate(cfg, CommandOptions{part, ck, true});
  CHECK(rr.exit_code == 0);
  const auto rows = parse_csv(read_file(part / "monitors.csv")).second;
  CHECK(rows.size() > before);
  CHECK(read_file(part / "monitors.csv") == read_file(full / "monitors.csv"));
  CHECK(strip_wall_clock(rr.report).dump() == strip_wall_clock(rf.report).dump());

  auto other = parse_config(R"({"n":3, "domain":"ball", "family":"cosine_cap", "lambda":41, "grid": {"N": 128}})");
  CHECK_THROWS_AS(simulate(other, CommandOptions{scratch("resume_bad"), ck, true}), ConfigError);
}

TEST_CASE("selfsimilar command") {
  const fs::path d = scratch("ss3");
  CHECK(cmd_selfsimilar(parse_config(R"({"n":3})"), CommandOptions{d, std::nullopt, true}) == kExitOk);
  const json s = json::parse(read_file(d / "selfsimilar.json"));
  CHECK(s["found"] == true);
  CHECK(s["L"].get<double>() > 0.0);
  CHECK(read_file(d / "selfsimilar_profile.csv").rfind("rho,V\n", 0) == 0);

  const fs::path d2 = scratch("ss2");
  CHECK(cmd_selfsimilar(parse_config(R"({"n":2, "selfsimilar": {"expect_failure": true}})"),
                        CommandOptions{d2, std::nullopt, true}) == kExitOk);
  CHECK(json::parse(read_file(d2 / "selfsimilar.json"))["result"] == "no decaying profile");
  CHECK_THROWS_AS(cmd_selfsimilar(parse_config(R"({"n":2})"), CommandOptions{d2, std::nullopt, true}), ConfigError);
  CHECK_THROWS_AS(cmd_selfsimilar(parse_config(R"({"n":3, "selfsimilar": {"bracket": [2.5, 4]}})"),
                                  CommandOptions{d2, std::nullopt, true}),
                  ConfigError);
}

TEST_CASE("sweep command writes one directory per cell and an aggregate") {
  const fs::path d = scratch("sweep");
  const auto cfg = parse_config(R"({"n":3, "family":"cosine_cap", "grid": {"N": 64},
    "stepper": {"t_max": 1, "u_blowup_threshold": 1e5}, "sweep": {"lambda": [1, 60], "threads": 2}})");
  CHECK(cmd_sweep(cfg, CommandOptions{d, std::nullopt, true}) == kExitOk);
  const json agg = json::parse(read_file(d / "sweep.json"));
  CHECK(agg["cell_count"] == 2);
  CHECK(agg["cells"][0]["status"] == "no_blowup_by");
  CHECK(agg["cells"][1]["status"] == "blowup");
  CHECK(fs::exists(d / "cell_000" / "report.json"));
  CHECK(fs::exists(d / "cell_001" / "report.json"));
  CHECK(read_file(d / "sweep.csv").rfind("cell,n,lambda,criterion_margin", 0) == 0);
}

TEST_CASE("command-line exit codes") {
  const char* bin = std::getenv("KSLAB_BIN");
  if (!bin) return;
  const fs::path d = scratch("cli");
  auto write = [&](const std::string& name, const std::string& text) {
    std::ofstream(d / name) << text;
    return (d / name).string();
  };
  auto code = [&](const std::string& args) {
    const int rc = std::system((std::string(bin) + " " + args + " > /dev/null 2>&1").c_str());
    return WEXITSTATUS(rc);
  };
  const std::string good = write("good.json", kSmall);
  const std::string bad = write("bad.json", R"({"n": 1})");
  const std::string two = write("two.json", R"({"n": 2})");
  CHECK(code("simulate --config " + good + " --out " + (d / "run").string() + " --quiet") == 0);
  CHECK(fs::exists(d / "run" / "report.json"));
  CHECK(code("simulate --config " + bad + " --out " + (d / "x").string()) == 2);
  CHECK(code("validate --config " + good + " --quiet --out " + (d / "v").string()) == 0);
  CHECK(code("selfsimilar --config " + two + " --out " + (d / "s").string()) == 2);
  CHECK(code("frobnicate") == 2);
}
