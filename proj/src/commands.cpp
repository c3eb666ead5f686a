#include "kslab/commands.hpp"

#include <atomic>
#include <chrono>
#include <cstdio>
#include <iostream>
#include <mutex>
#include <thread>

#include <boost/version.hpp>

#include "CLI11.hpp"
#include "kslab/errors.hpp"
#include "kslab/initial_data.hpp"
#include "kslab/io.hpp"
#include "kslab/selfsimilar.hpp"

#ifndef KSLAB_VERSION
#define KSLAB_VERSION "0.0.0"
#endif

namespace kslab {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

class NoProfile : public Error {
 public:
  explicit NoProfile(const std::string& msg) : Error(msg) {}
};

json versions() {
  return {{"kslab", KSLAB_VERSION},
          {"csv_schema", kCsvSchemaVersion},
          {"report_schema", kReportSchemaVersion},
          {"checkpoint_format", kCheckpointVersion},
          {"boost", BOOST_LIB_VERSION},
          {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                std::to_string(NLOHMANN_JSON_VERSION_PATCH)}};
}

json criterion_json(const std::optional<CriterionReport>& c) {
  if (!c) return nullptr;
  return {{"kind", c->kind == CriterionKind::Eigenvalue ? "eigenvalue" : "kaplan"},
          {"mass", c->mass},
          {"mu", c->mu},
          {"lambda1", c->lambda1},
          {"kaplan_y0", c->kaplan_y0},
          {"threshold", c->threshold},
          {"sufficient", c->sufficient},
          {"margin", c->margin}};
}

json fit_json(const std::optional<ProfileFit>& f, double t) {
  if (!f) return nullptr;
  return {{"p", f->p},           {"L", f->L},
          {"r_lo", f->r_lo},     {"r_hi", f->r_hi},
          {"residual", f->residual}, {"points", f->points},
          {"band_lo", f->band_lo}, {"band_hi", f->band_hi},
          {"band_ratio", f->band_hi / f->band_lo}, {"t", t}};
}

ProfileSearch profile_for(const RunConfig& c, std::optional<std::pair<double, double>> bracket) {
  ProfileSearchOptions o;
  o.tail_rho_max = c.selfsimilar.rho_max;
  if (bracket) return find_profile(*bracket, c.n, o);
  return search_profile(default_bracket(c.n), c.n, c.selfsimilar.scan_points, o);
}

void say(const CommandOptions& o, const std::string& msg) {
  if (!o.quiet) std::cerr << msg << '\n';
}

}  // namespace

SimulationOutcome simulate(const RunConfig& cfg, const CommandOptions& opt) {
  cfg.require_simulation();
  const auto wall_start = std::chrono::steady_clock::now();
  SimulationOutcome out;
  const GridPtr grid = build_grid(cfg.domain, cfg.grid.N, Grading{cfg.grid.grading});

  std::optional<RadialField> u0;
  if (cfg.seed) {
    const ProfileSearch ps = profile_for(cfg, cfg.seed->bracket);
    if (!ps.found) throw NoProfile("seed_from_profile: " + ps.message);
    u0 = seed_pde_from_profile(ps.solution, cfg.seed->T0, grid);
  } else {
    u0 = sample(cfg.initial_spec(), grid);
  }
  const Params params = params_from_data(cfg.n, cfg.domain, *u0, cfg.far_field);
  if (cfg.criterion != CriterionChoice::None) out.criterion = blowup_criterion(*u0, params);

  RunRecorder recorder(params, cfg.monitor.epsilon, cfg.monitor.deltas);
  State start = initial_state(*u0, params);
  BlowupTrace history;
  double prior_activity = 0.0;
  RunHooks hooks = recorder.hooks(cfg.monitor.stride);
  if (opt.resume) {
    Checkpoint ck = load_checkpoint(*opt.resume);
    if (ck.config_hash != cfg.hash) throw ConfigError("resume: checkpoint was written for a different config");
    if (ck.w.size() != grid->size()) throw ConfigError("resume: checkpoint grid does not match the config");
    start = State{RadialField(grid, ck.w), ck.t, ck.u0_mass, ck.step_index};
    history = std::move(ck.trace);
    prior_activity = ck.boundary_activity;
    std::optional<RadialField> fp;
    if (ck.final_profile) fp = RadialField(grid, *ck.final_profile);
    recorder.restore(std::move(ck.samples), std::move(ck.concentration), std::move(fp), ck.final_profile_t,
                     ck.final_profile_r_half);
    hooks.sample_start = false;
    say(opt, "resuming at step " + std::to_string(start.step_index));
  }

  const fs::path ckdir = opt.out / "checkpoints";
  auto write_checkpoint = [&](const State& s, const BlowupTrace& trace, double activity) {
    Checkpoint ck;
    ck.config_hash = cfg.hash;
    ck.config = cfg.echo;
    ck.t = s.t;
    ck.step_index = s.step_index;
    ck.u0_mass = s.u0_mass;
    ck.w.assign(s.w.values().begin(), s.w.values().end());
    ck.trace = trace;
    ck.boundary_activity = activity;
    ck.samples = recorder.samples();
    ck.concentration = recorder.concentration();
    if (const auto& fp = recorder.final_profile()) {
      ck.final_profile = std::vector<double>(fp->values().begin(), fp->values().end());
      ck.final_profile_t = recorder.final_profile_t();
      ck.final_profile_r_half = recorder.final_profile_r_half();
    }
    char name[40];
    std::snprintf(name, sizeof name, "ckpt_%09ld.json", s.step_index);
    save_checkpoint(ckdir / name, ck);
    out.checkpoints.push_back(std::string("checkpoints/") + name);
  };
  if (cfg.monitor.checkpoint_stride > 0) {
    hooks.checkpoint_stride = cfg.monitor.checkpoint_stride;
    hooks.on_checkpoint = [&](const State& s, const BlowupTrace& trace) { write_checkpoint(s, trace, prior_activity); };
  }

  say(opt, "running n = " + std::to_string(cfg.n) + " on " + domain_name(cfg.domain) + " with N = " +
               std::to_string(cfg.grid.N));
  out.result = run(start, params, cfg.stepper, hooks, std::move(history));
  RunResult& res = out.result;
  res.boundary_activity = std::max(res.boundary_activity, prior_activity);
  res.boundary_flag = res.boundary_activity > 1e-3;
  write_checkpoint(res.final_state, res.trace, res.boundary_activity);
  out.analysis = analyze_run(res, recorder, params);
  const RunAnalysis& a = out.analysis;

  atomic_write(opt.out / "monitors.csv", monitors_csv(recorder.samples()));
  if (!cfg.monitor.deltas.empty())
    atomic_write(opt.out / "concentration.csv",
                 concentration_csv(recorder.samples(), cfg.monitor.deltas, recorder.concentration()));
  const RadialField U = recorder.final_profile() ? *recorder.final_profile() : u_from_w(res.final_state.w, cfg.n);
  atomic_write(opt.out / "profile.csv", profile_csv(U));

  const auto& st = res.status;
  const bool blowup = st.kind == BlowupStatus::Kind::Blowup;
  json status = {{"kind", kind_name(st.kind)},
                 {"reason", st.reason},
                 {"stop", stop_name(res.stop)},
                 {"steps", res.final_state.step_index},
                 {"t_final", res.final_state.t},
                 {"u0_final", params.n * res.final_state.w[0]},
                 {"fit_residual", st.fit_residual},
                 {"low_confidence", st.low_confidence},
                 {"boundary_activity", res.boundary_activity},
                 {"boundary_flag", res.boundary_flag},
                 {"mass_drift", a.mass_drift},
                 {"mass_quadrature_drift", a.mass_quadrature_drift},
                 {"wt_min_rel", a.wt_min_rel},
                 {"wr_max_rel", a.wr_max_rel},
                 {"mass_singularity_C", a.mass_singularity_C},
                 {"profile_note", a.profile_note},
                 {"monitors", "monitors.csv"},
                 {"samples", recorder.samples().size()},
                 {"checkpoints", out.checkpoints}};
  if (st.kind == BlowupStatus::Kind::NoBlowupBy) status["no_blowup_by"] = st.t_max;
  if (!res.breakdown_message.empty()) status["breakdown"] = res.breakdown_message;
  if (a.type) status["type_ratio"] = {{"min", a.type->min}, {"max", a.type->max}, {"points", a.type->window_points}};
  json tail = json::array();
  for (const auto& [t, u] : st.trace_tail) tail.push_back({t, u});
  status["trace_tail"] = std::move(tail);
  if (opt.resume) status["resumed_from"] = opt.resume->filename().string();
  status["wall_clock_seconds"] =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - wall_start).count();

  json report;
  report["config"] = cfg.echo;
  report["config_hash"] = cfg.hash;
  report["status"] = std::move(status);
  report["T_est"] = blowup ? json(st.T_est) : json(nullptr);
  report["T_err"] = blowup ? json(st.T_err) : json(nullptr);
  report["profile_fit"] = fit_json(a.profile_fit, recorder.final_profile_t());
  report["criterion"] = criterion_json(out.criterion);
  report["epsilon_star"] = {{"value", a.epsilon.epsilon_star},
                            {"sup", a.epsilon.epsilon_sup},
                            {"lattice_index", a.epsilon.lattice_index},
                            {"flagged", a.epsilon.flagged},
                            {"T0", a.T0},
                            {"gap_min_rel", a.gap_at_star_min_rel}};
  report["versions"] = versions();
  atomic_write(opt.out / "report.json", report.dump(2) + "\n");
  out.report = std::move(report);
  out.exit_code = res.stop == StopReason::Breakdown ? kExitBreakdown : kExitOk;
  say(opt, kind_name(st.kind) + (blowup ? " at T = " + format_double(st.T_est) : std::string()) + " (" +
               st.reason + ")");
  return out;
}

int cmd_simulate(const RunConfig& config, const CommandOptions& options) {
  return simulate(config, options).exit_code;
}

int cmd_selfsimilar(const RunConfig& cfg, const CommandOptions& opt) {
  if (cfg.n < 3 && !cfg.selfsimilar.expect_failure)
    throw ConfigError("selfsimilar: profile search needs n >= 3 (set selfsimilar.expect_failure for n = 2)");
  const ProfileSearch ps = profile_for(cfg, cfg.selfsimilar.bracket);
  json log = json::array();
  for (const auto& [alpha, c] : ps.log) log.push_back({{"alpha", alpha}, {"class", classification_name(c)}});
  json summary = {{"config", cfg.echo}, {"config_hash", cfg.hash}, {"n", cfg.n},
                  {"found", ps.found},  {"message", ps.message},   {"scan_log", log},
                  {"versions", versions()}};
  if (ps.found) {
    const auto& s = ps.solution;
    summary["alpha"] = s.alpha;
    summary["bracket_width"] = s.bracket_width;
    summary["ell"] = s.ell;
    summary["L"] = s.L;
    summary["plateau_variation"] = s.plateau_variation;
    summary["match_rho"] = s.match_rho;
    summary["match_slope_error"] = s.match_slope_error;
    summary["classification"] = classification_name(s.classification);
    summary["profile"] = "selfsimilar_profile.csv";
    atomic_write(opt.out / "selfsimilar_profile.csv", selfsimilar_csv(s));
  } else {
    summary["result"] = "no decaying profile";
  }
  atomic_write(opt.out / "selfsimilar.json", summary.dump(2) + "\n");
  say(opt, ps.message);
  if (ps.found) return kExitOk;
  return cfg.selfsimilar.expect_failure ? kExitOk : kExitNoProfile;
}

int cmd_sweep(const RunConfig& cfg, const CommandOptions& opt) {
  if (!cfg.sweep) throw ConfigError("sweep: missing sweep block");
  cfg.require_simulation();
  const auto& sw = *cfg.sweep;
  struct Cell {
    int n;
    std::optional<double> lambda;
  };
  std::vector<Cell> cells;
  const std::vector<int> ns = sw.n.empty() ? std::vector<int>{cfg.n} : sw.n;
  for (int n : ns) {
    if (sw.lambda.empty()) cells.push_back({n, std::nullopt});
    for (double l : sw.lambda) cells.push_back({n, l});
  }
  std::vector<json> rows(cells.size());
  std::atomic<std::size_t> next{0};
  std::mutex log_mutex;
  auto worker = [&] {
    for (std::size_t i; (i = next++) < cells.size();) {
      char dir[32];
      std::snprintf(dir, sizeof dir, "cell_%03zu", i);
      json row = {{"cell", i}, {"n", cells[i].n}, {"dir", dir}};
      row["lambda"] = cells[i].lambda ? *cells[i].lambda : cfg.lambda;
      try {
        const RunConfig cell = sweep_cell(cfg, cells[i].n, cells[i].lambda);
        CommandOptions o{opt.out / dir, std::nullopt, true};
        const SimulationOutcome r = simulate(cell, o);
        row["exit_code"] = r.exit_code;
        row["status"] = kind_name(r.result.status.kind);
        row["T_est"] = r.report["T_est"];
        row["criterion_margin"] = r.criterion ? json(r.criterion->margin) : json(nullptr);
        row["criterion_sufficient"] = r.criterion ? json(r.criterion->sufficient) : json(nullptr);
        row["p"] = r.analysis.profile_fit ? json(r.analysis.profile_fit->p) : json(nullptr);
        row["L"] = r.analysis.profile_fit ? json(r.analysis.profile_fit->L) : json(nullptr);
      } catch (const std::exception& e) {
        row["exit_code"] = dynamic_cast<const NumericalBreakdown*>(&e) ? kExitBreakdown : kExitConfig;
        row["status"] = "error";
        row["error"] = e.what();
      }
      rows[i] = row;
      std::lock_guard<std::mutex> lock(log_mutex);
      say(opt, std::string(dir) + ": " + row["status"].get<std::string>());
    }
  };
  const unsigned threads = sw.threads > 0 ? sw.threads : std::max(1u, std::thread::hardware_concurrency());
  std::vector<std::thread> pool;
  for (unsigned t = 0; t < std::min<std::size_t>(threads, cells.size()); ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();

  auto cell_text = [](const json& v) {
    if (v.is_null()) return std::string();
    if (v.is_number()) return format_double(v.get<double>());
    if (v.is_boolean()) return std::string(v.get<bool>() ? "true" : "false");
    return v.get<std::string>();
  };
  std::string csv = "cell,n,lambda,criterion_margin,criterion_sufficient,status,T_est,p,L,exit_code\n";
  int failures = 0;
  for (const auto& r : rows) {
    csv += std::to_string(r["cell"].get<std::size_t>()) + "," + std::to_string(r["n"].get<int>()) + "," +
           cell_text(r["lambda"]) + "," + cell_text(r.value("criterion_margin", json())) + "," +
           cell_text(r.value("criterion_sufficient", json())) + "," + r["status"].get<std::string>() + "," +
           cell_text(r.value("T_est", json())) + "," + cell_text(r.value("p", json())) + "," +
           cell_text(r.value("L", json())) + "," + std::to_string(r["exit_code"].get<int>()) + "\n";
    if (r["exit_code"].get<int>() != 0) ++failures;
  }
  atomic_write(opt.out / "sweep.csv", csv);
  json agg = {{"config", cfg.echo}, {"config_hash", cfg.hash}, {"cells", rows},
              {"cell_count", rows.size()}, {"failures", failures}, {"versions", versions()}};
  atomic_write(opt.out / "sweep.json", agg.dump(2) + "\n");
  return failures == static_cast<int>(rows.size()) ? kExitBreakdown : kExitOk;
}

int cmd_validate(const RunConfig& cfg, const CommandOptions& opt) {
  cfg.require_simulation();
  json v = {{"config", cfg.echo}, {"config_hash", cfg.hash}};
  if (cfg.family) {
    const GridPtr grid = build_grid(cfg.domain, cfg.grid.N, Grading{cfg.grid.grading});
    const RadialField u0 = sample(cfg.initial_spec(), grid);
    const Params params = params_from_data(cfg.n, cfg.domain, u0, cfg.far_field);
    auto rep = [](const ValidationReport& r) {
      return json{{"passed", r.passed}, {"failures", r.failures}, {"min", r.min_value},
                  {"scale", r.scale},   {"worst_r", r.worst_r}};
    };
    v["i0"] = rep(validate_i0(u0));
    if (params.ball()) {
      v["i2"] = rep(validate_i2(u0, params));
      const RadialField phi = sample(InitialSpec{*cfg.family, 1.0, cfg.domain}, grid);
      try {
        const MinLambdaResult ml = min_lambda_for_i2(phi, params_from_data(cfg.n, cfg.domain, phi));
        v["min_lambda_for_i2"] = {{"found", ml.found}, {"lambda", ml.lambda}, {"message", ml.message}};
      } catch (const ConfigError& e) {
        v["min_lambda_for_i2"] = {{"found", false}, {"message", e.what()}};
      }
    }
    if (cfg.criterion != CriterionChoice::None) v["criterion"] = criterion_json(blowup_criterion(u0, params));
  } else {
    v["seed_from_profile"] = {{"T0", cfg.seed->T0}};
  }
  const std::string text = v.dump(2) + "\n";
  if (!opt.quiet) std::cout << text;
  if (!opt.out.empty()) atomic_write(opt.out / "validate.json", text);
  return kExitOk;
}

int run_cli(int argc, char** argv) {
  CLI::App app{"Radial Keller-Segel blowup lab"};
  app.require_subcommand(1);
  std::string config_path, out_dir = "out", resume;
  bool quiet = false;
  std::string which;
  const std::pair<const char*, const char*> subs[] = {
      {"simulate", "run one PDE simulation to blowup or t_max"},
      {"selfsimilar", "search for the self-similar profile"},
      {"sweep", "simulate every (n, lambda) cell concurrently"},
      {"validate", "check initial data and the blowup criterion without running"}};
  for (const auto& [name, help] : subs) {
    auto* sub = app.add_subcommand(name, help);
    sub->add_option("--config", config_path, "JSON configuration file")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", out_dir, "output directory");
    sub->add_flag("--quiet", quiet, "suppress progress messages");
    if (std::string(name) == "simulate") sub->add_option("--resume", resume, "checkpoint to continue from");
    sub->callback([&which, name] { which = name; });
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitConfig;
  }
  try {
    RunConfig cfg = parse_config(read_file(config_path));
    CommandOptions opt;
    opt.out = out_dir;
    opt.quiet = quiet;
    if (!resume.empty()) opt.resume = resume;
    if (which == "simulate") return cmd_simulate(cfg, opt);
    if (which == "selfsimilar") return cmd_selfsimilar(cfg, opt);
    if (which == "sweep") return cmd_sweep(cfg, opt);
    return cmd_validate(cfg, opt);
  } catch (const NoProfile& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitNoProfile;
  } catch (const NumericalBreakdown& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitBreakdown;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  }
}

}  // namespace kslab
