#pragma once

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "kslab/model.hpp"

namespace kslab {

struct StepperConfig {
  double dt_init = 1e-4;
  double dt_floor = 0.0;  // 0 selects cfl_target / u_blowup_threshold
  double dt_max = 1e-2;
  double cfl_target = 0.005;
  double u_blowup_threshold = 1e8;
  double t_max = 50.0;

  double effective_dt_floor() const {
    return dt_floor > 0.0 ? dt_floor : cfl_target / u_blowup_threshold;
  }
};

/// Throws ConfigError when the configuration is inconsistent.
void validate(const StepperConfig& config);

/// The semi-discrete form of the transformed equation on one grid:
///   w_t = A w + f(w),  A = radial Laplacian in n+2 dimensions (finite volumes),
///   f(w) = n (w + b r w_r)(w - mu_tilde) = u (w - mu_tilde) with w_r upwinded.
/// Row N carries the outer boundary condition: a Dirichlet pin (ball, pinned
/// whole space) or a zero-flux condition (Neumann whole space).
class RadialOperator {
 public:
  RadialOperator(GridPtr grid, const Params& params);

  const RadialGrid& grid() const { return *grid_; }
  bool dirichlet() const { return dirichlet_; }

  /// (A w)_i; zero in the pinned row.
  std::vector<double> diffusion(std::span<const double> w) const;
  /// f(w)_i; zero in the pinned row.
  std::vector<double> reaction(std::span<const double> w) const;
  /// Discrete w_t = A w + f(w).
  std::vector<double> rate(std::span<const double> w) const;
  /// Largest dt for which the explicit upwind drift keeps the update monotone.
  double drift_dt_limit(std::span<const double> w) const;
  /// Solve (I - dt A) x = rhs in place (pinned row: x_N = rhs_N).
  void implicit_solve(std::vector<double>& rhs, double dt) const;

 private:
  GridPtr grid_;
  int n_;
  double mu_tilde_;
  bool dirichlet_;
  std::vector<double> lower_;  // coupling to node i-1
  std::vector<double> upper_;  // coupling to node i+1
  mutable std::vector<double> scratch_;
};

/// One IMEX step: implicit diffusion, explicit reaction evaluated at the current state.
/// Throws NumericalBreakdown when the result is not finite.
State step(const State& state, double dt, const Params& params, const StepperConfig& config);
State step(const State& state, double dt, const RadialOperator& op);

struct BlowupStatus {
  enum class Kind { Blowup, NoBlowupBy, Inconclusive };
  Kind kind = Kind::Inconclusive;
  double T_est = 0.0;
  double T_err = 0.0;
  double t_max = 0.0;           // NoBlowupBy: last time reached
  double fit_residual = 0.0;    // relative RMS residual of the 1/u(0,t) line
  bool low_confidence = false;  // residual above 1e-2
  std::string reason;
  std::vector<std::pair<double, double>> trace_tail;
};

std::string kind_name(BlowupStatus::Kind kind);

/// Time series of (t, u(0,t)) plus the step size the controller would take next.
struct BlowupTrace {
  std::vector<double> t;
  std::vector<double> u0;
  double next_dt = 0.0;
};

struct LineFit {
  double T_est = 0.0;
  double T_err = 0.0;
  double relative_residual = 0.0;
};

/// Least-squares line through (t, 1/u0) and its zero crossing, with a delta-method error.
LineFit fit_inverse_growth(std::span<const double> t, std::span<const double> u0);

/// Blowup iff u(0,t) reached the threshold while dt sits at the floor; T from a
/// linear fit of 1/u(0,t) over the last decade of growth. Needs >= 8 samples.
BlowupStatus detect_blowup(const BlowupTrace& trace, const StepperConfig& config);

struct StepInfo {
  double dt = 0.0;
  bool at_floor = false;
};

struct RunHooks {
  int sample_stride = 10;
  bool sample_start = true;  // false when resuming: the start state was already sampled
  std::function<void(const State&, const RadialOperator&)> on_sample;
  int checkpoint_stride = 0;  // 0 disables
  std::function<void(const State&, const BlowupTrace&)> on_checkpoint;
};

enum class StopReason { Threshold, TimeLimit, DtFloor, Breakdown };
std::string stop_name(StopReason reason);

struct RunResult {
  BlowupStatus status;
  State final_state;
  BlowupTrace trace;  // one entry per step, starting with the initial state
  StopReason stop = StopReason::TimeLimit;
  std::string breakdown_message;
  long steps = 0;
  double boundary_activity = 0.0;  // max |w_t(R^-)| / |w_t(0)| seen at samples
  bool boundary_flag = false;
};

/// Start state from initial data: w = w_from_u(u0).
State initial_state(const RadialField& u0, const Params& params);

/// Advance until blowup detection, t_max, or dt at the floor. Samples are taken at
/// step indices divisible by the stride (including the start state).
RunResult run(const State& start, const Params& params, const StepperConfig& config,
              const RunHooks& hooks = {}, BlowupTrace history = {});

}  // namespace kslab
