#include "kslab/solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "kslab/errors.hpp"

namespace kslab {

namespace {

// b^m - a^m without cancellation for b close to a.
double power_difference(double a, double b, int m) {
  double sum = 0.0;
  for (int j = 0; j < m; ++j) sum += std::pow(a, j) * std::pow(b, m - 1 - j);
  return (b - a) * sum;
}

double central_density(const State& s, int n) { return n * s.w[0]; }

}  // namespace

void validate(const StepperConfig& c) {
  if (!(c.cfl_target > 0.0 && c.cfl_target <= 0.5)) throw ConfigError("stepper.cfl: must lie in (0, 0.5]");
  if (!(c.dt_init > 0.0)) throw ConfigError("stepper.dt_init: must be positive");
  if (!(c.dt_max >= c.dt_init)) throw ConfigError("stepper.dt_max: must be >= dt_init");
  if (!(c.u_blowup_threshold > 0.0)) throw ConfigError("stepper.u_blowup_threshold: must be positive");
  if (!(c.t_max > 0.0)) throw ConfigError("stepper.t_max: must be positive");
  if (c.dt_floor < 0.0) throw ConfigError("stepper.dt_floor: must be nonnegative");
  if (!(c.effective_dt_floor() < c.dt_init)) throw ConfigError("stepper.dt_floor: must be below dt_init");
}

RadialOperator::RadialOperator(GridPtr grid, const Params& params)
    : grid_(std::move(grid)),
      n_(params.n),
      mu_tilde_(params.mu_tilde),
      dirichlet_(params.ball() || params.far_field == FarField::Pin) {
  const auto& g = *grid_;
  const std::size_t N = g.intervals();
  const int m = n_ + 2;
  lower_.assign(N + 1, 0.0);
  upper_.assign(N + 1, 0.0);
  scratch_.resize(N + 1);
  std::vector<double> face(N), coupling(N);
  for (std::size_t i = 0; i < N; ++i) {
    face[i] = 0.5 * (g[i] + g[i + 1]);
    coupling[i] = std::pow(face[i], m - 1) / (g[i + 1] - g[i]);
  }
  for (std::size_t i = 0; i <= N; ++i) {
    const double inner = i == 0 ? 0.0 : face[i - 1];
    const double outer = i == N ? g[N] : face[i];
    const double volume = power_difference(inner, outer, m) / m;
    if (i > 0) lower_[i] = coupling[i - 1] / volume;
    if (i < N) upper_[i] = coupling[i] / volume;
  }
  if (dirichlet_) lower_[N] = 0.0;
}

std::vector<double> RadialOperator::diffusion(std::span<const double> w) const {
  const std::size_t N = grid_->intervals();
  std::vector<double> out(N + 1, 0.0);
  for (std::size_t i = 0; i <= N; ++i) {
    double v = 0.0;
    if (i > 0) v += lower_[i] * (w[i - 1] - w[i]);
    if (i < N) v += upper_[i] * (w[i + 1] - w[i]);
    out[i] = v;
  }
  if (dirichlet_) out[N] = 0.0;
  return out;
}

std::vector<double> RadialOperator::reaction(std::span<const double> w) const {
  const auto& g = *grid_;
  const std::size_t N = g.intervals();
  std::vector<double> out(N + 1, 0.0);
  for (std::size_t i = 0; i < N; ++i) {
    const double wr = (w[i + 1] - w[i]) / (g[i + 1] - g[i]);
    const double u = g[i] * wr + n_ * w[i];
    out[i] = u * (w[i] - mu_tilde_);
  }
  out[N] = dirichlet_ ? 0.0 : n_ * w[N] * (w[N] - mu_tilde_);
  return out;
}

std::vector<double> RadialOperator::rate(std::span<const double> w) const {
  auto out = diffusion(w);
  const auto f = reaction(w);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += f[i];
  return out;
}

double RadialOperator::drift_dt_limit(std::span<const double> w) const {
  const auto& g = *grid_;
  double limit = std::numeric_limits<double>::infinity();
  for (std::size_t i = 1; i < g.intervals(); ++i) {
    const double speed = g[i] * std::abs(w[i] - mu_tilde_) / (g[i + 1] - g[i]);
    if (speed > 0.0) limit = std::min(limit, 0.5 / speed);
  }
  return limit;
}

void RadialOperator::implicit_solve(std::vector<double>& rhs, double dt) const {
  const std::size_t N = grid_->intervals();
  auto& cp = scratch_;
  // Thomas algorithm; the matrix is an M-matrix so no pivoting is needed.
  double diag = 1.0 + dt * upper_[0];
  cp[0] = -dt * upper_[0] / diag;
  rhs[0] /= diag;
  for (std::size_t i = 1; i <= N; ++i) {
    const double sub = -dt * lower_[i];
    const double sup = i < N ? -dt * upper_[i] : 0.0;
    const double d = (i == N && dirichlet_) ? 1.0 : 1.0 + dt * (lower_[i] + (i < N ? upper_[i] : 0.0));
    const double m = d - sub * cp[i - 1];
    cp[i] = sup / m;
    rhs[i] = (rhs[i] - sub * rhs[i - 1]) / m;
  }
  for (std::size_t i = N; i-- > 0;) rhs[i] -= cp[i] * rhs[i + 1];
}

State step(const State& state, double dt, const RadialOperator& op) {
  if (!(dt > 0.0)) throw ConfigError("step: dt must be positive");
  const auto w = state.w.values();
  const auto f = op.reaction(w);
  std::vector<double> next(w.size());
  for (std::size_t i = 0; i < w.size(); ++i) next[i] = w[i] + dt * f[i];
  op.implicit_solve(next, dt);
  for (std::size_t i = 0; i < next.size(); ++i) {
    if (!std::isfinite(next[i])) {
      std::ostringstream os;
      os << "implicit solve produced a non-finite value at node " << i << " (t = " << state.t << ")";
      throw NumericalBreakdown(os.str());
    }
  }
  return State{RadialField(state.w.grid_ptr(), std::move(next)), state.t + dt, state.u0_mass,
               state.step_index + 1};
}

State step(const State& state, double dt, const Params& params, const StepperConfig& config) {
  validate(config);
  return step(state, dt, RadialOperator(state.w.grid_ptr(), params));
}

std::string kind_name(BlowupStatus::Kind kind) {
  switch (kind) {
    case BlowupStatus::Kind::Blowup: return "blowup";
    case BlowupStatus::Kind::NoBlowupBy: return "no_blowup_by";
    case BlowupStatus::Kind::Inconclusive: return "inconclusive";
  }
  return "unknown";
}

std::string stop_name(StopReason reason) {
  switch (reason) {
    case StopReason::Threshold: return "threshold";
    case StopReason::TimeLimit: return "t_max";
    case StopReason::DtFloor: return "dt_floor";
    case StopReason::Breakdown: return "breakdown";
  }
  return "unknown";
}

LineFit fit_inverse_growth(std::span<const double> t, std::span<const double> u0) {
  const std::size_t m = t.size();
  if (m < 3 || u0.size() != m) throw ConfigError("fit_inverse_growth needs >= 3 matched samples");
  // Centre times for conditioning: y = a + b (t - tc).
  double tc = 0.0;
  for (double x : t) tc += x;
  tc /= m;
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < m; ++i) {
    const double x = t[i] - tc, y = 1.0 / u0[i];
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double det = m * sxx - sx * sx;
  const double b = (m * sxy - sx * sy) / det;
  const double a = (sy - b * sx) / m;
  double ssr = 0.0, ymag = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    const double x = t[i] - tc, y = 1.0 / u0[i];
    const double r = y - (a + b * x);
    ssr += r * r;
    ymag += std::abs(y);
  }
  const double sigma2 = ssr / std::max<double>(1.0, static_cast<double>(m) - 2.0);
  const double var_a = sigma2 * sxx / det;
  const double var_b = sigma2 * m / det;
  const double cov_ab = -sigma2 * sx / det;
  const double root = -a / b;  // relative to tc
  LineFit fit;
  fit.T_est = tc + root;
  fit.T_err = std::sqrt(std::max(0.0, (var_a + root * root * var_b + 2.0 * root * cov_ab) / (b * b)));
  fit.relative_residual = std::sqrt(ssr / m) / (ymag / m);
  return fit;
}

BlowupStatus detect_blowup(const BlowupTrace& trace, const StepperConfig& config) {
  const std::size_t m = trace.t.size();
  if (m < 8 || trace.u0.size() != m) throw ConfigError("detect_blowup needs at least 8 trace samples");
  BlowupStatus st;
  const double u_last = trace.u0.back();
  std::size_t first = m - 1;
  while (first > 0 && trace.u0[first - 1] >= u_last / 10.0) --first;
  if (m - first < 8) first = m - 8;
  for (std::size_t i = first; i < m; ++i) st.trace_tail.emplace_back(trace.t[i], trace.u0[i]);

  const bool reached = u_last >= config.u_blowup_threshold;
  const bool at_floor = trace.next_dt <= config.effective_dt_floor() * (1.0 + 1e-12);
  if (!reached) {
    st.kind = BlowupStatus::Kind::NoBlowupBy;
    st.t_max = trace.t.back();
    st.reason = "u(0,t) stayed below the blowup threshold";
    return st;
  }
  if (!at_floor) {
    st.kind = BlowupStatus::Kind::Inconclusive;
    st.reason = "threshold reached but the step size is not at the floor";
    return st;
  }
  for (std::size_t i = first + 1; i < m; ++i) {
    if (!(trace.u0[i] > trace.u0[i - 1])) {
      st.kind = BlowupStatus::Kind::Inconclusive;
      st.reason = "non-monotone growth in the trace tail";
      return st;
    }
  }
  const std::span<const double> ts(trace.t.data() + first, m - first);
  const std::span<const double> us(trace.u0.data() + first, m - first);
  const LineFit fit = fit_inverse_growth(ts, us);
  st.fit_residual = fit.relative_residual;
  st.low_confidence = fit.relative_residual > 1e-2;
  if (!(fit.T_est > trace.t.back()) || !std::isfinite(fit.T_est)) {
    st.kind = BlowupStatus::Kind::Inconclusive;
    st.reason = "extrapolated blowup time does not exceed the last sample";
    return st;
  }
  st.kind = BlowupStatus::Kind::Blowup;
  st.T_est = fit.T_est;
  st.T_err = fit.T_err;
  st.reason = st.low_confidence ? "threshold reached; 1/u(0,t) is not linear (low confidence)"
                                : "threshold reached with dt at the floor";
  return st;
}

State initial_state(const RadialField& u0, const Params& params) {
  auto w = w_from_u(u0, params.n);
  if (params.ball()) {
    // Enforce the boundary value exactly.
    std::vector<double> v(w.values().begin(), w.values().end());
    v.back() = params.mu_tilde;
    w = RadialField(u0.grid_ptr(), std::move(v));
  }
  const double mass = mass_of_w(w, params.n);
  return State{std::move(w), 0.0, mass, 0};
}

RunResult run(const State& start, const Params& params, const StepperConfig& config, const RunHooks& hooks,
              BlowupTrace history) {
  validate(config);
  RadialOperator op(start.w.grid_ptr(), params);
  RunResult res;
  res.trace = std::move(history);
  const int n = params.n;
  const double floor = config.effective_dt_floor();
  const int stride = std::max(1, hooks.sample_stride);
  const bool watch_boundary = !params.ball() && op.dirichlet();
  const std::size_t N = start.w.grid().intervals();

  State s = start;
  if (res.trace.t.empty() || res.trace.t.back() != s.t) {
    res.trace.t.push_back(s.t);
    res.trace.u0.push_back(central_density(s, n));
  }

  auto proposal = [&](const State& st) {
    const auto w = st.w.values();
    const auto& g = st.w.grid();
    double umax = n * w[0];
    for (std::size_t i = 0; i < N; ++i) umax = std::max(umax, g[i] * (w[i + 1] - w[i]) / (g[i + 1] - g[i]) + n * w[i]);
    double dt = std::min(config.dt_max, config.cfl_target / std::max(umax, 1e-300));
    return std::min(dt, op.drift_dt_limit(w));
  };
  long last_sampled = hooks.sample_start ? -1 : s.step_index;
  auto sample = [&](const State& st) {
    if (watch_boundary) {
      const auto G = op.rate(st.w.values());
      const double act = std::abs(G[N - 1]) / std::max(std::abs(G[0]), 1e-300);
      res.boundary_activity = std::max(res.boundary_activity, act);
    }
    if (hooks.on_sample) hooks.on_sample(st, op);
    last_sampled = st.step_index;
  };

  if (hooks.sample_start && s.step_index % stride == 0) sample(s);
  const long first_index = s.step_index;
  while (true) {
    if (s.t >= config.t_max * (1.0 - 1e-14)) {
      res.stop = StopReason::TimeLimit;
      break;
    }
    const double dt_prop = proposal(s);
    res.trace.next_dt = dt_prop;
    if (dt_prop < floor) {
      res.stop = StopReason::DtFloor;
      break;
    }
    double dt = dt_prop;
    if (s.step_index == 0) dt = std::min(dt, config.dt_init);
    dt = std::min(dt, config.t_max - s.t);
    try {
      s = step(s, dt, op);
    } catch (const NumericalBreakdown& e) {
      res.stop = StopReason::Breakdown;
      res.breakdown_message = e.what();
      break;
    }
    res.trace.t.push_back(s.t);
    res.trace.u0.push_back(central_density(s, n));
    if (s.step_index % stride == 0) sample(s);
    if (hooks.checkpoint_stride > 0 && hooks.on_checkpoint && s.step_index % hooks.checkpoint_stride == 0) {
      hooks.on_checkpoint(s, res.trace);
    }
    if (central_density(s, n) >= config.u_blowup_threshold) {
      res.trace.next_dt = proposal(s);
      res.stop = StopReason::Threshold;
      break;
    }
  }
  if (last_sampled != s.step_index) sample(s);
  res.steps = s.step_index - first_index;
  res.final_state = s;
  res.boundary_flag = res.boundary_activity > 1e-3;

  if (res.trace.t.size() < 8) {
    res.status.kind = BlowupStatus::Kind::Inconclusive;
    res.status.reason = "too few steps to classify the run";
  } else {
    res.status = detect_blowup(res.trace, config);
  }
  if (res.stop == StopReason::Breakdown) {
    res.status.kind = BlowupStatus::Kind::Inconclusive;
    res.status.reason = "numerical breakdown: " + res.breakdown_message;
  } else if (res.stop == StopReason::DtFloor && res.status.kind != BlowupStatus::Kind::Blowup) {
    res.status.kind = BlowupStatus::Kind::Inconclusive;
    res.status.reason = "step size fell below the floor before the threshold was reached";
  }
  return res;
}

}  // namespace kslab
