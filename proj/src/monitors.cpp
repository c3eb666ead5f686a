#include "kslab/monitors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "kslab/errors.hpp"

namespace kslab {

namespace {
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kInf = std::numeric_limits<double>::infinity();
}  // namespace

std::array<double, kEpsilonLatticeSize> epsilon_lattice() {
  std::array<double, kEpsilonLatticeSize> e{};
  for (std::size_t k = 0; k < e.size(); ++k) e[k] = std::ldexp(1e-3, static_cast<int>(k));
  return e;
}

MonitorSample snapshot_monitors(const State& state, const RadialOperator& op, const Params& params,
                                double epsilon) {
  const RadialField& wf = state.w;
  const auto& g = wf.grid();
  const auto w = wf.values();
  const std::size_t N = g.intervals();
  const int n = params.n;

  MonitorSample m;
  m.t = state.t;
  m.step_index = state.step_index;
  m.epsilon = epsilon;
  m.mass = mass_of_w(wf, n);
  m.u0 = n * w[0];

  const auto dw = radial_derivative(g, w);
  const auto G = op.rate(w);
  const std::size_t last_free = op.dirichlet() ? N - 1 : N;
  m.wt_min = kInf;
  for (std::size_t i = 0; i <= last_free; ++i) {
    m.wt_min = std::min(m.wt_min, G[i]);
    m.scales.wt = std::max(m.scales.wt, std::abs(G[i]));
  }
  m.wr_max = -kInf;
  for (std::size_t i = 1; i <= N; ++i) {
    m.wr_max = std::max(m.wr_max, dw[i]);
    m.scales.wr = std::max(m.scales.wr, std::abs(dw[i]));
  }

  const RadialField uf = u_from_w(wf, n);
  const auto u = uf.values();
  m.mass_quadrature = mass_of_u(uf, n);

  if (!(w[0] > 0.0) || !(m.u0 > 0.0)) {
    m.defined = false;
    m.k_bound = m.estimw_gap = m.grad_ratio = m.r_half = m.r_half_sq_w = kNaN;
    m.j_max = kNaN;
    return m;
  }

  m.scales.gap = 1.0 / *std::min_element(w.begin(), w.end());
  const double inv_u0 = 1.0 / m.u0;
  const double inv_w0 = 1.0 / w[0];
  const auto lattice = epsilon_lattice();
  m.k_bound = kInf;
  m.lower_ratio = kInf;
  m.epsilon_crit = kInf;
  m.j_lattice.fill(-kInf);
  m.gap_lattice.fill(kInf);
  double j_max = -kInf, gap = kInf;
  for (std::size_t i = 1; i <= N; ++i) {
    const double r = g[i];
    if (u[i] > 0.0) m.k_bound = std::min(m.k_bound, (1.0 / u[i] - inv_u0) / (r * r));
    m.lower_ratio = std::min(m.lower_ratio, u[i] * (inv_u0 + r * r));
    m.mass_singularity = std::max(m.mass_singularity, std::pow(r, n) * u[i]);
    const double rw2 = r * w[i] * w[i];
    j_max = std::max(j_max, dw[i] + epsilon * rw2);
    if (rw2 > 0.0) m.epsilon_crit = std::min(m.epsilon_crit, (kJTolerance * m.scales.wr - dw[i]) / rw2);
    const double base = 1.0 / w[i] - inv_w0;
    gap = std::min(gap, base - 0.5 * epsilon * r * r);
    for (std::size_t k = 0; k < lattice.size(); ++k) {
      m.j_lattice[k] = std::max(m.j_lattice[k], dw[i] + lattice[k] * rw2);
      m.gap_lattice[k] = std::min(m.gap_lattice[k], base - 0.5 * lattice[k] * r * r);
    }
  }
  m.k_bound = std::max(0.0, m.k_bound);
  m.j_max = j_max;
  m.estimw_gap = gap;
  m.mass_singularity /= m.mass;
  m.grad_ratio = m.scales.wr / std::pow(w[0], 1.5);
  if (const auto hh = half_height(wf)) {
    m.r_half = hh->r0;
    m.r_half_sq_w = hh->r0_sq_w;
  } else {
    m.r_half = m.r_half_sq_w = kNaN;
  }
  return m;
}

MonitorSample snapshot_monitors(const State& state, const Params& params, double epsilon) {
  return snapshot_monitors(state, RadialOperator(state.w.grid_ptr(), params), params, epsilon);
}

EpsilonResult largest_valid_epsilon(const std::vector<MonitorSample>& samples, double T0,
                                    std::span<const double> lattice) {
  EpsilonResult res;
  double sup = kInf;
  for (const auto& s : samples) {
    if (s.t < T0) continue;
    ++res.samples_used;
    sup = s.defined ? std::min(sup, s.epsilon_crit) : -kInf;
  }
  if (res.samples_used == 0) {
    res.flagged = true;
    return res;
  }
  res.epsilon_sup = std::max(0.0, sup);
  for (std::size_t k = 0; k < lattice.size(); ++k) {
    if (lattice[k] <= sup) {
      res.epsilon_star = lattice[k];
      res.lattice_index = static_cast<int>(k);
    }
  }
  res.flagged = res.lattice_index < 0;
  return res;
}

EpsilonResult largest_valid_epsilon(const std::vector<MonitorSample>& samples, double T0) {
  const auto lattice = epsilon_lattice();
  return largest_valid_epsilon(samples, T0, lattice);
}

std::optional<HalfHeight> half_height(const RadialField& wf) {
  const auto w = wf.values();
  const auto& g = wf.grid();
  if (!(w.front() > 2.0 * w.back())) return std::nullopt;
  const double target = 0.5 * w.front();
  std::size_t lo = 0, hi = w.size() - 1;  // w[lo] > target >= w[hi]
  while (hi - lo > 1) {
    const std::size_t mid = (lo + hi) / 2;
    (w[mid] > target ? lo : hi) = mid;
  }
  const double s = (w[lo] - target) / (w[lo] - w[hi]);
  const double r0 = g[lo] + s * (g[hi] - g[lo]);
  return HalfHeight{r0, r0 * r0 * target};
}

ProfileFit fit_profile_exponent(const RadialField& U, double r_lo, double r_hi) {
  const auto& g = U.grid();
  if (!(r_lo > 0.0 && r_lo < r_hi && r_hi <= g.outer()))
    throw ConfigError("profile window must satisfy 0 < r_lo < r_hi <= R");
  if (r_hi / r_lo < std::sqrt(10.0) * (1.0 - 1e-12))
    throw ConfigError("profile window must span at least half a decade");
  std::vector<double> x, y;
  ProfileFit fit;
  fit.r_lo = r_lo;
  fit.r_hi = r_hi;
  fit.band_lo = kInf;
  fit.band_hi = 0.0;
  for (std::size_t i = 1; i < g.size(); ++i) {
    if (g[i] < r_lo || g[i] > r_hi) continue;
    if (!(U[i] > 0.0)) throw DomainError("profile is not positive inside the fit window");
    x.push_back(std::log(g[i]));
    y.push_back(std::log(U[i]));
    const double band = g[i] * g[i] * U[i];
    fit.band_lo = std::min(fit.band_lo, band);
    fit.band_hi = std::max(fit.band_hi, band);
  }
  const std::size_t m = x.size();
  if (m < 3) throw ConfigError("profile window contains fewer than three nodes");
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < m; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= m;
  my /= m;
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < m; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  fit.p = sxy / sxx;
  const double c = my - fit.p * mx;
  fit.L = std::exp(c);
  double ss = 0;
  for (std::size_t i = 0; i < m; ++i) {
    const double d = y[i] - (c + fit.p * x[i]);
    ss += d * d;
  }
  fit.residual = std::sqrt(ss / m);
  fit.points = m;
  return fit;
}

std::pair<double, double> profile_window(double r_half, double R) {
  return {2.0 * r_half, std::min(0.3 * R, 10.0 * r_half)};
}

std::vector<double> concentration_mass(const RadialField& w, int n, std::span<const double> deltas) {
  std::vector<double> out;
  out.reserve(deltas.size());
  const double area = sphere_area(n);
  for (double d : deltas) {
    if (d < 0.0 || d > w.grid().outer()) throw ConfigError("concentration radius outside the grid");
    out.push_back(area * std::pow(d, n) * w.at(d));
  }
  return out;
}

std::vector<double> concentration_mass_of_u(const RadialField& u, int n, std::span<const double> deltas) {
  return concentration_mass(w_from_u(u, n), n, deltas);
}

TypeRatio type_ratio(const BlowupTrace& trace, double T_est, double decades) {
  if (trace.t.empty()) throw DomainError("type_ratio: empty trace");
  if (!(T_est > trace.t.back())) throw DomainError("type_ratio: T_est must exceed every trace time");
  TypeRatio tr;
  tr.series.reserve(trace.t.size());
  const double d_last = T_est - trace.t.back();
  const double limit = std::pow(10.0, decades) * d_last;
  tr.min = kInf;
  tr.max = -kInf;
  for (std::size_t i = 0; i < trace.t.size(); ++i) {
    const double d = T_est - trace.t[i];
    const double ratio = d * trace.u0[i];
    tr.series.emplace_back(trace.t[i], ratio);
    if (d <= limit) {
      tr.min = std::min(tr.min, ratio);
      tr.max = std::max(tr.max, ratio);
      ++tr.window_points;
    }
  }
  return tr;
}

std::vector<const MonitorSample*> last_decades(const std::vector<MonitorSample>& samples, double T_est,
                                               double decades) {
  std::vector<const MonitorSample*> out;
  if (samples.empty()) return out;
  const double d_last = T_est - samples.back().t;
  const double limit = std::pow(10.0, decades) * d_last;
  for (const auto& s : samples)
    if (T_est - s.t <= limit) out.push_back(&s);
  return out;
}

RunRecorder::RunRecorder(Params params, double epsilon, std::vector<double> deltas)
    : params_(std::move(params)), epsilon_(epsilon), deltas_(std::move(deltas)) {}

void RunRecorder::observe(const State& state, const RadialOperator& op) {
  samples_.push_back(snapshot_monitors(state, op, params_, epsilon_));
  const MonitorSample& m = samples_.back();
  if (!deltas_.empty()) concentration_.push_back(concentration_mass(state.w, params_.n, deltas_));
  if (!m.defined || !std::isfinite(m.r_half)) return;
  const auto& g = state.w.grid();
  std::size_t inside = 0;
  for (std::size_t i = 1; i < g.size() && g[i] < m.r_half; ++i) ++inside;
  if (inside < 8) return;
  final_profile_ = u_from_w(state.w, params_.n);
  final_profile_t_ = state.t;
  final_profile_r_half_ = m.r_half;
}

void RunRecorder::restore(std::vector<MonitorSample> samples, std::vector<std::vector<double>> concentration,
                          std::optional<RadialField> final_profile, double final_t, double final_r_half) {
  samples_ = std::move(samples);
  concentration_ = std::move(concentration);
  final_profile_ = std::move(final_profile);
  final_profile_t_ = final_t;
  final_profile_r_half_ = final_r_half;
}

RunHooks RunRecorder::hooks(int stride) {
  RunHooks h;
  h.sample_stride = stride;
  h.on_sample = [this](const State& s, const RadialOperator& op) { observe(s, op); };
  return h;
}

RunAnalysis analyze_run(const RunResult& result, RunRecorder& recorder, const Params& params) {
  RunAnalysis a;
  const auto& samples = recorder.samples();
  const bool blowup = result.status.kind == BlowupStatus::Kind::Blowup;
  const double t_end = result.final_state.t;
  a.T0 = blowup ? 0.5 * result.status.T_est : 0.5 * t_end;
  a.epsilon = largest_valid_epsilon(samples, a.T0);

  const double m0 = result.final_state.u0_mass;
  const double mq0 = samples.empty() ? 0.0 : samples.front().mass_quadrature;
  a.wt_min_rel = kInf;
  a.wr_max_rel = -kInf;
  a.gap_at_star_min_rel = kInf;
  for (const auto& s : samples) {
    if (m0 > 0) a.mass_drift = std::max(a.mass_drift, std::abs(s.mass - m0) / m0);
    if (mq0 > 0) a.mass_quadrature_drift = std::max(a.mass_quadrature_drift, std::abs(s.mass_quadrature - mq0) / mq0);
    if (s.scales.wt > 0) a.wt_min_rel = std::min(a.wt_min_rel, s.wt_min / s.scales.wt);
    if (s.scales.wr > 0) a.wr_max_rel = std::max(a.wr_max_rel, s.wr_max / s.scales.wr);
    a.mass_singularity_C = std::max(a.mass_singularity_C, s.mass_singularity);
    if (s.t >= a.T0 && s.defined && a.epsilon.lattice_index >= 0)
      a.gap_at_star_min_rel = std::min(a.gap_at_star_min_rel, s.gap_lattice[a.epsilon.lattice_index] / s.scales.gap);
  }
  if (!std::isfinite(a.wt_min_rel)) a.wt_min_rel = 0.0;
  if (!std::isfinite(a.wr_max_rel)) a.wr_max_rel = 0.0;
  if (!std::isfinite(a.gap_at_star_min_rel)) a.gap_at_star_min_rel = 0.0;

  if (const auto& U = recorder.final_profile()) {
    const auto [lo, hi] = profile_window(recorder.final_profile_r_half(), params.outer_radius());
    try {
      a.profile_fit = fit_profile_exponent(*U, lo, hi);
    } catch (const Error& e) {
      a.profile_note = e.what();
    }
  } else {
    a.profile_note = "no snapshot resolved the half-height radius with 8 nodes";
  }
  if (blowup && result.status.T_est > result.trace.t.back()) a.type = type_ratio(result.trace, result.status.T_est);
  return a;
}

}  // namespace kslab
