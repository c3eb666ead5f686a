#include "kslab/selfsimilar.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <future>
#include <limits>
#include <sstream>
#include <thread>

#include <boost/math/tools/roots.hpp>
#include <boost/numeric/odeint.hpp>

#include "kslab/errors.hpp"

namespace kslab {

namespace odeint = boost::numeric::odeint;

namespace {

using Vec2 = std::array<double, 2>;

struct ProfileOde {
  int n;
  void operator()(const Vec2& x, Vec2& dx, double rho) const {
    dx[0] = x[1];
    dx[1] = profile_rhs(rho, x[0], x[1], n);
  }
};

void push_sample(ProfileSolution& s, double rho, const Vec2& x) {
  const int n = s.n;
  const double dd = profile_rhs(rho, x[0], x[1], n);
  s.rho.push_back(rho);
  s.phi.push_back(x[0]);
  s.dphi.push_back(x[1]);
  s.V.push_back(rho * x[1] + n * x[0]);
  s.dV.push_back((n + 1) * x[1] + rho * dd);
}

double hermite(const std::vector<double>& x, const std::vector<double>& f, const std::vector<double>& df,
               double r) {
  if (x.empty() || r < 0.0 || r > x.back() * (1.0 + 1e-14))
    throw DomainError("profile evaluated outside its computed range");
  if (r >= x.back()) return f.back();
  const auto it = std::upper_bound(x.begin(), x.end(), r);
  const std::size_t i = static_cast<std::size_t>(it - x.begin()) - 1;
  const double h = x[i + 1] - x[i];
  const double s = (r - x[i]) / h;
  const double h00 = (1 + 2 * s) * (1 - s) * (1 - s), h10 = s * (1 - s) * (1 - s);
  const double h01 = s * s * (3 - 2 * s), h11 = s * s * (s - 1);
  return h00 * f[i] + h10 * h * df[i] + h01 * f[i + 1] + h11 * h * df[i + 1];
}

// Relative variation of rho^2 phi over rho in [lo, hi].
double plateau(const ProfileSolution& s, double lo, double hi) {
  double mn = std::numeric_limits<double>::infinity(), mx = -mn, sum = 0;
  int k = 0;
  for (std::size_t i = 0; i < s.rho.size(); ++i) {
    if (s.rho[i] < lo || s.rho[i] > hi) continue;
    const double v = s.rho[i] * s.rho[i] * s.phi[i];
    mn = std::min(mn, v);
    mx = std::max(mx, v);
    sum += v;
    ++k;
  }
  if (k < 2) return std::numeric_limits<double>::infinity();
  return (mx - mn) / std::abs(sum / k);
}

// Intercept of y = a + b x with x = rho^-2 over rho in [lo, hi].
double tail_intercept(const std::vector<double>& rho, const std::vector<double>& f, double lo, double hi) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int m = 0;
  for (std::size_t i = 0; i < rho.size(); ++i) {
    if (rho[i] < lo || rho[i] > hi) continue;
    const double x = 1.0 / (rho[i] * rho[i]);
    const double y = rho[i] * rho[i] * f[i];
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    ++m;
  }
  const double b = (m * sxy - sx * sy) / (m * sxx - sx * sx);
  return (sy - b * sx) / m;
}

}  // namespace

double profile_rhs(double rho, double phi, double dphi, int n) {
  if (rho == 0.0) return (phi - n * phi * phi) / (n + 2);
  return -((n + 1) / rho - 0.5 * rho) * dphi + phi - n * (phi + rho * dphi / n) * phi;
}

std::string classification_name(Classification c) {
  switch (c) {
    case Classification::Decaying: return "decaying";
    case Classification::Homogeneous: return "homogeneous";
    case Classification::Crossing: return "crossing";
    case Classification::Diverging: return "diverging";
  }
  return "unknown";
}

double ProfileSolution::phi_at(double r) const { return hermite(rho, phi, dphi, r); }
double ProfileSolution::V_at(double r) const { return hermite(rho, V, dV, r); }

ProfileSolution shoot(double alpha, int n, const ShootOptions& o) {
  if (!(alpha > 0.0)) throw ConfigError("shoot: alpha must be positive");
  if (n < 2) throw ConfigError("shoot: dimension must be >= 2");
  ProfileSolution s;
  s.n = n;
  s.alpha = alpha;
  const bool homogeneous = std::abs(alpha * n - 1.0) <= o.homogeneous_tol;

  auto stepper = odeint::make_dense_output(o.abs_tol, o.rel_tol, odeint::runge_kutta_dopri5<Vec2>());
  const ProfileOde ode{n};
  stepper.initialize(Vec2{alpha, 0.0}, 0.0, 1e-3);
  push_sample(s, 0.0, Vec2{alpha, 0.0});
  long k = 1;
  bool stopped = false;
  while (!stopped && s.rho.back() < o.rho_max) {
    stepper.do_step(ode);
    const double t1 = stepper.current_time();
    const Vec2& cur = stepper.current_state();
    if (!std::isfinite(cur[0]) || !std::isfinite(cur[1])) {
      s.classification = Classification::Diverging;
      s.diagnostics = "integrator produced a non-finite state";
      stopped = true;
      break;
    }
    for (;;) {
      double r = std::min(k * o.sample_step, o.rho_max);
      if (r > t1 || s.rho.back() >= o.rho_max) break;
      Vec2 x;
      stepper.calc_state(r, x);
      push_sample(s, r, x);
      ++k;
      if (std::abs(x[0]) > o.bound || std::abs(x[1]) > o.bound) {
        s.classification = Classification::Diverging;
        s.diagnostics = "profile exceeded the divergence bound";
        stopped = true;
      } else if (!homogeneous && x[0] <= 0.0) {
        s.classification = Classification::Crossing;
        s.diagnostics = "profile crossed zero";
        stopped = true;
      } else if (!homogeneous && x[1] > 0.0) {
        s.classification = Classification::Diverging;
        s.diagnostics = "profile turned upward";
        stopped = true;
      }
      if (stopped) break;
    }
  }
  s.rho_reached = s.rho.back();
  if (stopped) return s;
  if (homogeneous) {
    s.classification = Classification::Homogeneous;
    s.diagnostics = "alpha = 1/n";
    return s;
  }
  s.plateau_variation = plateau(s, 0.1 * o.rho_max, o.rho_max);
  if (s.plateau_variation < o.plateau_tol) {
    s.classification = Classification::Decaying;
    s.ell = s.rho.back() * s.rho.back() * s.phi.back();
    s.L = s.rho.back() * s.rho.back() * s.V.back();
    s.diagnostics = "rho^2 phi settled";
  } else {
    const std::size_t i = std::lower_bound(s.rho.begin(), s.rho.end(), 0.1 * o.rho_max) - s.rho.begin();
    const bool falling = s.rho.back() * s.rho.back() * s.phi.back() < s.rho[i] * s.rho[i] * s.phi[i];
    s.classification = falling ? Classification::Crossing : Classification::Diverging;
    s.diagnostics = falling ? "decays faster than rho^-2" : "rho^2 phi keeps growing";
  }
  return s;
}

std::vector<std::pair<double, Classification>> scan_alpha(std::pair<double, double> bracket, int n, int count,
                                                          const ShootOptions& options) {
  if (count < 2 || !(bracket.first > 0.0) || !(bracket.second > bracket.first))
    throw ConfigError("scan_alpha: need 0 < lo < hi and count >= 2");
  std::vector<double> alphas(count);
  const double ratio = std::log(bracket.second / bracket.first);
  for (int i = 0; i < count; ++i) alphas[i] = bracket.first * std::exp(ratio * i / (count - 1));
  alphas.back() = bracket.second;
  std::vector<std::pair<double, Classification>> out(count);
  const int workers = std::max(1u, std::thread::hardware_concurrency());
  std::vector<std::future<void>> jobs;
  for (int w = 0; w < workers; ++w) {
    jobs.push_back(std::async(std::launch::async, [&, w] {
      for (int i = w; i < count; i += workers) out[i] = {alphas[i], shoot(alphas[i], n, options).classification};
    }));
  }
  for (auto& j : jobs) j.get();
  return out;
}

std::pair<double, double> default_bracket(int n) { return {1.1 / n, 10.0}; }

ProfileSearch find_profile(std::pair<double, double> bracket, int n, const ProfileSearchOptions& o) {
  auto [a, b] = bracket;
  if (!(a > 0.0 && b > a)) throw ConfigError("find_profile: bracket must satisfy 0 < lo < hi");
  ProfileSearch res;
  ProfileSolution lo = shoot(a, n, o.shoot), hi = shoot(b, n, o.shoot);
  res.log.emplace_back(a, lo.classification);
  res.log.emplace_back(b, hi.classification);
  if (lo.classification == hi.classification) {
    std::ostringstream os;
    os << "invalid bracket: both ends classify as " << classification_name(lo.classification);
    throw ConfigError(os.str());
  }
  for (const auto* s : {&lo, &hi}) {
    if (s->classification == Classification::Decaying) {
      res.found = true;
      res.solution = *s;
      res.message = "bracket endpoint is decaying";
      return res;
    }
  }
  for (int k = 0; k < o.max_bisections; ++k) {
    const double m = 0.5 * (a + b);
    if (!(m > a && m < b)) break;
    ProfileSolution s = shoot(m, n, o.shoot);
    res.log.emplace_back(m, s.classification);
    if (s.classification == Classification::Decaying) {
      s.bracket_width = b - a;
      res.found = true;
      res.solution = std::move(s);
      res.message = "decaying shot during bisection";
      return res;
    }
    if (s.classification == lo.classification) {
      a = m;
      lo = std::move(s);
    } else {
      b = m;
      hi = std::move(s);
    }
  }

  // Last radius where the bracketing shots agree.
  std::size_t km = 0;
  const std::size_t common = std::min(lo.rho.size(), hi.rho.size());
  for (std::size_t k = 1; k < common; ++k) {
    if (std::abs(lo.phi[k] - hi.phi[k]) > o.match_tol * std::abs(lo.phi[k])) break;
    km = k;
  }
  const double rho_m = lo.rho[km];
  ProfileSolution& sol = res.solution;
  sol.n = n;
  sol.alpha = 0.5 * (a + b);
  sol.bracket_width = b - a;
  sol.rho_reached = std::max(lo.rho_reached, hi.rho_reached);
  sol.match_rho = rho_m;
  if (rho_m < o.min_match_rho) {
    std::ostringstream os;
    os << "bracketing shots separate at rho = " << rho_m << "; no decaying profile resolved";
    res.message = os.str();
    sol.classification = lo.classification;
    return res;
  }
  const Vec2 fwd{0.5 * (lo.phi[km] + hi.phi[km]), 0.5 * (lo.dphi[km] + hi.dphi[km])};
  const double rho_t = o.tail_rho_max;
  const double c_coef = (n - 2);
  const ProfileOde ode{n};
  auto tail_start = [&](double ell) {
    const double c = c_coef * ell * (2.0 - ell);
    return Vec2{ell / (rho_t * rho_t) + c / std::pow(rho_t, 4), -2 * ell / std::pow(rho_t, 3) - 4 * c / std::pow(rho_t, 5)};
  };
  auto inward = [&](double ell) {
    Vec2 x = tail_start(ell);
    try {
      odeint::integrate_adaptive(odeint::make_controlled(1e-13, 1e-13, odeint::runge_kutta_dopri5<Vec2>()), ode, x,
                                 rho_t, rho_m, -0.01);
    } catch (const std::exception&) {
      return Vec2{std::numeric_limits<double>::quiet_NaN(), 0.0};
    }
    return x;
  };
  auto F = [&](double ell) { return inward(ell)[0] - fwd[0]; };

  // Log scan for a sign change, then refine.
  double e0 = 0, e1 = 0;
  bool bracketed = false;
  double prev_e = 0, prev_f = std::numeric_limits<double>::quiet_NaN();
  for (int i = 0; i <= 80; ++i) {
    const double e = 1e-3 * std::pow(10.0, 6.0 * i / 80);
    const double f = F(e);
    if (std::isfinite(f) && std::isfinite(prev_f) && (f > 0) != (prev_f > 0)) {
      e0 = prev_e;
      e1 = e;
      bracketed = true;
      break;
    }
    prev_e = e;
    prev_f = f;
  }
  if (!bracketed) {
    res.message = "no tail amplitude matches the forward shot";
    sol.classification = lo.classification;
    return res;
  }
  std::uintmax_t iters = 100;
  const auto root = boost::math::tools::toms748_solve(F, e0, e1, boost::math::tools::eps_tolerance<double>(50), iters);
  const double ell = 0.5 * (root.first + root.second);

  // Assemble: forward part up to rho_m, inward tail beyond.
  for (std::size_t k = 0; k <= km; ++k)
    push_sample(sol, lo.rho[k], Vec2{0.5 * (lo.phi[k] + hi.phi[k]), 0.5 * (lo.dphi[k] + hi.dphi[k])});
  std::vector<double> times;
  times.push_back(rho_t);
  for (long k = static_cast<long>(std::floor((rho_t - rho_m) / o.tail_step)); k >= 1; --k) {
    const double r = rho_m + k * o.tail_step;
    if (r < rho_t - 1e-9) times.push_back(r);
  }
  times.push_back(rho_m);
  std::vector<std::pair<double, Vec2>> tail;
  Vec2 x = tail_start(ell);
  odeint::integrate_times(odeint::make_controlled(1e-13, 1e-13, odeint::runge_kutta_dopri5<Vec2>()), ode, x,
                          times.begin(), times.end(), -0.01,
                          [&](const Vec2& st, double r) { tail.emplace_back(r, st); });
  std::reverse(tail.begin(), tail.end());
  sol.match_slope_error = std::abs(tail.front().second[1] - fwd[1]) / std::abs(fwd[1]);
  for (std::size_t k = 1; k < tail.size(); ++k) push_sample(sol, tail[k].first, tail[k].second);

  sol.plateau_variation = plateau(sol, 0.1 * rho_t, rho_t);
  sol.ell = tail_intercept(sol.rho, sol.phi, 0.1 * rho_t, rho_t);
  sol.L = tail_intercept(sol.rho, sol.V, 0.1 * rho_t, rho_t);
  bool positive = true, monotone = true;
  for (std::size_t k = 0; k < sol.rho.size(); ++k) {
    positive = positive && sol.phi[k] > 0.0 && sol.V[k] > 0.0;
    if (k > 0) monotone = monotone && sol.phi[k] <= sol.phi[k - 1] && sol.V[k] <= sol.V[k - 1];
  }
  const double rel_L = n > 2 ? std::abs(sol.L - (n - 2) * sol.ell) / ((n - 2) * sol.ell) : 1.0;
  std::ostringstream os;
  os << "alpha = " << sol.alpha << " (bracket width " << sol.bracket_width << "), matched at rho = " << rho_m
     << ", ell = " << sol.ell << ", L = " << sol.L << ", plateau variation " << sol.plateau_variation
     << ", slope jump " << sol.match_slope_error;
  if (positive && sol.plateau_variation < o.shoot.plateau_tol && rel_L <= 0.01) {
    sol.classification = Classification::Decaying;
    sol.diagnostics = monotone ? "radially nonincreasing" : "not monotone";
    res.found = true;
    res.message = os.str();
  } else {
    sol.classification = lo.classification;
    res.message = "tail failed the decay checks: " + os.str();
  }
  return res;
}

ProfileSearch search_profile(std::pair<double, double> bracket, int n, int scan_points,
                             const ProfileSearchOptions& options) {
  const auto scan = scan_alpha(bracket, n, scan_points, options.shoot);
  for (std::size_t i = 0; i + 1 < scan.size(); ++i) {
    if (scan[i].second == scan[i + 1].second) continue;
    ProfileSearch res = find_profile({scan[i].first, scan[i + 1].first}, n, options);
    res.log.insert(res.log.begin(), scan.begin(), scan.end());
    return res;
  }
  ProfileSearch res;
  res.log = scan;
  res.message = "no classification change across the bracket (every shot " +
                classification_name(scan.front().second) + "); no decaying profile";
  return res;
}

RadialField seed_pde_from_profile(const ProfileSolution& profile, double T0, const GridPtr& grid) {
  if (profile.classification != Classification::Decaying)
    throw ConfigError("seed_pde_from_profile needs a decaying profile");
  if (!(T0 > 0.0)) throw ConfigError("seed_pde_from_profile: T0 must be positive");
  const double s = std::sqrt(T0);
  if (grid->outer() / s > profile.rho_max())
    throw DomainError("grid extends beyond the computed profile range");
  std::vector<double> u(grid->size());
  for (std::size_t i = 0; i < u.size(); ++i) u[i] = profile.V_at((*grid)[i] / s) / T0;
  return RadialField(grid, std::move(u));
}

}  // namespace kslab
