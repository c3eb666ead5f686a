#include "kslab/initial_data.hpp"

#include <algorithm>
#include <array>
#include <boost/math/tools/roots.hpp>
#include <boost/numeric/odeint.hpp>
#include <cmath>
#include <numbers>
#include <sstream>

#include "kslab/errors.hpp"

namespace kslab {

namespace {

constexpr double kI2RelTol = 1e-8;
constexpr double kLambdaCap = 1e6;
constexpr double kLambdaFloor = 1e-6;

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};

bool i2_passes(const std::vector<double>& z) {
  double lo = 0.0, scale = 0.0;
  for (std::size_t i = 1; i + 1 < z.size(); ++i) {
    lo = std::min(lo, z[i]);
    scale = std::max(scale, std::abs(z[i]));
  }
  return lo >= -kI2RelTol * scale;
}

using EigenState = std::array<double, 2>;

// phi'' + (dim-1)/r phi' + phi = 0, with the symmetric limit phi''(0) = -phi(0)/dim.
struct RadialHelmholtz {
  int dim;
  void operator()(const EigenState& y, EigenState& dy, double r) const {
    dy[0] = y[1];
    dy[1] = r == 0.0 ? -y[0] / dim : -(dim - 1) / r * y[1] - y[0];
  }
};

EigenState advance(const RadialHelmholtz& sys, EigenState y, double r0, double r1) {
  namespace ode = boost::numeric::odeint;
  if (r1 <= r0) return y;
  auto stepper = ode::make_controlled(1e-14, 1e-14, ode::runge_kutta_dopri5<EigenState>());
  ode::integrate_adaptive(stepper, sys, y, r0, r1, (r1 - r0) / 64.0);
  return y;
}

}  // namespace

std::string family_name(const Family& family) {
  return std::visit(overloaded{[](const CosineCap&) { return std::string("cosine_cap"); },
                               [](const QuarticCap&) { return std::string("quartic_cap"); },
                               [](const Gaussian&) { return std::string("gaussian"); },
                               [](const Plateau&) { return std::string("plateau"); },
                               [](const Constant&) { return std::string("constant"); }},
                    family);
}

RadialField sample(const InitialSpec& spec, const GridPtr& grid) {
  if (!(spec.lambda > 0.0)) throw ConfigError("initial data multiplier lambda must be positive");
  const bool ball = is_ball(spec.domain);
  const double R = outer_radius(spec.domain);
  if (std::abs(grid->outer() - R) > 1e-12 * R) throw ConfigError("grid does not span the domain");
  const double lam = spec.lambda;
  const auto& r = grid->nodes();
  std::vector<double> u(r.size());

  auto need_ball = [&](const char* name) {
    if (!ball) throw ConfigError(std::string(name) + " initial data requires a ball domain");
  };

  std::visit(overloaded{
                 [&](const CosineCap& f) {
                   need_ball("cosine_cap");
                   if (!(f.a >= 1.0)) throw ConfigError("cosine_cap offset a must be >= 1");
                   for (std::size_t i = 0; i < r.size(); ++i)
                     u[i] = lam * (f.a + std::cos(std::numbers::pi * r[i] / R));
                 },
                 [&](const QuarticCap&) {
                   need_ball("quartic_cap");
                   for (std::size_t i = 0; i < r.size(); ++i) {
                     const double q = 1.0 - (r[i] / R) * (r[i] / R);
                     u[i] = lam * (1.0 + q * q);
                   }
                 },
                 [&](const Gaussian& f) {
                   if (ball) throw ConfigError("gaussian initial data requires a whole_space domain");
                   if (!(f.width > 0.0)) throw ConfigError("gaussian width must be positive");
                   for (std::size_t i = 0; i < r.size(); ++i) {
                     const double s = r[i] / f.width;
                     u[i] = lam * std::exp(-s * s);
                   }
                 },
                 [&](const Plateau& f) {
                   need_ball("plateau");
                   if (!(f.core > 0.0 && f.core < R)) throw ConfigError("plateau core must lie in (0, R)");
                   for (std::size_t i = 0; i < r.size(); ++i) {
                     const double s = std::clamp((r[i] - f.core) / (R - f.core), 0.0, 1.0);
                     u[i] = lam * (3.0 + std::cos(std::numbers::pi * s)) / 4.0;
                   }
                 },
                 [&](const Constant&) { std::fill(u.begin(), u.end(), lam); },
             },
             spec.family);
  return RadialField(grid, std::move(u));
}

ValidationReport validate_i0(const RadialField& u0) {
  ValidationReport rep;
  const auto v = u0.values();
  const auto& g = u0.grid();
  const auto [mn, mx] = std::minmax_element(v.begin(), v.end());
  const double scale = std::max(std::abs(*mn), std::abs(*mx));
  const double tol = 1e-12 * std::max(scale, 1e-300);
  rep.min_value = *mn;
  rep.scale = scale;
  rep.worst_r = g[static_cast<std::size_t>(mn - v.begin())];
  if (*mn < 0.0) {
    rep.passed = false;
    rep.failures.push_back("u0 takes negative values");
  }
  double worst_rise = 0.0;
  for (std::size_t i = 0; i + 1 < v.size(); ++i) {
    const double rise = v[i + 1] - v[i];
    if (rise > worst_rise) {
      worst_rise = rise;
      rep.worst_r = g[i + 1];
    }
  }
  if (worst_rise > tol) {
    rep.passed = false;
    rep.failures.push_back("u0 is not radially nonincreasing");
  }
  if (*mx - *mn <= tol) {
    rep.passed = false;
    rep.failures.push_back("u0 is constant");
  }
  return rep;
}

std::vector<double> i2_profile(const RadialField& u0, const Params& params) {
  const auto& g = u0.grid();
  const int n = params.n;
  const auto du = radial_derivative(g, u0.values());
  const auto M = cumulative_moment(g, u0.values(), n);
  std::vector<double> z(g.size(), 0.0);
  for (std::size_t i = 1; i < g.size(); ++i) {
    const double rn = std::pow(g[i], n);
    const double excess = M[i] - params.mu * rn / n;
    z[i] = std::pow(g[i], n - 1) * du[i] + u0[i] * excess;
  }
  return z;
}

ValidationReport validate_i2(const RadialField& u0, const Params& params) {
  ValidationReport rep;
  const auto z = i2_profile(u0, params);
  const auto& g = u0.grid();
  double lo = 0.0, scale = 0.0;
  for (std::size_t i = 1; i + 1 < z.size(); ++i) {
    if (z[i] < lo) {
      lo = z[i];
      rep.worst_r = g[i];
    }
    scale = std::max(scale, std::abs(z[i]));
  }
  rep.min_value = lo;
  rep.scale = scale;
  if (lo < -kI2RelTol * scale) {
    rep.passed = false;
    std::ostringstream os;
    os << "i2 violated: min z = " << lo << " at r = " << rep.worst_r << " (scale " << scale << ")";
    rep.failures.push_back(os.str());
  }
  return rep;
}

MinLambdaResult min_lambda_for_i2(const RadialField& phi, const Params& params) {
  if (!params.ball()) throw ConfigError("min_lambda_for_i2 applies to ball domains");
  const auto i0 = validate_i0(phi);
  if (!i0.passed) throw ConfigError("min_lambda_for_i2: phi violates i0 (" + i0.failures.front() + ")");
  const auto& g = phi.grid();
  const double R = g.outer();
  const double phiR = phi.values().back();
  if (!(phiR > 0.0)) throw ConfigError("min_lambda_for_i2: requires phi(R) > 0");
  const auto dphi = radial_derivative(g, phi.values());
  const double range = i0.scale - phi.values().back();
  if (std::abs(dphi.back()) * R > 1e-3 * range) {
    throw ConfigError("min_lambda_for_i2: requires phi_r(R) = 0");
  }

  // z is evaluated for lambda * phi with mu scaled accordingly.
  const Params base = params_from_data(params.n, params.domain, phi);
  std::vector<double> scaled(phi.size());
  auto passes = [&](double lam) {
    for (std::size_t i = 0; i < phi.size(); ++i) scaled[i] = lam * phi[i];
    Params p = base;
    p.mu = lam * base.mu;
    p.mu_tilde = lam * base.mu_tilde;
    return i2_passes(i2_profile(RadialField(phi.grid_ptr(), scaled), p));
  };

  MinLambdaResult res;
  if (!passes(kLambdaCap)) {
    res.message = "no multiplier up to 1e6 satisfies i2";
    return res;
  }
  double lo = kLambdaFloor, hi = kLambdaCap;
  if (passes(lo)) {
    hi = lo;
  } else {
    while (hi / lo > 1.0 + 1e-10) {
      const double mid = std::sqrt(lo * hi);
      (passes(mid) ? hi : lo) = mid;
    }
  }
  res.found = true;
  res.lambda = hi;
  res.lambda_fail = lo;
  res.monotone_spot_check = passes(2.0 * hi) && passes(4.0 * hi) && (hi == kLambdaFloor || !passes(0.5 * hi));
  return res;
}

double first_dirichlet_eigenvalue(int dim, double R) {
  if (dim < 1) throw ConfigError("eigenvalue dimension must be positive");
  if (!(R > 0.0)) throw ConfigError("eigenvalue radius must be positive");
  const RadialHelmholtz sys{dim};
  // March in unit steps to bracket the first zero of the unit-frequency eigenfunction.
  EigenState y{1.0, 0.0};
  double r = 0.0;
  const double step = 0.25;
  while (true) {
    const EigenState next = advance(sys, y, r, r + step);
    if (next[0] <= 0.0) break;
    y = next;
    r += step;
    if (r > 1e3) throw NumericalBreakdown("eigenfunction has no zero below r = 1000");
  }
  const EigenState left = y;
  const double r_left = r;
  auto phi_at = [&](double x) { return advance(sys, left, r_left, x)[0]; };
  boost::uintmax_t iters = 200;
  const auto tol = boost::math::tools::eps_tolerance<double>(52);
  const auto root = boost::math::tools::toms748_solve(phi_at, r_left, r_left + step, tol, iters);
  const double j = 0.5 * (root.first + root.second);
  return (j / R) * (j / R);
}

CriterionReport blowup_criterion(const RadialField& u0, const Params& params) {
  const int n = params.n;
  const auto& g = u0.grid();
  CriterionReport rep;
  rep.mass = mass_of_u(u0, n);
  rep.mu = params.mu;
  if (params.ball()) {
    rep.kind = CriterionKind::Eigenvalue;
    rep.lambda1 = first_dirichlet_eigenvalue(n + 2, params.outer_radius());
    rep.threshold = rep.lambda1;
    rep.sufficient = n >= 3 ? rep.mu >= rep.lambda1 : rep.mu > rep.lambda1;
    rep.margin = (rep.mu - rep.lambda1) / rep.lambda1;
    return rep;
  }
  if (n < 3) throw Unsupported("blowup criterion for the two-dimensional whole space is not supported");
  rep.kind = CriterionKind::Kaplan;
  std::vector<double> weighted(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) weighted[i] = u0[i] * std::exp(-g[i] * g[i]);
  const double I = 0.5 * cumulative_moment(g, weighted, n).back();
  // phi = c0 exp(-|x|^2) normalised in L^1(R^{n+2}); c0 |S^{n+1}| = 2 / Gamma((n+2)/2).
  rep.kaplan_y0 = 2.0 / std::tgamma(0.5 * (n + 2)) * I;
  rep.threshold = 4.0 * (n + 2) / (n - 2.0);
  rep.sufficient = rep.kaplan_y0 > rep.threshold;
  rep.margin = (rep.kaplan_y0 - rep.threshold) / rep.threshold;
  return rep;
}

}  // namespace kslab
