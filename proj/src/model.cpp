#include "kslab/model.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <sstream>

#include "kslab/errors.hpp"

namespace kslab {

namespace {

// 8-point Gauss-Legendre on [-1, 1]; exact for polynomials up to degree 15,
// which covers s^{n-1} times a linear interpolant for n <= 15.
constexpr std::array<double, 8> kGaussX = {
    -0.9602898564975363, -0.7966664774136267, -0.5255324099163290, -0.1834346424956498,
    0.1834346424956498,  0.5255324099163290,  0.7966664774136267,  0.9602898564975363};
constexpr std::array<double, 8> kGaussW = {
    0.1012285362903763, 0.2223810344533745, 0.3137066458778873, 0.3626837833783620,
    0.3626837833783620, 0.3137066458778873, 0.2223810344533745, 0.1012285362903763};

void require_finite(std::span<const double> v, const char* what) {
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!std::isfinite(v[i])) {
      std::ostringstream os;
      os << what << ": non-finite value at node " << i;
      throw NumericalBreakdown(os.str());
    }
  }
}

}  // namespace

double outer_radius(const Domain& domain) {
  return std::visit(
      [](const auto& d) {
        if constexpr (std::is_same_v<std::decay_t<decltype(d)>, Ball>) {
          return d.R;
        } else {
          return d.R_trunc;
        }
      },
      domain);
}

bool is_ball(const Domain& domain) { return std::holds_alternative<Ball>(domain); }

std::string domain_name(const Domain& domain) { return is_ball(domain) ? "ball" : "whole_space"; }

Params make_ball_params(int n, double R, double mu) {
  if (n < 2) throw ConfigError("dimension n must be >= 2");
  if (!(R > 0.0)) throw ConfigError("ball radius must be positive");
  if (!(mu >= 0.0)) throw ConfigError("mu must be nonnegative");
  Params p;
  p.n = n;
  p.domain = Ball{R};
  p.mu = mu;
  p.mu_tilde = mu / n;
  p.b = 1.0 / n;
  return p;
}

Params make_whole_space_params(int n, double R_trunc, FarField far_field) {
  if (n < 2) throw ConfigError("dimension n must be >= 2");
  if (!(R_trunc > 0.0)) throw ConfigError("truncation radius must be positive");
  Params p;
  p.n = n;
  p.domain = WholeSpace{R_trunc};
  p.mu = 0.0;
  p.mu_tilde = 0.0;
  p.b = 1.0 / n;
  p.far_field = far_field;
  return p;
}

RadialGrid::RadialGrid(std::vector<double> nodes, Grading grading)
    : nodes_(std::move(nodes)), grading_(grading) {
  if (nodes_.size() < 2) throw ConfigError("radial grid needs at least two nodes");
  if (nodes_.front() != 0.0) throw ConfigError("radial grid must start at r = 0");
  for (std::size_t i = 1; i < nodes_.size(); ++i) {
    if (!(nodes_[i] > nodes_[i - 1])) throw ConfigError("radial grid nodes must be strictly increasing");
  }
}

std::size_t RadialGrid::locate(double r) const {
  if (r <= nodes_.front()) return 0;
  if (r >= nodes_.back()) return nodes_.size() - 2;
  auto it = std::upper_bound(nodes_.begin(), nodes_.end(), r);
  return static_cast<std::size_t>(it - nodes_.begin()) - 1;
}

GridPtr build_grid(double outer, int N, Grading grading, int min_intervals) {
  if (N < min_intervals) {
    std::ostringstream os;
    os << "grid needs N >= " << min_intervals << " intervals, got " << N;
    throw ConfigError(os.str());
  }
  if (!(outer > 0.0)) throw ConfigError("grid outer radius must be positive");
  if (!(grading.exponent >= 1.0)) throw ConfigError("grading exponent must be >= 1");
  std::vector<double> nodes(static_cast<std::size_t>(N) + 1);
  for (int i = 0; i <= N; ++i) {
    const double x = static_cast<double>(i) / N;
    nodes[i] = grading.uniform() ? outer * x : outer * std::pow(x, grading.exponent);
  }
  nodes[N] = outer;
  return std::make_shared<const RadialGrid>(std::move(nodes), grading);
}

GridPtr build_grid(const Domain& domain, int N, Grading grading, int min_intervals) {
  return build_grid(outer_radius(domain), N, grading, min_intervals);
}

RadialField::RadialField(GridPtr grid, std::vector<double> values)
    : grid_(std::move(grid)), values_(std::move(values)) {
  if (!grid_) throw ConfigError("radial field without grid");
  if (values_.size() != grid_->size()) throw ConfigError("radial field length does not match grid");
  require_finite(values_, "radial field");
}

double RadialField::at(double r) const {
  const auto& g = *grid_;
  if (r <= 0.0) return values_.front();
  if (r >= g.outer()) return values_.back();
  const std::size_t i = g.locate(r);
  const double a = g[i], b = g[i + 1];
  const double s = (r - a) / (b - a);
  return (1.0 - s) * values_[i] + s * values_[i + 1];
}

double sphere_area(int n) {
  const double h = 0.5 * n;
  return 2.0 * std::pow(std::numbers::pi, h) / std::tgamma(h);
}

double ball_volume(int n, double R) { return sphere_area(n) * std::pow(R, n) / n; }

std::vector<double> cumulative_moment(const RadialGrid& grid, std::span<const double> u, int n) {
  if (u.size() != grid.size()) throw ConfigError("cumulative_moment: length mismatch");
  if (n < 1 || n > 15) throw ConfigError("cumulative_moment: dimension out of supported range");
  std::vector<double> M(grid.size(), 0.0);
  for (std::size_t i = 0; i + 1 < grid.size(); ++i) {
    const double a = grid[i], h = grid[i + 1] - grid[i];
    double left = 0.0, right = 0.0;
    for (std::size_t k = 0; k < kGaussX.size(); ++k) {
      const double x = 0.5 * (1.0 + kGaussX[k]);  // (s - a) / h
      const double wgt = 0.5 * h * kGaussW[k] * std::pow(a + h * x, n - 1);
      left += wgt * (1.0 - x);
      right += wgt * x;
    }
    M[i + 1] = M[i] + left * u[i] + right * u[i + 1];
  }
  return M;
}

std::vector<double> radial_derivative(const RadialGrid& grid, std::span<const double> f) {
  const std::size_t N = grid.size() - 1;
  std::vector<double> d(grid.size(), 0.0);
  if (N < 2) throw ConfigError("radial_derivative needs at least three nodes");
  for (std::size_t i = 1; i < N; ++i) {
    const double hm = grid[i] - grid[i - 1];
    const double hp = grid[i + 1] - grid[i];
    d[i] = -hp / (hm * (hm + hp)) * f[i - 1] + (hp - hm) / (hm * hp) * f[i] +
           hm / (hp * (hm + hp)) * f[i + 1];
  }
  const double h1 = grid[N] - grid[N - 1];
  const double h2 = grid[N - 1] - grid[N - 2];
  d[N] = (2.0 * h1 + h2) / (h1 * (h1 + h2)) * f[N] - (h1 + h2) / (h1 * h2) * f[N - 1] +
         h1 / (h2 * (h1 + h2)) * f[N - 2];
  return d;
}

RadialField w_from_u(const RadialField& u, int n) {
  const auto& g = u.grid();
  for (std::size_t i = 0; i < u.size(); ++i) {
    if (u[i] < 0.0) {
      std::ostringstream os;
      os << "w_from_u: negative density " << u[i] << " at r = " << g[i];
      throw DomainError(os.str());
    }
  }
  const auto M = cumulative_moment(g, u.values(), n);
  std::vector<double> w(g.size());
  w[0] = u[0] / n;
  for (std::size_t i = 1; i < g.size(); ++i) w[i] = M[i] / std::pow(g[i], n);
  return RadialField(u.grid_ptr(), std::move(w));
}

RadialField u_from_w(const RadialField& w, int n) {
  const auto& g = w.grid();
  const auto dw = radial_derivative(g, w.values());
  std::vector<double> u(g.size());
  u[0] = n * w[0];
  for (std::size_t i = 1; i < g.size(); ++i) u[i] = g[i] * dw[i] + n * w[i];
  return RadialField(w.grid_ptr(), std::move(u));
}

RadialField vr_from_w(const RadialField& w, double mu_tilde) {
  const auto& g = w.grid();
  std::vector<double> vr(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) vr[i] = -g[i] * (w[i] - mu_tilde);
  return RadialField(w.grid_ptr(), std::move(vr));
}

double mass_of_u(const RadialField& u, int n) {
  return sphere_area(n) * cumulative_moment(u.grid(), u.values(), n).back();
}

double mass_of_w(const RadialField& w, int n) {
  return sphere_area(n) * std::pow(w.grid().outer(), n) * w.values().back();
}

Params params_from_data(int n, const Domain& domain, const RadialField& u0, FarField far_field) {
  if (!is_ball(domain)) return make_whole_space_params(n, outer_radius(domain), far_field);
  Params p = make_ball_params(n, outer_radius(domain), 0.0);
  // mu_tilde taken from the discrete mass function so the boundary value is exact.
  p.mu_tilde = w_from_u(u0, n).values().back();
  p.mu = n * p.mu_tilde;
  return p;
}

}  // namespace kslab
