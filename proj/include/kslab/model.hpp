#pragma once

#include <memory>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace kslab {

struct Ball {
  double R = 1.0;
};

/// Whole space R^n, truncated at R_trunc for computation.
struct WholeSpace {
  double R_trunc = 10.0;
};

using Domain = std::variant<Ball, WholeSpace>;

/// Boundary treatment at the truncation radius of a whole-space run.
/// Ball domains always use the Dirichlet condition w(R) = mu_tilde.
enum class FarField { Pin, Neumann };

double outer_radius(const Domain& domain);
bool is_ball(const Domain& domain);
std::string domain_name(const Domain& domain);

/// Problem definition. mu is the mean density on a ball and 0 on the whole space;
/// mu_tilde = mu / n and b = 1 / n are kept alongside for the transformed equation.
struct Params {
  int n = 3;
  Domain domain = Ball{};
  double mu = 0.0;
  double mu_tilde = 0.0;
  double b = 1.0 / 3.0;
  FarField far_field = FarField::Pin;

  double outer_radius() const { return kslab::outer_radius(domain); }
  bool ball() const { return is_ball(domain); }
};

/// Ball parameters with a prescribed mean density.
Params make_ball_params(int n, double R, double mu);
Params make_whole_space_params(int n, double R_trunc, FarField far_field = FarField::Pin);

struct Grading {
  double exponent = 1.0;  // 1 = uniform
  bool uniform() const { return exponent == 1.0; }
};

class RadialGrid {
 public:
  RadialGrid(std::vector<double> nodes, Grading grading);

  std::span<const double> nodes() const { return nodes_; }
  double operator[](std::size_t i) const { return nodes_[i]; }
  std::size_t size() const { return nodes_.size(); }
  /// Number of intervals N (nodes r_0 .. r_N).
  std::size_t intervals() const { return nodes_.size() - 1; }
  double outer() const { return nodes_.back(); }
  Grading grading() const { return grading_; }

  /// Index of the cell [r_i, r_{i+1}] containing r (clamped to the grid).
  std::size_t locate(double r) const;

 private:
  std::vector<double> nodes_;
  Grading grading_;
};

using GridPtr = std::shared_ptr<const RadialGrid>;

/// Nodes r_i = R * (i/N)^g. Throws ConfigError when N < min_intervals.
GridPtr build_grid(double outer, int N, Grading grading = {}, int min_intervals = 8);
GridPtr build_grid(const Domain& domain, int N, Grading grading = {}, int min_intervals = 8);

/// A scalar sampled on every node of a radial grid. Values are finite.
class RadialField {
 public:
  RadialField() = default;
  RadialField(GridPtr grid, std::vector<double> values);

  const RadialGrid& grid() const { return *grid_; }
  const GridPtr& grid_ptr() const { return grid_; }
  std::span<const double> values() const { return values_; }
  double operator[](std::size_t i) const { return values_[i]; }
  std::size_t size() const { return values_.size(); }

  /// Piecewise-linear interpolation; r is clamped to [0, outer].
  double at(double r) const;

 private:
  GridPtr grid_;
  std::vector<double> values_;
};

struct State {
  RadialField w;
  double t = 0.0;
  double u0_mass = 0.0;
  long step_index = 0;
};

/// |S^{n-1}|, the surface area of the unit sphere in R^n.
double sphere_area(int n);
double ball_volume(int n, double R);

/// M_i = int_0^{r_i} s^{n-1} u(s) ds with u linear on each cell and the weight
/// s^{n-1} integrated exactly.
std::vector<double> cumulative_moment(const RadialGrid& grid, std::span<const double> u, int n);

/// Nodal radial derivative: three-point centered on interior nodes, second-order
/// one-sided at the outer node, and 0 at the origin (radial symmetry).
std::vector<double> radial_derivative(const RadialGrid& grid, std::span<const double> f);

/// w(r) = r^{-n} int_0^r s^{n-1} u ds, with w(0) = u(0)/n. Throws DomainError on negative u.
RadialField w_from_u(const RadialField& u, int n);
/// u = r w_r + n w.
RadialField u_from_w(const RadialField& w, int n);
/// v_r = -r (w - mu_tilde).
RadialField vr_from_w(const RadialField& w, double mu_tilde);

/// ||u||_1 over the ball of radius r_N, from nodal u.
double mass_of_u(const RadialField& u, int n);
/// ||u||_1 recovered from the mass function: |S^{n-1}| R^n w(R).
double mass_of_w(const RadialField& w, int n);

/// Ball parameters whose mu is the discrete mean of u0 (so w_from_u(u0)(R) == mu_tilde).
Params params_from_data(int n, const Domain& domain, const RadialField& u0,
                        FarField far_field = FarField::Pin);

}  // namespace kslab
