#include <boost/math/special_functions/bessel.hpp>
#include <cmath>
#include <numbers>

#include "doctest.h"
#include "kslab/errors.hpp"
#include "kslab/initial_data.hpp"

using namespace kslab;

namespace {

// Independent Newton iteration on tan x = x near 4.49.
double tan_root() {
  double x = 4.49;
  for (int k = 0; k < 50; ++k) {
    const double f = std::sin(x) - x * std::cos(x);
    const double df = x * std::sin(x);
    x -= f / df;
  }
  return x;
}

}  // namespace

TEST_CASE("families sample their formulas") {
  auto g = build_grid(1.0, 64, Grading{2.0});
  auto u = sample(InitialSpec{CosineCap{2.0}, 3.0, Ball{1.0}}, g);
  CHECK(u[0] == doctest::Approx(9.0));
  CHECK(u.values().back() == doctest::Approx(3.0));
  auto q = sample(InitialSpec{QuarticCap{}, 2.0, Ball{1.0}}, g);
  CHECK(q[0] == doctest::Approx(4.0));
  CHECK(q.values().back() == doctest::Approx(2.0));
  auto p = sample(InitialSpec{Plateau{0.5}, 2.0, Ball{1.0}}, g);
  CHECK(p.at(0.25) == doctest::Approx(2.0));
  CHECK(p.values().back() == doctest::Approx(1.0));
  auto gw = build_grid(5.0, 64);
  auto gs = sample(InitialSpec{Gaussian{1.0}, 2.0, WholeSpace{5.0}}, gw);
  CHECK(gs.at(1.0) == doctest::Approx(2.0 * std::exp(-1.0)).epsilon(1e-2));
}

TEST_CASE("sampling rejects mismatched inputs") {
  auto g = build_grid(1.0, 64);
  CHECK_THROWS_AS(sample(InitialSpec{Gaussian{1.0}, 1.0, Ball{1.0}}, g), ConfigError);
  CHECK_THROWS_AS(sample(InitialSpec{CosineCap{2.0}, 1.0, WholeSpace{1.0}}, g), ConfigError);
  CHECK_THROWS_AS(sample(InitialSpec{CosineCap{0.5}, 1.0, Ball{1.0}}, g), ConfigError);
  CHECK_THROWS_AS(sample(InitialSpec{CosineCap{2.0}, -1.0, Ball{1.0}}, g), ConfigError);
  CHECK_THROWS_AS(sample(InitialSpec{CosineCap{2.0}, 1.0, Ball{2.0}}, g), ConfigError);
}

TEST_CASE("i0 accepts decreasing data and rejects constant or increasing data") {
  auto g = build_grid(1.0, 64);
  CHECK(validate_i0(sample(InitialSpec{CosineCap{2.0}, 1.0, Ball{1.0}}, g)).passed);
  CHECK_FALSE(validate_i0(sample(InitialSpec{Constant{}, 1.0, Ball{1.0}}, g)).passed);
  std::vector<double> inc(g->size());
  for (std::size_t i = 0; i < inc.size(); ++i) inc[i] = 1 + (*g)[i];
  CHECK_FALSE(validate_i0(RadialField(g, inc)).passed);
}

TEST_CASE("i2 holds for large multipliers and fails for small ones") {
  auto g = build_grid(1.0, 512, Grading{2.0});
  auto phi = sample(InitialSpec{CosineCap{2.0}, 1.0, Ball{1.0}}, g);
  const auto ml = min_lambda_for_i2(phi, params_from_data(3, Ball{1.0}, phi));
  REQUIRE(ml.found);
  CHECK(ml.monotone_spot_check);
  CHECK(ml.lambda > 10.0);
  CHECK(ml.lambda < 40.0);
  CHECK(ml.lambda_fail < ml.lambda);
  for (double lam : {0.5 * ml.lambda, 2 * ml.lambda}) {
    auto u = sample(InitialSpec{CosineCap{2.0}, lam, Ball{1.0}}, g);
    CHECK(validate_i2(u, params_from_data(3, Ball{1.0}, u)).passed == (lam > ml.lambda));
  }
}

TEST_CASE("min_lambda_for_i2 rejects profiles with a slope at the boundary") {
  auto g = build_grid(1.0, 128);
  std::vector<double> v(g->size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = 2 - (*g)[i];
  RadialField phi(g, v);
  CHECK_THROWS_AS(min_lambda_for_i2(phi, params_from_data(3, Ball{1.0}, phi)), ConfigError);
}

TEST_CASE("first Dirichlet eigenvalue matches independent roots") {
  const double j = tan_root();
  CHECK(j == doctest::Approx(4.493409457909064).epsilon(1e-14));
  CHECK(std::abs(first_dirichlet_eigenvalue(5, 1.0) - j * j) < 1e-6 * j * j);
  CHECK(first_dirichlet_eigenvalue(3, 1.0) == doctest::Approx(std::numbers::pi * std::numbers::pi).epsilon(1e-10));
  const double j11 = boost::math::cyl_bessel_j_zero(1.0, 1);
  CHECK(first_dirichlet_eigenvalue(4, 1.0) == doctest::Approx(j11 * j11).epsilon(1e-10));
  CHECK(first_dirichlet_eigenvalue(5, 2.0) == doctest::Approx(j * j / 4).epsilon(1e-10));
}

TEST_CASE("ball criterion compares mu with the eigenvalue") {
  auto g = build_grid(1.0, 256, Grading{2.0});
  for (double lam : {5.0, 40.0}) {
    auto u = sample(InitialSpec{CosineCap{2.0}, lam, Ball{1.0}}, g);
    const auto c = blowup_criterion(u, params_from_data(3, Ball{1.0}, u));
    CHECK(c.kind == CriterionKind::Eigenvalue);
    CHECK(c.sufficient == (c.mu >= c.lambda1));
    CHECK(c.mu == doctest::Approx(lam * (2 - 6 / (std::numbers::pi * std::numbers::pi))).epsilon(1e-4));
  }
}

TEST_CASE("Kaplan weighted mass of a Gaussian matches its closed form") {
  // y0 = lambda / n * (1 + width^-2)^(-n/2) for u0 = lambda exp(-(r/width)^2).
  for (int n : {3, 4}) {
    auto g = build_grid(12.0, 4000);
    auto u = sample(InitialSpec{Gaussian{1.5}, 30.0, WholeSpace{12.0}}, g);
    const auto c = blowup_criterion(u, make_whole_space_params(n, 12.0));
    CHECK(c.kind == CriterionKind::Kaplan);
    CHECK(c.kaplan_y0 == doctest::Approx(30.0 / n * std::pow(1 + 1 / 2.25, -0.5 * n)).epsilon(1e-5));
    CHECK(c.threshold == doctest::Approx(4.0 * (n + 2) / (n - 2)));
  }
  auto g = build_grid(5.0, 64);
  auto u = sample(InitialSpec{Gaussian{1.0}, 1.0, WholeSpace{5.0}}, g);
  CHECK_THROWS_AS(blowup_criterion(u, make_whole_space_params(2, 5.0)), Unsupported);
}
