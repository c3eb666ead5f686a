#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "kslab/errors.hpp"
#include "kslab/model.hpp"

using namespace kslab;

namespace {

RadialField field(const GridPtr& g, auto f) {
  std::vector<double> v(g->size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = f((*g)[i]);
  return RadialField(g, std::move(v));
}

double max_error(const RadialField& a, auto f) {
  double e = 0;
  for (std::size_t i = 0; i < a.size(); ++i) e = std::max(e, std::abs(a[i] - f(a.grid()[i])));
  return e;
}

}  // namespace

TEST_CASE("grid nodes follow the grading law") {
  auto g = build_grid(2.0, 16, Grading{2.0});
  CHECK(g->size() == 17);
  CHECK((*g)[0] == 0.0);
  CHECK((*g)[16] == 2.0);
  CHECK((*g)[4] == doctest::Approx(2.0 * 0.0625));
  CHECK_THROWS_AS(build_grid(1.0, 4), ConfigError);
  CHECK(build_grid(1.0, 4, {}, 4)->intervals() == 4);
  CHECK_THROWS_AS(build_grid(1.0, 16, Grading{0.5}), ConfigError);
  CHECK(g->locate(1.0) == 11);
}

TEST_CASE("radial field rejects non-finite values and interpolates linearly") {
  auto g = build_grid(1.0, 8);
  std::vector<double> v(9, 1.0);
  v[3] = std::nan("");
  CHECK_THROWS_AS(RadialField(g, v), NumericalBreakdown);
  auto f = field(g, [](double r) { return 2 * r + 1; });
  CHECK(f.at(0.3) == doctest::Approx(1.6));
  CHECK(f.at(5.0) == doctest::Approx(3.0));
}

TEST_CASE("sphere areas") {
  CHECK(sphere_area(2) == doctest::Approx(2 * std::numbers::pi));
  CHECK(sphere_area(3) == doctest::Approx(4 * std::numbers::pi));
  CHECK(sphere_area(4) == doctest::Approx(2 * std::numbers::pi * std::numbers::pi));
  CHECK(ball_volume(3, 2.0) == doctest::Approx(4.0 / 3.0 * std::numbers::pi * 8.0));
}

TEST_CASE("cumulative moment is exact for piecewise-linear densities") {
  auto g = build_grid(1.5, 10, Grading{1.7});
  for (int n : {2, 3, 5}) {
    auto u = field(g, [](double r) { return 3.0 - r; });
    const auto M = cumulative_moment(*g, u.values(), n);
    for (std::size_t i = 0; i < g->size(); ++i) {
      const double r = (*g)[i];
      CHECK(M[i] == doctest::Approx(3 * std::pow(r, n) / n - std::pow(r, n + 1) / (n + 1)).epsilon(1e-13));
    }
  }
}

TEST_CASE("constant density gives w = c / n") {
  auto g = build_grid(1.0, 32, Grading{2.0});
  auto w = w_from_u(field(g, [](double) { return 6.0; }), 3);
  CHECK(max_error(w, [](double) { return 2.0; }) < 1e-14);
  CHECK(mass_of_w(w, 3) == doctest::Approx(6.0 * 4.0 / 3.0 * std::numbers::pi));
  CHECK(mass_of_u(field(g, [](double) { return 6.0; }), 3) == doctest::Approx(mass_of_w(w, 3)));
}

TEST_CASE("w of 1 - r^2 matches the closed form 1/3 - r^2/5") {
  auto g = build_grid(1.0, 256);
  auto w = w_from_u(field(g, [](double r) { return 1 - r * r; }), 3);
  CHECK(max_error(w, [](double r) { return 1.0 / 3 - r * r / 5; }) < 1e-5);
}

TEST_CASE("transform round trip converges at second order") {
  double prev = 0;
  for (int N : {64, 128, 256, 512}) {
    auto g = build_grid(1.0, N);
    auto u = field(g, [](double r) { return 1 - r * r; });
    const double err = max_error(u_from_w(w_from_u(u, 3), 3), [](double r) { return 1 - r * r; });
    if (prev > 0) {
      CHECK(prev / err > 3.5);
      CHECK(prev / err < 4.5);
    }
    prev = err;
  }
}

TEST_CASE("u_from_w matches r w' + n w for a smooth w") {
  auto g = build_grid(2.0, 400, Grading{1.5});
  auto w = field(g, [](double r) { return 1 / (1 + r * r); });
  auto u = u_from_w(w, 3);
  CHECK(max_error(u, [](double r) { return -2 * r * r / ((1 + r * r) * (1 + r * r)) + 3 / (1 + r * r); }) < 2e-4);
}

TEST_CASE("radial derivative is exact for quadratics on a graded grid") {
  auto g = build_grid(1.0, 20, Grading{2.0});
  auto f = field(g, [](double r) { return 2 * r * r - r + 4; });
  const auto d = radial_derivative(*g, f.values());
  CHECK(d[0] == 0.0);
  for (std::size_t i = 1; i < g->size(); ++i) CHECK(d[i] == doctest::Approx(4 * (*g)[i] - 1).epsilon(1e-10));
}

TEST_CASE("negative density is rejected") {
  auto g = build_grid(1.0, 16);
  CHECK_THROWS_AS(w_from_u(field(g, [](double r) { return 0.5 - r; }), 3), DomainError);
}

TEST_CASE("parameters from data pin the boundary value exactly") {
  auto g = build_grid(1.0, 64, Grading{2.0});
  auto u = field(g, [](double r) { return 2 + std::cos(std::numbers::pi * r); });
  const Params p = params_from_data(3, Ball{1.0}, u);
  CHECK(p.mu_tilde == w_from_u(u, 3).values().back());
  CHECK(p.mu == doctest::Approx(mass_of_u(u, 3) / ball_volume(3, 1.0)));
  CHECK(p.b == doctest::Approx(1.0 / 3));
  CHECK_THROWS_AS(make_ball_params(1, 1.0, 1.0), ConfigError);
  const Params ws = params_from_data(3, WholeSpace{5.0}, u);
  CHECK(ws.mu == 0.0);
}

TEST_CASE("property: w of a decreasing density is decreasing and bounded below by u/n") {
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 2 + trial % 4;
    auto g = build_grid(1.0 + 3 * U(rng), 40 + trial, Grading{1 + U(rng)});
    std::vector<double> u(g->size());
    double level = 1 + 10 * U(rng);
    for (auto& x : u) {
      x = level;
      level *= 1 - 0.1 * U(rng);
    }
    RadialField uf(g, u);
    auto w = w_from_u(uf, n);
    for (std::size_t i = 1; i < w.size(); ++i) {
      CHECK(w[i] <= w[i - 1] * (1 + 1e-14));
      CHECK(w[i] >= u[i] / n * (1 - 1e-14));
    }
    CHECK(mass_of_w(w, n) == doctest::Approx(mass_of_u(uf, n)).epsilon(1e-12));
  }
}
