#include <cmath>
#include <numbers>

#include "doctest.h"
#include "kslab/errors.hpp"
#include "kslab/initial_data.hpp"
#include "kslab/monitors.hpp"

using namespace kslab;

namespace {

RadialField field(const GridPtr& g, auto f) {
  std::vector<double> v(g->size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = f((*g)[i]);
  return RadialField(g, std::move(v));
}

MonitorSample sample_of_w(const RadialField& w, const Params& p, double eps, double t = 0.0) {
  return snapshot_monitors(State{w, t, mass_of_w(w, p.n), 0}, p, eps);
}

}  // namespace

TEST_CASE("epsilon lattice spans 1e-3 to 2^20 1e-3") {
  const auto e = epsilon_lattice();
  CHECK(e.front() == 1e-3);
  CHECK(e[11] == doctest::Approx(2.048));
  CHECK(e.back() == doctest::Approx(1048.576));
}

TEST_CASE("K bound of u = 1/(tau + r^2) is one") {
  // Build w from u so the monitor sees the same density through its own stencils.
  auto g = build_grid(1.0, 2000);
  auto u = field(g, [](double r) { return 1 / (0.3 + r * r); });
  const Params p = make_whole_space_params(3, 1.0);
  const auto m = sample_of_w(w_from_u(u, 3), p, 1e-3);
  CHECK(m.k_bound == doctest::Approx(1.0).epsilon(2e-3));
  CHECK(m.u0 == doctest::Approx(1 / 0.3).epsilon(1e-12));
}

TEST_CASE("J of w = 1/(1+r^2) changes sign at epsilon = 2") {
  auto g = build_grid(3.0, 3000);
  auto w = field(g, [](double r) { return 1 / (1 + r * r); });
  const Params p = make_whole_space_params(3, 3.0);
  CHECK(sample_of_w(w, p, 1.9).j_max <= 1e-6);
  CHECK(sample_of_w(w, p, 2.1).j_max > 1e-3);
  const auto m = sample_of_w(w, p, 1.0);
  CHECK(m.epsilon_crit == doctest::Approx(2.0).epsilon(1e-4));
  // Closed form: J(1) = -r / (1 + r^2)^2, least negative at the first node.
  const double h = (*g)[1];
  CHECK(m.j_max == doctest::Approx(-h / ((1 + h * h) * (1 + h * h))).epsilon(1e-4));
  // 1/w - eps r^2/2 - 1/w(0) = (1 - eps/2) r^2 has minimum 0 at r = 0 side.
  CHECK(m.estimw_gap >= 0.0);
  CHECK(m.estimw_gap == doctest::Approx(0.5 * (*g)[1] * (*g)[1]).epsilon(1e-6));
}

TEST_CASE("constant w: no gradient, mass of the ball") {
  auto g = build_grid(1.0, 64);
  const double mu_t = 0.7;
  auto w = field(g, [&](double) { return mu_t; });
  const Params p = make_ball_params(3, 1.0, 3 * mu_t);
  const auto m = sample_of_w(w, p, 1e-3);
  CHECK(std::abs(m.wr_max) < 1e-12);
  CHECK(m.grad_ratio < 1e-12);
  CHECK(m.mass == doctest::Approx(3 * mu_t * ball_volume(3, 1.0)));
  CHECK_FALSE(half_height(w).has_value());
  CHECK(std::isnan(m.r_half));
}

TEST_CASE("zero density gives an undefined sample") {
  auto g = build_grid(1.0, 32);
  auto w = field(g, [](double) { return 0.0; });
  const auto m = sample_of_w(w, make_whole_space_params(3, 1.0, FarField::Neumann), 1e-3);
  CHECK_FALSE(m.defined);
  CHECK(std::isnan(m.k_bound));
}

TEST_CASE("largest valid epsilon on a synthetic self-similar trace") {
  auto g = build_grid(4.0, 4000);
  const Params p = make_whole_space_params(3, 4.0);
  std::vector<MonitorSample> samples;
  for (double c : {1.0, 0.3, 0.1, 0.03}) {
    auto w = field(g, [&](double r) { return 1 / (c + r * r); });
    samples.push_back(sample_of_w(w, p, 1e-3, 1 - c));
  }
  const auto e = largest_valid_epsilon(samples, 0.0);
  CHECK_FALSE(e.flagged);
  CHECK(e.epsilon_sup == doctest::Approx(2.0).epsilon(1e-3));
  CHECK(e.epsilon_star == doctest::Approx(1.024));
  // Refining the lattice around epsilon* moves it up, never past the supremum.
  std::vector<double> fine;
  for (int k = 0; k <= 100; ++k) fine.push_back(e.epsilon_star * std::pow(2.0, k / 100.0));
  const auto ef = largest_valid_epsilon(samples, 0.0, fine);
  CHECK(ef.epsilon_star >= e.epsilon_star);
  CHECK(ef.epsilon_star <= ef.epsilon_sup);
  CHECK(ef.epsilon_star > 1.95);

  auto bad = field(g, [](double r) { return 1 + r; });
  samples.push_back(sample_of_w(bad, p, 1e-3, 2.0));
  const auto eb = largest_valid_epsilon(samples, 0.0);
  CHECK(eb.epsilon_star == 0.0);
  CHECK(eb.flagged);
}

TEST_CASE("half height of w0 / (1 + r^2/a^2) is a") {
  auto g = build_grid(5.0, 5000);
  const double a = 0.7, w0 = 3.0;
  auto w = field(g, [&](double r) { return w0 / (1 + r * r / (a * a)); });
  const auto hh = half_height(w);
  REQUIRE(hh);
  CHECK(hh->r0 == doctest::Approx(a).epsilon(1e-5));
  CHECK(hh->r0_sq_w == doctest::Approx(a * a * w0 / 2).epsilon(1e-5));
}

TEST_CASE("profile exponent fits") {
  auto g = build_grid(1.0, 4000, Grading{2.0});
  auto pure = field(g, [](double r) { return r > 0 ? 5 / (r * r) : 1e12; });
  const auto f = fit_profile_exponent(pure, 1e-2, 0.5);
  CHECK(f.p == doctest::Approx(-2.0).epsilon(1e-12));
  CHECK(f.L == doctest::Approx(5.0).epsilon(1e-10));
  CHECK(f.residual < 1e-12);
  CHECK(f.band_hi / f.band_lo == doctest::Approx(1.0));

  auto logp = field(g, [](double r) { return r > 0 ? 16 / (r * r) * std::abs(std::log(r)) : 1e12; });
  CHECK(fit_profile_exponent(logp, 1e-3, 1e-1).p < -2.0);

  auto flat = field(g, [](double) { return 3.0; });
  CHECK(fit_profile_exponent(flat, 0.01, 0.9).p == doctest::Approx(0.0).scale(1.0));

  CHECK_THROWS_AS(fit_profile_exponent(pure, 0.1, 0.2), ConfigError);
  auto neg = field(g, [](double r) { return 0.5 - r; });
  CHECK_THROWS_AS(fit_profile_exponent(neg, 0.1, 0.9), DomainError);
}

TEST_CASE("concentration mass oracles") {
  auto g = build_grid(1.0, 400);
  const std::vector<double> deltas = {0.0, 0.1, 0.5, 1.0};
  auto c = field(g, [](double) { return 2.0; });
  const auto m2 = concentration_mass_of_u(c, 2, deltas);
  for (std::size_t k = 0; k < deltas.size(); ++k)
    CHECK(m2[k] == doctest::Approx(2.0 * std::numbers::pi * deltas[k] * deltas[k]));
  // u = r^-2 in three dimensions: 4 pi delta (the singular first cell costs O(h)).
  auto gf = build_grid(1.0, 20000);
  auto inv = field(gf, [](double r) { return r > 0 ? 1 / (r * r) : 0.0; });
  const auto m3 = concentration_mass_of_u(inv, 3, deltas);
  CHECK(m3[0] == 0.0);
  for (std::size_t k = 1; k < deltas.size(); ++k)
    CHECK(m3[k] == doctest::Approx(4 * std::numbers::pi * deltas[k]).epsilon(1e-3));
}

TEST_CASE("type ratio series") {
  BlowupTrace tr;
  for (int i = 0; i < 50; ++i) {
    tr.t.push_back(1 - std::pow(0.8, i));
    tr.u0.push_back(1 / std::pow(0.8, i));
  }
  const auto r = type_ratio(tr, 1.0);
  CHECK(r.min == doctest::Approx(1.0));
  CHECK(r.max == doctest::Approx(1.0));
  CHECK(r.window_points > 10);

  BlowupTrace sq = tr;
  for (std::size_t i = 0; i < sq.t.size(); ++i) sq.u0[i] = 1 / std::pow(1 - sq.t[i], 2);
  const auto s = type_ratio(sq, 1.0);
  CHECK(s.series.back().second > 1e3 * s.series.front().second);

  BlowupTrace bounded = tr;
  for (auto& u : bounded.u0) u = 2.0;
  CHECK(type_ratio(bounded, 1.0).series.back().second < 1e-3);
  CHECK_THROWS_AS(type_ratio(tr, 0.5), DomainError);
}

TEST_CASE("recorder keeps a resolved final profile on a blowup run") {
  auto g = build_grid(1.0, 512, Grading{2.0});
  auto u0 = sample(InitialSpec{CosineCap{2.0}, 40.0, Ball{1.0}}, g);
  const Params p = params_from_data(3, Ball{1.0}, u0);
  RunRecorder rec(p, 1e-3, {1e-3, 1e-2});
  StepperConfig c;
  c.u_blowup_threshold = 1e6;
  const RunResult r = run(initial_state(u0, p), p, c, rec.hooks(5));
  REQUIRE(r.status.kind == BlowupStatus::Kind::Blowup);
  const RunAnalysis a = analyze_run(r, rec, p);
  CHECK(rec.final_profile().has_value());
  CHECK(rec.concentration().size() == rec.samples().size());
  REQUIRE(a.profile_fit);
  CHECK(a.profile_fit->p == doctest::Approx(-2.0).epsilon(0.15));
  CHECK(a.mass_drift == 0.0);
  CHECK(a.epsilon.epsilon_star > 0.0);
  for (std::size_t i = 1; i < rec.samples().size(); ++i) CHECK(rec.samples()[i].t > rec.samples()[i - 1].t);
}
