#include <catch2/catch.hpp>

#include <cmath>

#include "sbmlab/bessel.hpp"
#include "sbmlab/radial_ode.hpp"

using namespace sbmlab;

TEST_CASE("closed forms and their guard rails") {
  const double nu = std::sqrt(17.0) / 2.0;
  REQUIRE(hit_probability(nu, 2.0, 1.0) == Approx(std::pow(0.5, std::sqrt(17.0))).epsilon(1e-12));
  REQUIRE(hit_probability(1.0, 5.0, 5.0) == 1.0);
  REQUIRE_THROWS_AS(hit_probability(0.0, 2.0, 1.0), std::invalid_argument);
  REQUIRE_THROWS_AS(hit_probability(1.0, 1.0, 2.0), std::invalid_argument);

  // degenerate discriminant: 2*gamma == nu^2
  REQUIRE(exponential_moment_closed_form(2.0 * std::sqrt(2.0), 4.0, 3.0) ==
          Approx(std::pow(3.0, 2.0 * std::sqrt(2.0))).epsilon(1e-12));
  REQUIRE(exponential_moment_closed_form(nu, 2.0, 2.0) ==
          Approx(std::pow(2.0, nu - 0.5)).epsilon(1e-12));
  REQUIRE_THROWS_AS(exponential_moment_closed_form(nu, 3.0, 2.0), std::invalid_argument);
}

TEST_CASE("exponential moment of the conditioned path") {
  const double nu = std::sqrt(17.0) / 2.0;
  Rng rng(kDefaultSeed, StreamDomain::bessel, 0, 1);
  const auto c = exponential_moment_check(nu, 2.0, 2.0, 2.0, 20000, rng);
  REQUIRE(c.pass);
  REQUIRE(c.expected == Approx(std::pow(2.0, nu - 0.5)).epsilon(1e-12));
  REQUIRE(c.std_error > 0.0);

  Rng rng0(kDefaultSeed, StreamDomain::bessel, 0, 2);
  const auto trivial = exponential_moment_check(nu, 0.0, 2.0, 2.0, 10, rng0);
  REQUIRE(trivial.pass);
  REQUIRE(trivial.observed == 1.0);

  REQUIRE_THROWS_AS(exponential_moment_check(nu, 2.0, 2.0, 0.9, 10, rng0),
                    std::invalid_argument);
  REQUIRE_THROWS_AS(exponential_moment_check(nu, 2.0, 1.5, 2.0, 10, rng0),
                    std::invalid_argument);
}

TEST_CASE("steeper potentials plateau to an empirical sup bound") {
  const double nu = std::sqrt(17.0) / 2.0;
  Rng rng(kDefaultSeed, StreamDomain::bessel, 0, 3);
  const auto c = exponential_moment_check(nu, 2.0, 3.0, 2.0, 2000, rng);
  REQUIRE(c.pass);
  REQUIRE(c.observed >= 1.0);
}

TEST_CASE("hitting frequency matches the power law") {
  const double nu = std::sqrt(17.0) / 2.0;
  Rng rng(kDefaultSeed, StreamDomain::bessel, 0, 4);
  const auto c = hit_frequency_check(nu, 2.0, 1.0, 20000, rng);
  REQUIRE(c.pass);
  REQUIRE(c.expected == Approx(std::pow(0.5, 2.0 * nu)).epsilon(1e-12));
}

TEST_CASE("change of measure between radial dimensions") {
  Rng rng(kDefaultSeed, StreamDomain::bessel, 0, 5);
  REQUIRE(measure_change_check(1.0, 2.0, 3.0, 1.0, 3.0, 20000, rng).pass);
  REQUIRE_THROWS_AS(measure_change_check(1.0, 0.0, 3.0, 1.0, 3.0, 10, rng),
                    std::invalid_argument);
}

TEST_CASE("killed-path identity with the inverse-square potential") {
  // g equal to the invariant potential cancels the conditioned integrand, so
  // the right side is deterministic: (eps/x)^p
  Rng rng(kDefaultSeed, StreamDomain::bessel, 0, 6);
  const auto ex = exponents(Dimension::three);
  const auto id = killed_identity_check(
      Dimension::three, 1.0, 0.5, [](double r) { return 2.0 / (r * r); }, 20000, rng, 40.0);
  REQUIRE(id.check.pass);
  REQUIRE(id.rhs.mean == Approx(std::pow(0.5, ex.p)).margin(1e-12));
  REQUIRE(id.rhs.std_error < 1e-9);
  REQUIRE(id.lhs_bias_bound >= 0.0);
  REQUIRE(id.lhs_bias_bound < 0.15 * id.lhs.mean);
}

TEST_CASE("killed-path identity with a non-cancelling potential") {
  // g = 1/r^2 leaves a residual integrand -1/rho^2; by scale invariance of the
  // clock integral the conditioned side has the closed form of the unit case
  Rng rng(kDefaultSeed, StreamDomain::bessel, 0, 7);
  const double nu = std::sqrt(17.0) / 2.0;
  const auto id = killed_identity_check(
      Dimension::three, 1.5, 0.75, [](double r) { return 1.0 / (r * r); }, 5000, rng, 40.0);
  REQUIRE(id.check.pass);
  const double target = std::pow(0.5, exponents(Dimension::three).p) *
                        exponential_moment_closed_form(nu, 1.0, 2.0);
  REQUIRE(std::fabs(id.rhs.mean - target) <= 3.0 * id.rhs.std_error);

  REQUIRE_THROWS_AS(killed_identity_check(
                        Dimension::three, 0.5, 0.5, [](double) { return 0.0; }, 10, rng),
                    std::invalid_argument);
}

TEST_CASE("excess functional degenerates at the critical datum") {
  Rng rng(kDefaultSeed, StreamDomain::bessel, 0, 8);
  const auto crit = solve_u(Dimension::three, exponents(Dimension::three).lambda_d, 1.0);
  const auto est = excess_functional(crit, 5.0, 200, rng);
  REQUIRE(est.mean == Approx(1.0).margin(1e-12));
  REQUIRE(est.std_error < 1e-9);

  REQUIRE_THROWS_AS(excess_functional(crit, 0.5, 10, rng), std::invalid_argument);
  const auto off = solve_u(Dimension::three, 1.0, 0.5);
  REQUIRE_THROWS_AS(excess_functional(off, 5.0, 10, rng), std::invalid_argument);
  const auto blow = solve_u_infinity(Dimension::three, 1.0);
  REQUIRE_THROWS_AS(excess_functional(blow, 5.0, 10, rng), std::invalid_argument);
}

TEST_CASE("limit constant: exact branch at the critical datum") {
  Rng rng(kDefaultSeed, StreamDomain::bessel, 0, 9);
  const auto lc = limit_constant(Dimension::three, exponents(Dimension::three).lambda_d, 100, rng);
  REQUIRE(lc.trace.size() == lc.r_grid.size());
  for (const auto& e : lc.trace) {
    REQUIRE(e.mean == 1.0);
    REQUIRE(e.std_error == 0.0);
  }
  REQUIRE(lc.value.mean == 1.0);
  REQUIRE(lc.monotone_consistent);
}

TEST_CASE("limit constant brackets the critical datum") {
  Rng lo_rng(kDefaultSeed, StreamDomain::bessel, 0, 10);
  const auto lo = limit_constant(Dimension::three, 1.0, 1500, lo_rng, {4.0, 8.0, 16.0});
  REQUIRE(lo.monotone_consistent);
  REQUIRE(lo.value.mean - 3.0 * lo.value.std_error > 1.0);

  Rng hi_rng(kDefaultSeed, StreamDomain::bessel, 0, 11);
  const auto hi = limit_constant(Dimension::three, 4.0, 1500, hi_rng, {4.0, 8.0, 16.0});
  REQUIRE(hi.monotone_consistent);
  REQUIRE(hi.value.mean + 3.0 * hi.value.std_error < 1.0);
  REQUIRE(hi.value.mean - 3.0 * hi.value.std_error > 0.0);

  Rng bad(kDefaultSeed, StreamDomain::bessel, 0, 12);
  REQUIRE_THROWS_AS(limit_constant(Dimension::three, 0.0, 10, bad), std::invalid_argument);
}

TEST_CASE("excess ratio against the solver") {
  Rng rng(kDefaultSeed, StreamDomain::bessel, 0, 13);
  const auto u1 = solve_u(Dimension::three, 1.0, 1.0);
  const auto c = excess_ratio_check(u1, 3.0, 1.5, 8000, rng, 40.0);
  REQUIRE(c.pass);
  REQUIRE_THROWS_AS(excess_ratio_check(u1, 1.5, 3.0, 10, rng), std::invalid_argument);
}

TEST_CASE("conditioned path sampler") {
  BesselParams params;
  params.dim_param = 0.0;  // unused by the h-transform sampler
  params.start = 3.0;
  params.inner_radius = 1.0;

  Rng a(kDefaultSeed, StreamDomain::bessel, 0, 14);
  const auto path = sample_conditioned_path(params, 2.0, a);
  REQUIRE(path.size() >= 2);
  REQUIRE(path.front().first == 0.0);
  REQUIRE(path.front().second == 3.0);
  REQUIRE(path.back().second == Approx(1.0).margin(1e-12));
  for (std::size_t i = 1; i < path.size(); ++i) {
    REQUIRE(path[i].first > path[i - 1].first);
    REQUIRE(path[i].second > 0.0);
  }

  // counter-based streams: same coordinates, same path
  Rng b(kDefaultSeed, StreamDomain::bessel, 0, 14);
  const auto again = sample_conditioned_path(params, 2.0, b);
  REQUIRE(again.size() == path.size());
  REQUIRE(again.back().first == path.back().first);

  params.start = 0.5;
  REQUIRE(sample_conditioned_path(params, 2.0, a).empty());
  params.start = 3.0;
  REQUIRE_THROWS_AS(sample_conditioned_path(params, 0.0, a), std::invalid_argument);
}
