#include <catch2/catch.hpp>

#include <cmath>
#include <random>

#include "sbmlab/constants.hpp"
#include "sbmlab/radial_ode.hpp"

using namespace sbmlab;

namespace {

// Richardson-extrapolated radial Laplacian of an interpolated profile.  This is
// the independent part of the suite: a solution is accepted only if it satisfies
// the defining equation lap(u) = u^2 on a stencil the solver never saw.
double radial_laplacian(const RadialSolution& sol, int d, double r, double h) {
  auto u = [&](double x) { return sol.value_at(x); };
  const double d2 = (u(r + h) - 2.0 * u(r) + u(r - h)) / (h * h);
  const double d1 = (u(r + h) - u(r - h)) / (2.0 * h);
  return d2 + (d - 1) / r * d1;
}

double worst_equation_residual(const RadialSolution& sol, int d, double r_lo,
                               double r_hi) {
  double worst = 0.0;
  for (double r = r_lo; r <= r_hi; r *= 1.45) {
    const double h = 0.03 * r;
    const double a = radial_laplacian(sol, d, r, h);
    const double b = radial_laplacian(sol, d, r, h / 2);
    const double lap = (4.0 * b - a) / 3.0;
    const double uu = sol.value_at(r) * sol.value_at(r);
    worst = std::max(worst, std::fabs(lap - uu) / uu);
  }
  return worst;
}

}  // namespace

TEST_CASE("critical boundary datum reproduces the inverse-square profile") {
  for (auto d : {Dimension::one, Dimension::two, Dimension::three}) {
    const auto ex = exponents(d);
    for (double eps : {0.25, 1.0, 2.0}) {
      const auto sol = solve_u(d, ex.lambda_d, eps);
      for (double r = 1.0; r <= 50.0; r *= 1.7) {
        if (r <= eps) continue;
        REQUIRE(sol.value_at(r) == Approx(ex.lambda_d / (r * r)).epsilon(1e-6));
      }
    }
  }
}

TEST_CASE("near-critical data stay pinned to the inverse-square profile") {
  // the invariant profile is the large-radius attractor, so a datum offset of
  // delta can never grow: sup_r |r^2 u / lambda_d - 1| <= delta
  const auto ex = exponents(Dimension::three);
  for (double f : {1.0 - 2e-6, 1.0 + 2e-6, 1.0 - 1e-3, 1.0 + 1e-3}) {
    const auto sol = solve_u(Dimension::three, ex.lambda_d * f, 0.5);
    for (double r = 0.5; r <= 32.0; r *= 2.0) {
      const double dev = std::fabs(sol.value_at(r) * r * r / ex.lambda_d - 1.0);
      REQUIRE(dev <= 2.0 * std::fabs(f - 1.0) + 1e-9);
    }
  }
}

TEST_CASE("boundary datum is honored exactly") {
  for (auto d : {Dimension::one, Dimension::two, Dimension::three}) {
    for (double s : {0.3, 1.0, 7.5}) {
      for (double eps : {0.2, 0.5, 1.3}) {
        const auto sol = solve_u(d, s, eps);
        REQUIRE(sol.value_at(eps) * eps * eps == Approx(s).epsilon(1e-10));
      }
    }
  }
}

TEST_CASE("exterior solutions satisfy the equation on an independent stencil") {
  struct Case {
    Dimension d;
    double s, eps;
  };
  for (const auto& c : {Case{Dimension::three, 0.25, 0.5}, Case{Dimension::three, 1.0, 0.5},
                        Case{Dimension::three, 6.0, 0.3}, Case{Dimension::two, 1.5, 0.7},
                        Case{Dimension::one, 0.8, 0.6}}) {
    const auto sol = solve_u(c.d, c.s, c.eps);
    REQUIRE(worst_equation_residual(sol, to_int(c.d), 1.4 * c.eps, 40.0) < 1e-5);
  }
  const auto blow = solve_u_infinity(Dimension::three, 1.0);
  REQUIRE(worst_equation_residual(blow, 3, 1.5, 40.0) < 1e-5);
}

TEST_CASE("scaling invariance of the exterior problem") {
  // u_{s,eps}(r) = eps^-2 u_{s,1}(r/eps)
  std::mt19937_64 gen(42);
  std::uniform_real_distribution<double> us(0.05, 30.0), ue(0.1, 3.0), ur(1.05, 40.0);
  for (int k = 0; k < 20; ++k) {
    const auto d = static_cast<Dimension>(1 + static_cast<int>(gen() % 3));
    const double s = us(gen), eps = ue(gen), rho = ur(gen);
    const double a = solve_u(d, s, eps).value_at(rho * eps);
    const double b = solve_u(d, s, 1.0).value_at(rho) / (eps * eps);
    REQUIRE(a == Approx(b).epsilon(1e-6));
  }
}

TEST_CASE("frozen reference values") {
  // values cross-validated against the equation-residual oracle above
  REQUIRE(solve_u(Dimension::three, 0.25, 0.5).value_at(1.0) ==
          Approx(0.3950446676).epsilon(1e-7));
  REQUIRE(solve_u(Dimension::three, 0.5, 0.5).value_at(1.0) ==
          Approx(0.7074939318).epsilon(1e-7));
  REQUIRE(solve_u(Dimension::three, 1.0, 0.5).value_at(1.0) ==
          Approx(1.2180924175).epsilon(1e-7));
  REQUIRE(solve_u(Dimension::two, 1.5, 0.7).value_at(1.4) ==
          Approx(1.1107442317).epsilon(1e-7));
  REQUIRE(solve_u(Dimension::one, 0.8, 0.6).value_at(1.0) ==
          Approx(1.43728613).epsilon(1e-7));
  REQUIRE(solve_u_infinity(Dimension::three, 1.0).value_at(2.0) ==
          Approx(4.6434995630).epsilon(1e-7));
  REQUIRE(solve_u_infinity(Dimension::three, 0.2).value_at(1.0) ==
          Approx(5.5380383400).epsilon(1e-6));
}

TEST_CASE("blow-up datum scales like the finite one") {
  const double a = solve_u_infinity(Dimension::three, 0.2).value_at(1.0);
  const double b = 25.0 * solve_u_infinity(Dimension::three, 1.0).value_at(5.0);
  REQUIRE(a == Approx(b).epsilon(1e-9));
}

TEST_CASE("ordering in the boundary datum") {
  const auto lo = solve_u(Dimension::three, 0.25, 0.5);
  const auto mid = solve_u(Dimension::three, 1.0, 0.5);
  const auto blow = solve_u_infinity(Dimension::three, 0.5);
  for (double r : {0.6, 1.0, 3.0, 10.0}) {
    REQUIRE(lo.value_at(r) < mid.value_at(r));
    REQUIRE(mid.value_at(r) < blow.value_at(r));
  }
}

TEST_CASE("far field approaches the inverse-square profile from the datum side") {
  const auto ex = exponents(Dimension::three);
  const auto sub = solve_u(Dimension::three, 1.0, 0.5);    // datum below critical
  const auto sup = solve_u(Dimension::three, 6.0, 0.3);    // datum above critical
  const auto blow = solve_u_infinity(Dimension::three, 1.0);
  REQUIRE(sub.tail_coefficient() < 0.0);
  REQUIRE(sup.tail_coefficient() > 0.0);
  REQUIRE(blow.tail_coefficient() > 0.0);
  // the gap decays with the slow characteristic exponent p
  const double ratio = sub.excess_at(20.0) / sub.excess_at(10.0) * std::pow(2.0, ex.p);
  REQUIRE(std::fabs(ratio - 1.0) < 0.06);
  REQUIRE(std::fabs(sub.excess_at(10.0) - (sub.value_at(10.0) - v_infinity(Dimension::three, 10.0))) <
          1e-12);
}

TEST_CASE("radial derivative accessor matches finite differences") {
  const auto sol = solve_u(Dimension::three, 1.0, 0.5);
  auto u = [&](double x) { return sol.value_at(x); };
  for (double r : {0.8, 2.0, 9.0}) {
    const double h = 0.02 * r;
    auto fd = [&](double hh) { return (u(r + hh) - u(r - hh)) / (2.0 * hh); };
    const double rich = (4.0 * fd(h / 2) - fd(h)) / 3.0;
    REQUIRE(sol.deriv_at(r) == Approx(rich).epsilon(1e-5));
  }
}

TEST_CASE("datum sensitivity matches finite differences") {
  const auto ex = exponents(Dimension::three);
  for (double lam : {1.0, 4.0}) {
    const double h = 1e-3;
    const double fd = (solve_u(Dimension::three, lam + h, 0.5).value_at(2.0) -
                       solve_u(Dimension::three, lam - h, 0.5).value_at(2.0)) /
                      (2.0 * h);
    REQUIRE(du_dlambda(Dimension::three, lam, 0.5, 2.0) == Approx(fd).epsilon(1e-5));
  }
  // at the critical datum the sensitivity has a closed form
  const double cf = std::pow(2.0 / 0.5, 2.0 - ex.p) / 4.0;
  REQUIRE(du_dlambda(Dimension::three, ex.lambda_d, 0.5, 2.0) == Approx(cf).epsilon(1e-12));
  const double h = 1e-3;
  const double fd = (solve_u(Dimension::three, ex.lambda_d + h, 0.5).value_at(2.0) -
                     solve_u(Dimension::three, ex.lambda_d - h, 0.5).value_at(2.0)) /
                    (2.0 * h);
  REQUIRE(cf == Approx(fd).epsilon(1e-5));
}

TEST_CASE("normalized point source has the advertised origin strength") {
  const double pi = 3.14159265358979323846;
  const auto v3 = solve_v(Dimension::three, 2.0);
  REQUIRE(v3.value_at(1e-4) * 2.0 * pi * 1e-4 == Approx(2.0).epsilon(5e-3));
  REQUIRE(worst_equation_residual(v3, 3, 0.02, 5.0) < 1e-5);
  const auto v2 = solve_v(Dimension::two, 1.5);
  REQUIRE(v2.value_at(1e-5) * pi / std::log(1e5) == Approx(1.5).epsilon(5e-2));
  // monotone in the transform parameter
  REQUIRE(solve_v(Dimension::three, 1.0).value_at(0.5) < solve_v(Dimension::three, 3.0).value_at(0.5));
  REQUIRE_THROWS_AS(solve_v(Dimension::one, 1.0), std::invalid_argument);
  REQUIRE_THROWS_AS(solve_v(Dimension::three, 0.0), std::invalid_argument);
}

TEST_CASE("interior self-check and cross-dimension comparisons pass") {
  REQUIRE(max_scaled_defect(solve_u(Dimension::three, 4.0, 0.5)) < 1e-7);
  REQUIRE(max_scaled_defect(solve_u(Dimension::two, 1.5, 0.7)) < 1e-7);
  REQUIRE(max_scaled_defect(solve_u_infinity(Dimension::three, 1.0)) < 1e-7);
  REQUIRE(all_pass(comparison_checks(Dimension::two)));
  REQUIRE(all_pass(comparison_checks(Dimension::three)));
}

TEST_CASE("input validation") {
  REQUIRE_THROWS_AS(solve_u(Dimension::three, 0.0, 0.5), std::invalid_argument);
  REQUIRE_THROWS_AS(solve_u(Dimension::three, -1.0, 0.5), std::invalid_argument);
  REQUIRE_THROWS_AS(solve_u(Dimension::three, 1.0, 0.0), std::invalid_argument);
  {
    OdeOptions opt;
    opt.rmax = 1.0;  // must exceed twice the boundary radius
    REQUIRE_THROWS_AS(solve_u(Dimension::three, 1.0, 0.5, opt), std::invalid_argument);
  }
  REQUIRE_THROWS_AS(solve_u_infinity(Dimension::three, 0.0), std::invalid_argument);
  REQUIRE_THROWS_AS(du_dlambda(Dimension::three, 1.0, 0.5, 0.5), std::invalid_argument);
  // evaluating a finite-datum solution inside its boundary radius is an error
  const auto sol = solve_u(Dimension::three, 1.0, 0.5);
  REQUIRE_THROWS_AS(sol.value_at(0.49), std::domain_error);
}
