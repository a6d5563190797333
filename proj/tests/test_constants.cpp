#include <catch2/catch.hpp>

#include <cmath>
#include <numbers>

#include "sbmlab/constants.hpp"

using namespace sbmlab;

TEST_CASE("exponents match independent arithmetic in every dimension") {
  for (int d : {1, 2, 3}) {
    const auto ex = exponents(make_dimension(d));
    const double mu = (d - 2) / 2.0;
    const double lambda_d = 2.0 * (4 - d);
    const double nu = std::sqrt(mu * mu + 2.0 * lambda_d);
    const double p = mu + nu;
    CHECK(std::fabs(ex.mu - mu) <= 1e-12);
    CHECK(std::fabs(ex.lambda_d - lambda_d) <= 1e-12);
    CHECK(std::fabs(ex.nu - nu) <= 1e-12);
    CHECK(std::fabs(ex.p - p) <= 1e-12);
    CHECK(std::fabs(ex.alpha - (p - 2.0) / (4 - d)) <= 1e-12);
  }
}

TEST_CASE("exponent identities") {
  for (int d : {1, 2, 3}) {
    const auto ex = exponents(make_dimension(d));
    // p solves the indicial equation p(p+1) - (d-1)p = 2 lambda_d
    CHECK(ex.p * (ex.p + 1.0) - (d - 1.0) * ex.p == Approx(2.0 * ex.lambda_d).margin(1e-10));
    CHECK(ex.nu >= std::fabs(ex.mu));
    CHECK(ex.p > 2.0);
  }
  // d=3 closed forms
  const auto e3 = exponents(Dimension::three);
  CHECK(e3.p == Approx((1.0 + std::sqrt(17.0)) / 2.0).margin(1e-14));
  CHECK(e3.nu == Approx(std::sqrt(17.0) / 2.0).margin(1e-14));
  CHECK(e3.alpha == Approx((std::sqrt(17.0) - 3.0) / 2.0).margin(1e-14));
}

TEST_CASE("dimension helpers") {
  CHECK(to_int(Dimension::one) == 1);
  CHECK(to_int(Dimension::two) == 2);
  CHECK(to_int(Dimension::three) == 3);
  CHECK_THROWS_AS(make_dimension(0), std::invalid_argument);
  CHECK_THROWS_AS(make_dimension(4), std::invalid_argument);
}

TEST_CASE("normalizing factor psi0") {
  CHECK(psi0(Dimension::three, 0.25) == Approx(1.0 / (2.0 * std::numbers::pi * 0.25)));
  CHECK(psi0(Dimension::two, 0.1) == Approx(std::log(10.0) / std::numbers::pi));
  CHECK(psi0(Dimension::two, 2.0) == 0.0);  // log^+ clips at radius 1
  CHECK_THROWS_AS(psi0(Dimension::one, 0.5), std::invalid_argument);
  CHECK_THROWS_AS(psi0(Dimension::three, 0.0), std::invalid_argument);
}

TEST_CASE("stationary singular solution") {
  for (int d : {1, 2, 3}) {
    const Dimension dim = make_dimension(d);
    const auto ex = exponents(dim);
    for (double r : {0.25, 1.0, 3.0}) {
      CHECK(v_infinity(dim, r) == Approx(ex.lambda_d / (r * r)).margin(1e-14));
    }
  }
  CHECK_THROWS_AS(v_infinity(Dimension::three, 0.0), std::invalid_argument);
}
