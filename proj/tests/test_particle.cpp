#include <catch2/catch.hpp>

#include <cmath>

#include "sbmlab/particle.hpp"
#include "sbmlab/stats.hpp"

using namespace sbmlab;

namespace {
constexpr double kPi = 3.14159265358979323846;
}

TEST_CASE("chord fraction geometry") {
  using particle_detail::chord_fraction;
  const Point c{0.0, 0.0, 0.0};
  // fully inside / fully outside / half-covered
  REQUIRE(chord_fraction({-0.1, 0, 0}, {0.1, 0, 0}, c, 1.0, 3) == Approx(1.0));
  REQUIRE(chord_fraction({2, 0, 0}, {3, 0, 0}, c, 1.0, 3) == 0.0);
  REQUIRE(chord_fraction({0, 0, 0}, {2, 0, 0}, c, 1.0, 3) == Approx(0.5));
  // pass-through: covered length 2 out of 4
  REQUIRE(chord_fraction({-2, 0, 0}, {2, 0, 0}, c, 1.0, 3) == Approx(0.5));
  // off-axis chord: half-width sqrt(1 - 0.36) at offset 0.6
  const double half = std::sqrt(1.0 - 0.36);
  REQUIRE(chord_fraction({-2, 0.6, 0}, {2, 0.6, 0}, c, 1.0, 3) == Approx(half / 2.0));
  // zero-length segment degenerates to the indicator
  REQUIRE(chord_fraction({0.5, 0, 0}, {0.5, 0, 0}, c, 1.0, 3) == 1.0);
  REQUIRE(chord_fraction({1.5, 0, 0}, {1.5, 0, 0}, c, 1.0, 3) == 0.0);
  // dimension argument masks trailing coordinates
  REQUIRE(chord_fraction({-2, 0, 9}, {2, 0, 9}, c, 1.0, 2) == Approx(0.5));
}

TEST_CASE("smoothed kernel is continuous and monotone") {
  using particle_detail::smoothed_green3;
  const double R = 0.3;
  REQUIRE(smoothed_green3(2.0, R) == Approx(1.0 / (4.0 * kPi)));
  REQUIRE(smoothed_green3(R, R) == Approx(1.0 / (2.0 * kPi * R)));
  REQUIRE(smoothed_green3(R * (1.0 - 1e-9), R) == Approx(1.0 / (2.0 * kPi * R)).epsilon(1e-6));
  double prev = smoothed_green3(0.0, R);
  for (double rho = 0.05; rho < 1.0; rho += 0.05) {
    const double cur = smoothed_green3(rho, R);
    REQUIRE(cur <= prev + 1e-15);
    prev = cur;
  }
}

TEST_CASE("configuration validation") {
  ClusterParams par;
  SphereFamily sph;
  sph.radii = {1.0};
  LocalTimeSpec lt;
  const InitialMeasure x0 = point_mass({2.0, 0.0, 0.0});

  auto bad = par;
  bad.d = 0;
  REQUIRE_THROWS_AS(validate_configuration(bad, x0, sph, lt), std::invalid_argument);
  bad = par;
  bad.d = 4;
  REQUIRE_THROWS_AS(validate_configuration(bad, x0, sph, lt), std::invalid_argument);
  bad = par;
  bad.N = 0.5;
  REQUIRE_THROWS_AS(validate_configuration(bad, x0, sph, lt), std::invalid_argument);
  bad = par;
  bad.dt_min = 0.0;
  REQUIRE_THROWS_AS(validate_configuration(bad, x0, sph, lt), std::invalid_argument);
  bad = par;
  bad.dt_max = 0.5 * bad.dt_min;
  REQUIRE_THROWS_AS(validate_configuration(bad, x0, sph, lt), std::invalid_argument);
  bad = par;
  bad.t_cap = 0.0;
  REQUIRE_THROWS_AS(validate_configuration(bad, x0, sph, lt), std::invalid_argument);

  SphereFamily s2;
  s2.radii = {1.0, 1.0};
  REQUIRE_THROWS_AS(validate_configuration(par, x0, s2, lt), std::invalid_argument);
  s2.radii = {1.0, -0.5};
  REQUIRE_THROWS_AS(validate_configuration(par, x0, s2, lt), std::invalid_argument);

  REQUIRE_THROWS_AS(validate_configuration(par, point_mass({2, 0, 0}, 0.0), sph, lt),
                    std::invalid_argument);
  REQUIRE_THROWS_WITH(validate_configuration(par, point_mass({0.5, 0, 0}), sph, lt),
                      Catch::Contains("outside the largest sphere"));

  LocalTimeSpec badlt;
  badlt.probes = {{0, 0, 0}};
  badlt.bandwidth = 0.0;
  REQUIRE_THROWS_AS(validate_configuration(par, x0, sph, badlt), std::invalid_argument);
}

TEST_CASE("generator moments and stream independence") {
  Rng rng(kDefaultSeed, StreamDomain::particle, 0, 50);
  Accumulator pois, unif;
  const double lam = 7.3;
  for (int i = 0; i < 20000; ++i) {
    pois.add(static_cast<double>(rng.poisson(lam)));
    unif.add(rng.uniform());
  }
  const auto p = pois.estimate();
  REQUIRE(std::fabs(p.mean - lam) <= 4.0 * p.std_error);
  // Poisson variance equals the mean
  REQUIRE(p.std_error == Approx(std::sqrt(lam / 20000.0)).epsilon(0.1));
  const auto u = unif.estimate();
  REQUIRE(std::fabs(u.mean - 0.5) <= 4.0 * u.std_error);

  Rng a(kDefaultSeed, StreamDomain::particle, 3, 50);
  Rng b(kDefaultSeed, StreamDomain::particle, 4, 50);
  REQUIRE(a.uniform() != b.uniform());
}

TEST_CASE("mean exit mass matches the harmonic weight") {
  // one ancestor of mass 1/N: N times the cluster average estimates the
  // unit-mass expectation, which the branching dynamics preserve exactly
  ClusterParams par;
  par.d = 3;
  par.N = 200;
  par.t_cap = 0.5;
  SphereFamily sph;
  sph.radii = {1.0};
  LocalTimeSpec lt;
  Accumulator acc;
  for (int i = 0; i < 20000; ++i) {
    Rng rng(kDefaultSeed, StreamDomain::particle, static_cast<std::uint64_t>(i), 100);
    const auto out = simulate_cluster(par, {2.0, 0.0, 0.0}, sph, lt, rng);
    acc.add(par.N * out.completed_exit_mass[0]);
  }
  const auto est = acc.estimate();
  REQUIRE(std::fabs(est.mean - 0.5) <= 4.0 * est.std_error);
  REQUIRE(est.std_error < 0.05);
}

TEST_CASE("recurrent dimensions complete to full mass") {
  ClusterParams par;
  par.d = 2;
  par.N = 100;
  par.t_cap = 0.1;
  SphereFamily sph;
  sph.radii = {1.0};
  LocalTimeSpec lt;
  Accumulator acc;
  for (int i = 0; i < 10000; ++i) {
    Rng rng(kDefaultSeed, StreamDomain::particle, static_cast<std::uint64_t>(i), 101);
    const auto out = simulate_cluster(par, {1.5, 0.0, 0.0}, sph, lt, rng);
    acc.add(par.N * out.completed_exit_mass[0]);
  }
  const auto est = acc.estimate();
  REQUIRE(std::fabs(est.mean - 1.0) <= 4.0 * est.std_error);
  REQUIRE(est.std_error < 0.05);
}

TEST_CASE("smoothed occupancy matches the potential kernel") {
  // probe ball away from the source: the ball average of 1/(2 pi rho) equals
  // its center value, so smoothing adds no bias to the mean
  ClusterParams par;
  par.d = 3;
  par.N = 150;
  par.t_cap = 0.3;
  SphereFamily sph;
  LocalTimeSpec lt;
  lt.probes = {{0.0, 0.0, 0.0}};
  lt.bandwidth = 0.25;
  const double target = 1.0 / (2.0 * kPi * 1.5);
  Accumulator acc;
  for (int i = 0; i < 30000; ++i) {
    Rng rng(kDefaultSeed, StreamDomain::particle, static_cast<std::uint64_t>(i), 102);
    const auto out = simulate_cluster(par, {1.5, 0.0, 0.0}, sph, lt, rng);
    REQUIRE(out.local_time[0] <= out.completed_local_time[0] + 1e-15);
    acc.add(par.N * out.completed_local_time[0]);
  }
  const auto est = acc.estimate();
  REQUIRE(std::fabs(est.mean - target) <= 4.0 * est.std_error);
  REQUIRE(est.std_error < 0.25 * target);
}

TEST_CASE("superposition carries the initial mass through") {
  ClusterParams par;
  par.d = 3;
  par.N = 50;
  par.t_cap = 0.4;
  SphereFamily sph;
  sph.radii = {1.0};
  LocalTimeSpec lt;
  const InitialMeasure x0 = point_mass({2.0, 0.0, 0.0}, 2.5);
  Accumulator acc;
  for (int i = 0; i < 800; ++i) {
    Rng rng(kDefaultSeed, StreamDomain::particle, static_cast<std::uint64_t>(i), 103);
    const auto out = simulate_superposition(par, x0, sph, lt, rng);
    acc.add(out.completed_exit_mass[0]);
  }
  const auto est = acc.estimate();
  REQUIRE(std::fabs(est.mean - 1.25) <= 4.0 * est.std_error);
  REQUIRE(est.std_error < 0.04);
}

TEST_CASE("survivor snapshot and mass path bookkeeping") {
  ClusterParams par;
  par.d = 3;
  par.N = 300;
  par.t_cap = 0.05;
  par.record_survivors = true;
  par.track_mass_path = true;
  par.mass_path_dt = 0.01;
  SphereFamily sph;
  sph.radii = {1.0, 0.5};
  LocalTimeSpec lt;
  Rng rng(kDefaultSeed, StreamDomain::particle, 0, 104);
  const auto out = simulate_superposition(par, point_mass({1.5, 0.0, 0.0}), sph, lt, rng);

  REQUIRE_FALSE(out.capped);
  REQUIRE(out.survivors.size() / par.N == Approx(out.remnant_mass).margin(1e-9));
  for (const auto& [radius, crossed] : out.survivors) {
    REQUIRE(radius > 0.0);
    REQUIRE(crossed <= sph.radii.size());
  }
  REQUIRE(out.mass_path.size() == 5);
  REQUIRE(out.mass_path[0] == Approx(1.0).margin(0.25));
  for (double m : out.mass_path) REQUIRE(m >= 0.0);
  REQUIRE(out.exit_empty(0) == (out.range_hit[0] == 0));
}

TEST_CASE("a lineage cannot reach an inner sphere without the outer one") {
  ClusterParams par;
  par.d = 3;
  par.N = 300;
  par.t_cap = 0.6;
  SphereFamily sph;
  sph.radii = {1.0, 0.5};
  LocalTimeSpec lt;
  for (int i = 0; i < 300; ++i) {
    Rng rng(kDefaultSeed, StreamDomain::particle, static_cast<std::uint64_t>(i), 105);
    const auto out = simulate_cluster(par, {1.5, 0.0, 0.0}, sph, lt, rng);
    if (out.range_hit[1] == 1) REQUIRE(out.range_hit[0] == 1);
    REQUIRE(out.exit_mass[1] <= out.exit_mass[0] + 1e-15);
  }
}

TEST_CASE("identical streams reproduce identical runs") {
  ClusterParams par;
  par.d = 3;
  par.N = 120;
  par.t_cap = 0.4;
  par.record_survivors = true;
  SphereFamily sph;
  sph.radii = {1.0};
  LocalTimeSpec lt;
  lt.probes = {{0.0, 0.0, 0.0}};
  lt.bandwidth = 0.2;

  Rng a(kDefaultSeed, StreamDomain::particle, 11, 106);
  Rng b(kDefaultSeed, StreamDomain::particle, 11, 106);
  const auto oa = simulate_cluster(par, {1.6, 0.0, 0.0}, sph, lt, a);
  const auto ob = simulate_cluster(par, {1.6, 0.0, 0.0}, sph, lt, b);
  REQUIRE(oa.steps == ob.steps);
  REQUIRE(oa.branch_events == ob.branch_events);
  REQUIRE(oa.exit_mass[0] == ob.exit_mass[0]);
  REQUIRE(oa.completed_exit_mass[0] == ob.completed_exit_mass[0]);
  REQUIRE(oa.local_time[0] == ob.local_time[0]);
  REQUIRE(oa.remnant_mass == ob.remnant_mass);
  REQUIRE(oa.survivors == ob.survivors);

  Rng c(kDefaultSeed, StreamDomain::particle, 12, 106);
  const auto oc = simulate_cluster(par, {1.6, 0.0, 0.0}, sph, lt, c);
  REQUIRE(oc.steps != oa.steps);
}
