#pragma once
// Critical branching Brownian particle approximation of the measure-valued
// process.  A unit of initial mass is carried by N particles of mass 1/N;
// each particle diffuses as an independent Brownian motion and at rate N dies
// leaving 0 or 2 copies with probability 1/2 each, which matches the limit's
// quadratic variation [M(φ)]_t = ∫ X_s(φ²) ds.  Branch times are exact
// exponential clocks, so there is no branching discretization bias and the
// spatial step is free to adapt: the step is clamp(adapt_coeff·gap², dt_min,
// dt_max) where gap is the distance to the nearest tracked boundary, so at
// the default coefficient the per-step displacement matches the gap.  Straddle
// steps record a definite crossing; near misses are resolved by the Brownian
// bridge between the sampled endpoints (crossing probability exp(-2ab/h),
// exact for the interpolating bridge — conditioning on the endpoints also
// cancels the radial drift), which removes the O(√dt) monitoring bias and
// keeps the boundary from becoming a sticky Zeno trap for the step size.
//
// Clusters are processed depth-first: exit masses, range hits and occupation
// integrals are all sums over ancestral lines or particle paths, so no time
// synchronization across the population is needed (the optional total-mass
// path is binned per particle lifetime).  A time cap truncates the rare
// long-lived clusters; the truncated remnant is reported, and mean-exit-mass /
// mean-local-time accounting is closed exactly by adding each alive particle's
// conditional expectation (the harmonic hitting weight per uncrossed radius,
// and in d=3 the Green kernel at each probe).  The completed fields are
// unbiased for means at any cap.  Nonlinear functionals (Laplace transforms
// of the exit mass) converge only like t^{-1/2} in the cap, so callers should
// request the survivor snapshot and close them with the exact per-particle
// conditional factor exp(-W(r)/N), W the matching exit-exponent function.
#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <utility>
#include <vector>

#include "sbmlab/constants.hpp"
#include "sbmlab/rng.hpp"

namespace sbmlab {

using Point = std::array<double, 3>;  // first d coordinates are in use

struct Atom {
  Point pos{};
  double mass = 0.0;
};

struct InitialMeasure {
  std::vector<Atom> atoms;
  double total_mass() const {
    double m = 0.0;
    for (const auto& a : atoms) m += a.mass;
    return m;
  }
};

inline InitialMeasure point_mass(const Point& x, double mass = 1.0) {
  return InitialMeasure{{Atom{x, mass}}};
}

// Nested tracking spheres around one center, outermost first.
struct SphereFamily {
  Point center{};
  std::vector<double> radii;  // strictly decreasing, all positive
};

struct LocalTimeSpec {
  std::vector<Point> probes;
  double bandwidth = 0.0;  // probe ball radius; must be positive when probes set
};

struct ClusterParams {
  int d = 3;
  double N = 1e4;            // particles per unit initial mass (mass 1/N each)
  double dt_min = 1e-6;      // step floor next to a tracked boundary
  double dt_max = 0.05;      // step cap far from everything
  double adapt_coeff = 1.0;  // step = clamp(coeff·gap², dt_min, dt_max)
  double t_cap = 4.0;        // truncation time for long-lived clusters
  std::uint64_t step_cap = 10000000;  // particle-steps per cluster
  bool track_mass_path = false;
  double mass_path_dt = 0.01;
  bool record_survivors = false;  // snapshot (radius, crossed) of particles alive at t_cap
};

struct SimulationOutput {
  std::vector<double> exit_mass;            // recorded ancestral first crossings
  std::vector<double> completed_exit_mass;  // + harmonic completion of the remnant
  std::vector<std::uint8_t> range_hit;      // any crossing recorded at radius i
  std::vector<double> local_time;            // per probe, kernel-smoothed
  std::vector<double> completed_local_time;  // + Green completion (d=3 only)
  double remnant_mass = 0.0;                 // alive mass at t_cap
  // distance-from-center and crossed count per particle alive at t_cap, when
  // requested; lets callers build conditional-expectation completions beyond
  // the built-in harmonic one (mass 1/N each)
  std::vector<std::pair<double, std::uint32_t>> survivors;
  std::vector<double> mass_path;             // X_t(1) snapshots when tracked
  std::uint64_t steps = 0;
  std::uint64_t branch_events = 0;
  bool capped = false;

  bool exit_empty(std::size_t i) const { return range_hit.at(i) == 0; }
};

namespace particle_detail {

inline double dist(const Point& a, const Point& b, int d) {
  double s = 0.0;
  for (int k = 0; k < d; ++k) s += (a[k] - b[k]) * (a[k] - b[k]);
  return std::sqrt(s);
}

inline double ball_volume(int d, double h) {
  const double pi = 3.14159265358979323846;
  switch (d) {
    case 1: return 2.0 * h;
    case 2: return pi * h * h;
    default: return 4.0 * pi * h * h * h / 3.0;
  }
}

// Green kernel of Δ/2 in d=3 averaged over the probe ball (uniform-ball
// potential), so remnant completion stays finite for particles inside it.
inline double smoothed_green3(double rho, double R) {
  const double pi = 3.14159265358979323846;
  if (rho >= R) return 1.0 / (2.0 * pi * rho);
  return (3.0 * R * R - rho * rho) / (4.0 * pi * R * R * R);
}

// Fraction of the straight segment a->b lying inside the ball around c.
// Occupancy weights each step by this instead of the endpoint indicator,
// which would drop fast transits entirely.
inline double chord_fraction(const Point& a, const Point& b, const Point& c, double R, int d) {
  double uu = 0.0, wu = 0.0, ww = 0.0;
  for (int k = 0; k < d; ++k) {
    const double u = b[k] - a[k], w = a[k] - c[k];
    uu += u * u;
    wu += w * u;
    ww += w * w;
  }
  if (uu == 0.0) return ww <= R * R ? 1.0 : 0.0;
  const double disc = wu * wu - uu * (ww - R * R);
  if (disc <= 0.0) return 0.0;
  const double sq = std::sqrt(disc);
  const double t0 = std::max((-wu - sq) / uu, 0.0);
  const double t1 = std::min((-wu + sq) / uu, 1.0);
  return std::max(t1 - t0, 0.0);
}

struct Lineage {
  Point pos;
  double t;
  double t_branch;
  std::uint32_t crossed;  // radii already crossed by this ancestral line
};

// One cluster from a single particle at `start`, accumulated into `out`.
// exit_mass / range_hit / local_time take recorded events; completed_* take
// only the completion part here (the raw part is added in finalize_output).
inline void run_cluster(const ClusterParams& par, const SphereFamily& sph,
                        const LocalTimeSpec& lt, const Point& start, Rng& rng,
                        SimulationOutput& out) {
  const int d = par.d;
  const double inv_n = 1.0 / par.N;
  const std::size_t m = sph.radii.size();
  const std::size_t np = lt.probes.size();
  const bool prune_exhausted = !par.track_mass_path && np == 0 && !par.record_survivors;
  const double inf = std::numeric_limits<double>::infinity();

  std::uint64_t steps = 0;
  std::vector<Lineage> stack;
  stack.push_back({start, 0.0, rng.exponential() / par.N, 0});
  while (!stack.empty()) {
    Lineage p = stack.back();
    stack.pop_back();
    double r0 = dist(p.pos, sph.center, d);
    for (bool alive = true; alive;) {
      if (p.crossed == m && prune_exhausted) break;  // nothing left to measure
      if (++steps > par.step_cap) {
        out.capped = true;
        out.steps += steps;
        return;
      }
      double gap = inf;
      if (p.crossed < m) {
        // resolve the clearance when close and cap at a fraction of the
        // radius during approach: the bridge formula treats the boundary as
        // flat, so the step displacement must stay small against the radius
        // as well as against the distance to it
        const double rad = sph.radii[p.crossed];
        gap = std::min(r0 - rad, 0.25 * rad);
      }
      // occupancy has no bridge correction, so steps near a probe must
      // resolve the ball itself, not just the distance to its surface
      for (std::size_t j = 0; j < np; ++j)
        gap = std::min(gap, std::max(dist(p.pos, lt.probes[j], d) - 2.0 * lt.bandwidth,
                                     0.25 * lt.bandwidth));
      double h = std::clamp(par.adapt_coeff * gap * gap, par.dt_min, par.dt_max);
      bool branch_now = false, cap_now = false;
      if (p.t + h >= p.t_branch) {
        h = p.t_branch - p.t;
        branch_now = true;
      }
      if (p.t + h >= par.t_cap) {
        h = par.t_cap - p.t;
        branch_now = false;
        cap_now = true;
      }

      Point y1 = p.pos;
      const double sh = std::sqrt(std::max(h, 0.0));
      for (int k = 0; k < d; ++k) y1[k] += sh * rng.normal();
      double r1 = dist(y1, sph.center, d);

      for (std::size_t j = 0; j < np; ++j) {
        const double f = chord_fraction(p.pos, y1, lt.probes[j], lt.bandwidth, d);
        if (f > 0.0) out.local_time[j] += inv_n * h * f;
      }
      if (par.track_mass_path && !out.mass_path.empty()) {
        // add this lifetime slice to the bins whose center it covers
        const double dtb = par.mass_path_dt;
        auto k0 = static_cast<std::int64_t>(std::ceil(p.t / dtb - 0.5));
        auto k1 = static_cast<std::int64_t>(std::ceil((p.t + h) / dtb - 0.5));
        k0 = std::max<std::int64_t>(k0, 0);
        k1 = std::min<std::int64_t>(k1, static_cast<std::int64_t>(out.mass_path.size()));
        for (std::int64_t k = k0; k < k1; ++k) out.mass_path[static_cast<std::size_t>(k)] += inv_n;
      }

      // first-crossing accounting: definite passages outermost-first, then the
      // Brownian-bridge mid-step excursion against the next uncrossed radius
      while (p.crossed < m && r1 <= sph.radii[p.crossed]) {
        out.exit_mass[p.crossed] += inv_n;
        out.range_hit[p.crossed] = 1;
        ++p.crossed;
      }
      if (p.crossed < m && h > 0.0) {
        const double a = r0 - sph.radii[p.crossed], b = r1 - sph.radii[p.crossed];
        if (a > 0.0 && b > 0.0 && rng.uniform() < std::exp(-2.0 * a * b / h)) {
          // the continuation stays at the sampled endpoint: r1 was drawn
          // first and the touch event conditioned on it, so (endpoint, hit)
          // already has the right joint law
          out.exit_mass[p.crossed] += inv_n;
          out.range_hit[p.crossed] = 1;
          ++p.crossed;
        }
      }

      p.pos = y1;
      p.t += h;
      r0 = r1;
      if (cap_now) {
        out.remnant_mass += inv_n;
        if (par.record_survivors) out.survivors.emplace_back(r1, p.crossed);
        for (std::size_t i = p.crossed; i < m; ++i)
          out.completed_exit_mass[i] += inv_n * (d == 3 ? sph.radii[i] / r1 : 1.0);
        if (d == 3)
          for (std::size_t j = 0; j < np; ++j)
            out.completed_local_time[j] +=
                inv_n * smoothed_green3(dist(p.pos, lt.probes[j], d), lt.bandwidth);
        break;
      }
      if (branch_now) {
        ++out.branch_events;
        if (rng.uniform() < 0.5) {
          alive = false;  // no offspring
        } else {
          stack.push_back({p.pos, p.t, p.t + rng.exponential() / par.N, p.crossed});
          p.t_branch = p.t + rng.exponential() / par.N;
        }
      }
    }
  }
  out.steps += steps;
}

inline SimulationOutput make_output(const ClusterParams& par, const SphereFamily& sph,
                                    const LocalTimeSpec& lt) {
  SimulationOutput out;
  out.exit_mass.assign(sph.radii.size(), 0.0);
  out.completed_exit_mass.assign(sph.radii.size(), 0.0);
  out.range_hit.assign(sph.radii.size(), 0);
  out.local_time.assign(lt.probes.size(), 0.0);
  out.completed_local_time.assign(lt.probes.size(), 0.0);
  if (par.track_mass_path)
    out.mass_path.assign(
        static_cast<std::size_t>(std::ceil(par.t_cap / par.mass_path_dt)), 0.0);
  return out;
}

inline void finalize_output(const ClusterParams& par, const LocalTimeSpec& lt,
                            SimulationOutput& out) {
  for (std::size_t i = 0; i < out.exit_mass.size(); ++i)
    out.completed_exit_mass[i] += out.exit_mass[i];
  const double vol = lt.probes.empty() ? 1.0 : ball_volume(par.d, lt.bandwidth);
  for (std::size_t j = 0; j < out.local_time.size(); ++j) {
    out.local_time[j] /= vol;
    out.completed_local_time[j] =
        out.local_time[j] + (par.d == 3 ? out.completed_local_time[j] : 0.0);
  }
}

}  // namespace particle_detail

inline void validate_configuration(const ClusterParams& par, const InitialMeasure& x0,
                                   const SphereFamily& sph, const LocalTimeSpec& lt) {
  if (par.d < 1 || par.d > 3)
    throw std::invalid_argument("particle: dimension must be 1, 2 or 3");
  if (!(par.N >= 1.0)) throw std::invalid_argument("particle: N must be >= 1");
  if (!(par.dt_min > 0.0) || !(par.dt_max >= par.dt_min))
    throw std::invalid_argument("particle: need 0 < dt_min <= dt_max");
  if (!(par.t_cap > 0.0)) throw std::invalid_argument("particle: t_cap must be positive");
  for (std::size_t i = 0; i < sph.radii.size(); ++i) {
    if (!(sph.radii[i] > 0.0))
      throw std::invalid_argument("particle: sphere radii must be positive");
    if (i > 0 && !(sph.radii[i] < sph.radii[i - 1]))
      throw std::invalid_argument("particle: sphere radii must be strictly decreasing");
  }
  for (const auto& a : x0.atoms) {
    if (!(a.mass > 0.0)) throw std::invalid_argument("particle: atom masses must be positive");
    if (!sph.radii.empty() &&
        !(particle_detail::dist(a.pos, sph.center, par.d) > sph.radii.front()))
      throw std::invalid_argument(
          "particle: every initial atom must lie strictly outside the largest sphere");
  }
  if (!lt.probes.empty() && !(lt.bandwidth > 0.0))
    throw std::invalid_argument("particle: local-time bandwidth must be positive");
}

// One cluster from a single ancestor of mass 1/N.  Functionals of the cluster
// decomposition are estimated as N · (average over clusters), exact in the
// limit for functionals vanishing on the null cluster.
inline SimulationOutput simulate_cluster(const ClusterParams& par, const Point& ancestor,
                                         const SphereFamily& sph, const LocalTimeSpec& lt,
                                         Rng& rng) {
  validate_configuration(par, point_mass(ancestor), sph, lt);
  SimulationOutput out = particle_detail::make_output(par, sph, lt);
  particle_detail::run_cluster(par, sph, lt, ancestor, rng, out);
  particle_detail::finalize_output(par, lt, out);
  return out;
}

// Poisson superposition: Poisson(N·mass) independent clusters per atom,
// approximating the process started from the full initial measure.
inline SimulationOutput simulate_superposition(const ClusterParams& par,
                                               const InitialMeasure& x0,
                                               const SphereFamily& sph,
                                               const LocalTimeSpec& lt, Rng& rng) {
  validate_configuration(par, x0, sph, lt);
  SimulationOutput out = particle_detail::make_output(par, sph, lt);
  for (const auto& atom : x0.atoms) {
    const std::uint64_t n = rng.poisson(par.N * atom.mass);
    for (std::uint64_t i = 0; i < n && !out.capped; ++i)
      particle_detail::run_cluster(par, sph, lt, atom.pos, rng, out);
  }
  particle_detail::finalize_output(par, lt, out);
  return out;
}

}  // namespace sbmlab
