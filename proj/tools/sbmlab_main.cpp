// Command-line front end.  Four subcommands share the seed/thread/output
// conventions:
//   ode     radial boundary-value solves with a CSV profile dump
//   bessel  conditioned-path and killed-path identities as named checks
//   sim     particle-cloud runs, per-replicate CSV plus a JSON summary
//   verify  experiment suites, JSON report plus CSV sample tables
// Exit codes: 0 all checks pass, 1 at least one check failed, 2 usage or
// configuration error.  Identical (options, seed) pairs produce identical
// bytes regardless of --threads.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "sbmlab/bessel.hpp"
#include "sbmlab/check.hpp"
#include "sbmlab/constants.hpp"
#include "sbmlab/io.hpp"
#include "sbmlab/particle.hpp"
#include "sbmlab/radial_ode.hpp"
#include "sbmlab/rng.hpp"
#include "sbmlab/stats.hpp"
#include "sbmlab/verify.hpp"

namespace {

using namespace sbmlab;
using nlohmann::ordered_json;

// options shared by every subcommand
struct RunSpec {
  int d = 3;
  std::uint64_t seed = kDefaultSeed;
  std::string out;
  long replicates = 0;  // 0 = subcommand default
  double dt = 0.0;      // 0 = subcommand default
  int threads = 1;
};

void add_common(CLI::App* cmd, RunSpec& spec, bool d_required) {
  auto* d_opt = cmd->add_option("--d", spec.d, "spatial dimension (1, 2, or 3)");
  if (d_required) d_opt->required();
  cmd->add_option("--seed", spec.seed, "master seed for all random streams");
  cmd->add_option("--out", spec.out, "output file path (CSV or JSON, by subcommand)");
  cmd->add_option("--replicates", spec.replicates, "replicate / path count override");
  cmd->add_option("--dt", spec.dt, "time-step override");
  cmd->add_option("--threads", spec.threads, "worker threads (results are thread-count independent)")
      ->check(CLI::PositiveNumber);
}

std::string stem_of(const std::string& path) {
  const auto dot = path.find_last_of('.');
  const auto slash = path.find_last_of('/');
  if (dot == std::string::npos || (slash != std::string::npos && dot < slash)) return path;
  return path.substr(0, dot);
}

void emit(const ordered_json& j) { std::cout << j.dump(2) << '\n'; }

int exit_code(const std::vector<CheckResult>& checks) { return all_pass(checks) ? 0 : 1; }

// ---- ode ------------------------------------------------------------------

int run_ode(const RunSpec& spec, double lambda, double eps, double at, bool infinite_datum,
            double rmax, int points) {
  const Dimension dim = make_dimension(spec.d);
  OdeOptions opt;
  if (spec.dt > 0.0) opt.grid_dt = spec.dt;
  const RadialSolution sol =
      infinite_datum ? solve_u_infinity(dim, eps, opt) : solve_u(dim, lambda, eps, opt);

  if (!spec.out.empty()) {
    if (!(rmax > eps)) throw CLI::ValidationError("ode", "--rmax must exceed --eps");
    std::vector<std::vector<double>> rows;
    rows.reserve(static_cast<std::size_t>(points));
    const double lo = std::log(eps), hi = std::log(rmax);
    for (int i = 0; i < points; ++i) {
      const double r = std::exp(lo + (hi - lo) * i / (points - 1));
      rows.push_back({r, sol.value_at(r), r * r * sol.value_at(r), sol.excess_at(r),
                      sol.deriv_at(r)});
    }
    save_csv(spec.out, {"r", "u", "r2u", "excess", "du_dr"}, rows);
  }

  ordered_json j;
  j["d"] = spec.d;
  j["datum"] = infinite_datum ? "infinite" : "finite";
  if (!infinite_datum) j["lambda"] = lambda;
  j["eps"] = eps;
  j["r"] = at;
  j["u"] = sol.value_at(at);
  j["r2u"] = at * at * sol.value_at(at);
  j["excess"] = sol.excess_at(at);
  j["tail_coefficient"] = sol.tail_coefficient();
  j["max_scaled_defect"] = max_scaled_defect(sol);
  emit(j);
  return 0;
}

// ---- bessel ---------------------------------------------------------------

int run_bessel(const RunSpec& spec, const std::string& check, double nu, double gamma,
               double q, double mu, double lambda, double r, double rbig, double eps,
               double tmax, std::vector<double> grid, bool has_d) {
  const long n = spec.replicates > 0 ? spec.replicates : 20000;
  const double dt = spec.dt > 0.0 ? spec.dt : 2e-3;
  std::vector<CheckResult> checks;
  ordered_json extra;

  auto need_d = [&] {
    if (!has_d) throw CLI::RequiredError("--d (required by --check " + check + ")");
    return make_dimension(spec.d);
  };

  if (check == "expmoment") {
    Rng rng(spec.seed, StreamDomain::bessel, 0, 0);
    checks.push_back(exponential_moment_check(nu, gamma, q, r, static_cast<int>(n), rng, dt));
  } else if (check == "hitprob") {
    Rng rng(spec.seed, StreamDomain::bessel, 0, 1);
    checks.push_back(hit_frequency_check(nu, r, rbig, static_cast<int>(n), rng,
                                         tmax > 0 ? tmax : 20.0, dt));
  } else if (check == "girsanov") {
    Rng rng(spec.seed, StreamDomain::bessel, 0, 2);
    checks.push_back(measure_change_check(mu, lambda, r, rbig, tmax > 0 ? tmax : 5.0,
                                          static_cast<int>(n), rng, dt));
  } else if (check == "killed") {
    const Dimension dim = need_d();
    Rng rng(spec.seed, StreamDomain::bessel, 0, 3);
    const auto ki = killed_identity_check(
        dim, r, eps, [dim](double rho) { return v_infinity(dim, rho); },
        static_cast<int>(n), rng, tmax > 0 ? tmax : 150.0, dt);
    checks.push_back(ki.check);
    extra["lhs"] = ki.lhs.mean;
    extra["lhs_stderr"] = ki.lhs.std_error;
    extra["lhs_bias_bound"] = ki.lhs_bias_bound;
    extra["rhs"] = ki.rhs.mean;
    extra["rhs_stderr"] = ki.rhs.std_error;
  } else if (check == "excess") {
    const Dimension dim = need_d();
    Rng rng(spec.seed, StreamDomain::bessel, 0, 4);
    const RadialSolution u1 = solve_u(dim, lambda, 1.0);
    checks.push_back(
        excess_ratio_check(u1, r, rbig, static_cast<int>(n), rng, tmax > 0 ? tmax : 150.0, dt));
  } else if (check == "limitk") {
    const Dimension dim = need_d();
    Rng rng(spec.seed, StreamDomain::bessel, 0, 5);
    const auto lc = limit_constant(dim, lambda, static_cast<int>(n), rng, grid, dt);
    checks.push_back(check_abs("plateau trace monotone consistent",
                               lc.monotone_consistent ? 1.0 : 0.0, 1.0, 0.0));
    extra["value"] = lc.value.mean;
    extra["value_stderr"] = lc.value.std_error;
    extra["r_grid"] = lc.r_grid;
    ordered_json trace = ordered_json::array();
    for (const auto& t : lc.trace) trace.push_back({{"f", t.mean}, {"stderr", t.std_error}});
    extra["trace"] = trace;
    if (!spec.out.empty()) {
      std::vector<std::vector<double>> rows;
      for (std::size_t i = 0; i < lc.trace.size(); ++i)
        rows.push_back({lc.r_grid[i], lc.trace[i].mean, lc.trace[i].std_error});
      save_csv(spec.out, {"r", "f", "f_se"}, rows);
    }
  } else {
    throw CLI::ValidationError(
        "--check", "unknown token '" + check +
                       "' (expected expmoment, hitprob, girsanov, killed, excess, limitk)");
  }

  ordered_json j;
  j["check"] = check;
  j["checks"] = ordered_json::array();
  for (const auto& c : checks) j["checks"].push_back(check_to_json(c));
  for (auto& [k, v] : extra.items()) j[k] = v;
  emit(j);
  return exit_code(checks);
}

// ---- sim ------------------------------------------------------------------

int run_sim(const RunSpec& spec, const std::string& mode, double pop, double x,
            std::vector<double> radii, double t_cap, double bandwidth) {
  const Dimension dim = make_dimension(spec.d);
  if (radii.empty()) throw CLI::ValidationError("sim", "--radii must not be empty");
  std::sort(radii.begin(), radii.end(), std::greater<>());
  for (std::size_t i = 1; i < radii.size(); ++i)
    if (radii[i] == radii[i - 1])
      throw CLI::ValidationError("sim", "--radii must be distinct");
  if (radii.front() >= x)
    throw CLI::ValidationError(
        "sim", "eps < |x| required (largest radius " + std::to_string(radii.front()) +
                   " >= source distance " + std::to_string(x) + ")");

  const long reps = spec.replicates > 0 ? spec.replicates : 100;
  const double eps_min = radii.back();
  ClusterParams par;
  par.d = spec.d;
  par.N = pop;
  par.t_cap = t_cap;
  par.dt_min = spec.dt > 0.0 ? spec.dt : std::max(1e-5 * eps_min * eps_min, 1e-9);
  const bool probes = bandwidth > 0.0;
  SphereFamily sph{{0.0, 0.0, 0.0}, radii};
  LocalTimeSpec lt;
  if (probes) lt = LocalTimeSpec{{sph.center}, bandwidth};
  const Point start{x, 0.0, 0.0};
  const InitialMeasure init = point_mass(start);

  const std::size_t K = radii.size();
  const std::size_t W = 1 + 3 * K + 5;
  std::vector<double> rows(static_cast<std::size_t>(reps) * W);
  verify_detail::replicate_loop(reps, spec.threads, [&](long k) {
    Rng rng(spec.seed, StreamDomain::particle, static_cast<std::uint64_t>(k), 0);
    const SimulationOutput out = mode == "superposition"
                                     ? simulate_superposition(par, init, sph, lt, rng)
                                     : simulate_cluster(par, start, sph, lt, rng);
    double* row = rows.data() + static_cast<std::size_t>(k) * W;
    row[0] = static_cast<double>(k);
    for (std::size_t i = 0; i < K; ++i) {
      row[1 + 3 * i] = out.exit_mass[i];
      row[2 + 3 * i] = out.completed_exit_mass[i];
      row[3 + 3 * i] = out.range_hit[i] ? 1.0 : 0.0;
    }
    row[1 + 3 * K] = probes ? out.local_time[0] : 0.0;
    row[2 + 3 * K] = probes && !out.completed_local_time.empty() ? out.completed_local_time[0] : 0.0;
    row[3 + 3 * K] = out.remnant_mass;
    row[4 + 3 * K] = static_cast<double>(out.steps);
    row[5 + 3 * K] = out.capped ? 1.0 : 0.0;
  });

  if (!spec.out.empty()) {
    std::vector<std::string> cols{"replicate"};
    for (std::size_t i = 0; i < K; ++i) {
      const std::string s = std::to_string(i);
      cols.push_back("exit_mass_" + s);
      cols.push_back("completed_exit_mass_" + s);
      cols.push_back("range_hit_" + s);
    }
    cols.insert(cols.end(), {"local_time", "completed_local_time", "remnant_mass", "steps",
                             "capped"});
    std::vector<std::vector<double>> out_rows;
    out_rows.reserve(static_cast<std::size_t>(reps));
    for (long k = 0; k < reps; ++k)
      out_rows.emplace_back(rows.begin() + static_cast<std::size_t>(k) * W,
                            rows.begin() + static_cast<std::size_t>(k + 1) * W);
    save_csv(spec.out, cols, out_rows);
  }

  ordered_json j;
  j["mode"] = mode;
  j["d"] = spec.d;
  j["N"] = pop;
  j["source_distance"] = x;
  j["radii"] = radii;
  j["replicates"] = reps;
  j["t_cap"] = par.t_cap;
  ordered_json per = ordered_json::array();
  long capped = 0;
  for (std::size_t i = 0; i < K; ++i) {
    Accumulator raw, comp, hit;
    for (long k = 0; k < reps; ++k) {
      const double* row = rows.data() + static_cast<std::size_t>(k) * W;
      raw.add(row[1 + 3 * i]);
      comp.add(row[2 + 3 * i]);
      hit.add(row[3 + 3 * i]);
    }
    const auto er = raw.estimate(), ec = comp.estimate(), eh = hit.estimate();
    per.push_back({{"eps", radii[i]},
                   {"exit_mass_mean", er.mean},
                   {"exit_mass_stderr", er.std_error},
                   {"completed_mean", ec.mean},
                   {"completed_stderr", ec.std_error},
                   {"hit_fraction", eh.mean}});
  }
  Accumulator ltacc, steps;
  for (long k = 0; k < reps; ++k) {
    const double* row = rows.data() + static_cast<std::size_t>(k) * W;
    ltacc.add(row[2 + 3 * K]);
    steps.add(row[4 + 3 * K]);
    capped += row[5 + 3 * K] != 0.0 ? 1 : 0;
  }
  j["spheres"] = per;
  if (probes) {
    const auto el = ltacc.estimate();
    j["completed_local_time_mean"] = el.mean;
    j["completed_local_time_stderr"] = el.std_error;
  }
  j["steps_mean"] = steps.estimate().mean;
  j["capped"] = capped;
  emit(j);
  (void)dim;
  return 0;
}

// ---- verify ---------------------------------------------------------------

int run_verify(const RunSpec& spec, const std::string& experiment, bool has_d) {
  VerifyOptions opt;
  opt.set_seed(spec.seed);
  opt.set_threads(spec.threads);
  if (has_d) {
    const Dimension dim = make_dimension(spec.d);
    opt.ladder.d = dim;
    opt.martingales.d = dim;
    opt.laplace.d = dim;
    opt.void_constant.d = dim;
    opt.density.d = dim;
    opt.cross_method.d = dim;
  }
  if (spec.replicates > 0) {
    opt.ladder.replicates = spec.replicates;
    opt.martingales.replicates = spec.replicates;
    opt.martingales.level_replicates = spec.replicates;
    opt.laplace.replicates = spec.replicates;
    opt.void_constant.replicates = spec.replicates;
    opt.density.replicates = spec.replicates;
    opt.cross_method.replicates = spec.replicates;
    opt.cross_method.laplace_replicates = spec.replicates;
  }

  const auto reports = run_experiments(experiment, opt);
  const ordered_json j = reports_to_json(reports, spec.seed);
  emit(j);
  if (!spec.out.empty()) {
    std::ofstream os(spec.out);
    if (!os) throw std::runtime_error("cannot open '" + spec.out + "' for writing");
    os << j.dump(2) << '\n';
    const std::string base = stem_of(spec.out);
    for (const auto& rep : reports)
      for (const auto& tab : rep.tables)
        save_csv(base + "." + rep.experiment + "." + tab.name + ".csv", tab);
  }
  bool ok = true;
  for (const auto& rep : reports) ok = ok && rep.passed();
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Desk-scale laboratory for exit measures, local times, and boundary "
               "functionals of critical branching Brownian clouds"};
  app.require_subcommand(1);
  app.set_config("--config", "", "read options from a key=value file with [subcommand] sections");
  app.allow_config_extras(false);

  RunSpec ode_spec, bessel_spec, sim_spec, verify_spec;

  // ode
  auto* ode = app.add_subcommand("ode", "solve the radial boundary-value problem");
  add_common(ode, ode_spec, true);
  double ode_lambda = 2.0, ode_eps = 1.0, ode_at = 1.0, ode_rmax = 50.0;
  int ode_points = 200;
  bool ode_inf = false;
  ode->add_option("--lambda", ode_lambda, "boundary weight (datum lambda/eps^2)");
  ode->add_option("--eps", ode_eps, "sphere radius")->check(CLI::PositiveNumber);
  ode->add_option("--at", ode_at, "radius at which the summary reports the solution");
  ode->add_option("--rmax", ode_rmax, "largest radius in the CSV profile dump");
  ode->add_option("--points", ode_points, "rows in the CSV profile dump")
      ->check(CLI::Range(2, 1000000));
  ode->add_flag("--infinite-datum", ode_inf, "use the infinite boundary datum");

  // bessel
  auto* bes = app.add_subcommand("bessel", "conditioned-path and killed-path identities");
  add_common(bes, bessel_spec, false);
  std::string bes_check = "expmoment";
  double bes_nu = 2.0615528128088303, bes_gamma = 2.0, bes_q = 2.0, bes_mu = 0.5;
  double bes_lambda = 2.0, bes_r = 2.0, bes_rbig = 1.0, bes_eps = 0.5, bes_tmax = 0.0;
  std::vector<double> bes_grid{4.0, 8.0, 16.0, 32.0};
  bes->add_option("--check", bes_check,
                  "expmoment | hitprob | girsanov | killed | excess | limitk");
  bes->add_option("--nu", bes_nu, "Bessel index");
  bes->add_option("--gamma", bes_gamma, "potential strength");
  bes->add_option("--q", bes_q, "potential decay exponent (gamma/rho^q)");
  bes->add_option("--mu", bes_mu, "base index for the measure change");
  bes->add_option("--lambda", bes_lambda, "boundary weight / measure-change rate");
  bes->add_option("--x", bes_r, "start radius");
  bes->add_option("--rbig", bes_rbig, "target / absorbing radius");
  bes->add_option("--eps", bes_eps, "killing radius");
  bes->add_option("--tmax", bes_tmax, "time horizon (0 = per-check default)");
  bes->add_option("--grid", bes_grid, "radius grid for the plateau trace");

  // sim
  auto* sim = app.add_subcommand("sim", "run particle clouds against a sphere family");
  add_common(sim, sim_spec, true);
  std::string sim_mode = "cluster";
  double sim_pop = 1e4, sim_x = 1.0, sim_tcap = 1.0, sim_bw = 0.0;
  std::vector<double> sim_radii{0.3, 0.2, 0.1};
  sim->add_option("--mode", sim_mode, "cluster | superposition")
      ->check(CLI::IsMember({"cluster", "superposition"}));
  sim->add_option("--N", sim_pop, "particles per unit mass")->check(CLI::PositiveNumber);
  sim->add_option("--x", sim_x, "source distance from the sphere center")
      ->check(CLI::PositiveNumber);
  sim->add_option("--radii", sim_radii, "sphere radii (any order, must be distinct)");
  sim->add_option("--tcap", sim_tcap, "time horizon")->check(CLI::PositiveNumber);
  sim->add_option("--bandwidth", sim_bw, "local-time probe bandwidth at the center (0 = off)");

  // verify
  auto* ver = app.add_subcommand("verify", "run experiment suites and report checks");
  add_common(ver, verify_spec, false);
  std::string ver_exp = "all";
  ver->add_option("--experiment", ver_exp,
                  "all | ladder | martingales | laplace | void | density | crossmethod");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);  // --help and friends
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.get_name() << ": " << e.what() << '\n';
    return 2;
  }

  try {
    if (ode->parsed())
      return run_ode(ode_spec, ode_lambda, ode_eps, ode_at, ode_inf, ode_rmax, ode_points);
    if (bes->parsed())
      return run_bessel(bessel_spec, bes_check, bes_nu, bes_gamma, bes_q, bes_mu, bes_lambda,
                        bes_r, bes_rbig, bes_eps, bes_tmax, bes_grid,
                        bes->count("--d") > 0);
    if (sim->parsed())
      return run_sim(sim_spec, sim_mode, sim_pop, sim_x, sim_radii, sim_tcap, sim_bw);
    if (ver->parsed()) return run_verify(verify_spec, ver_exp, ver->count("--d") > 0);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 2;
}
