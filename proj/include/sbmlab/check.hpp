#pragma once
// Uniform pass/fail records for deterministic and statistical checks.
// Every tolerance is pinned at the call site and carried in the record, so a
// report is self-describing.

#include <cmath>
#include <ostream>
#include <string>
#include <vector>

namespace sbmlab {

struct CheckResult {
  std::string name;
  double observed = 0.0;
  double expected = 0.0;
  double std_error = 0.0;  // 0 for deterministic checks
  double tolerance = 0.0;  // the numeric slack actually applied
  std::string rule;        // human-readable pass criterion
  bool pass = false;
};

inline CheckResult check_abs(std::string name, double observed, double expected, double tol) {
  CheckResult c{std::move(name), observed, expected, 0.0, tol,
                "|observed - expected| <= " + std::to_string(tol), false};
  c.pass = std::isfinite(observed) && std::fabs(observed - expected) <= tol;
  return c;
}

inline CheckResult check_rel(std::string name, double observed, double expected, double rtol) {
  CheckResult c{std::move(name), observed, expected, 0.0, rtol,
                "|observed/expected - 1| <= " + std::to_string(rtol), false};
  c.pass = std::isfinite(observed) &&
           std::fabs(observed - expected) <= rtol * std::fabs(expected);
  return c;
}

// Statistical check: |observed - expected| <= k_sigma * std_error.
inline CheckResult check_sigma(std::string name, double observed, double expected,
                               double std_error, double k_sigma) {
  CheckResult c{std::move(name), observed, expected, std_error, k_sigma * std_error,
                "|observed - expected| <= " + std::to_string(k_sigma) + " * std_error", false};
  c.pass = std::isfinite(observed) && std::fabs(observed - expected) <= k_sigma * std_error;
  return c;
}

// One-sided bound: observed <= bound + slack.
inline CheckResult check_upper(std::string name, double observed, double bound, double slack) {
  CheckResult c{std::move(name), observed, bound, 0.0, slack,
                "observed <= bound + " + std::to_string(slack), false};
  c.pass = std::isfinite(observed) && observed <= bound + slack;
  return c;
}

inline bool all_pass(const std::vector<CheckResult>& checks) {
  for (const auto& c : checks)
    if (!c.pass) return false;
  return !checks.empty();
}

inline std::ostream& operator<<(std::ostream& os, const CheckResult& c) {
  return os << (c.pass ? "[PASS] " : "[FAIL] ") << c.name << ": observed=" << c.observed
            << " expected=" << c.expected
            << (c.std_error > 0 ? " std_error=" + std::to_string(c.std_error) : "")
            << " (" << c.rule << ")";
}

}  // namespace sbmlab
