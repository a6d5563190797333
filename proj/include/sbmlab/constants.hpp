#pragma once
// Spatial dimension handling and the critical-exponent bundle attached to the
// exterior problem for Δu = u² in d = 1, 2, 3.

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace sbmlab {

enum class Dimension : int { one = 1, two = 2, three = 3 };

inline constexpr int to_int(Dimension d) { return static_cast<int>(d); }

inline Dimension make_dimension(int d) {
  if (d < 1 || d > 3)
    throw std::invalid_argument("dimension must be 1, 2 or 3 (got " + std::to_string(d) + ")");
  return static_cast<Dimension>(d);
}

struct CriticalExponents {
  double p;         // decay rate of the renormalized blow-up perturbation
  double alpha;     // exit-mass renormalization exponent, (p-2)/(4-d)
  double mu;        // (d-2)/2
  double nu;        // sqrt(mu^2 + 2*lambda_d)
  double lambda_d;  // coefficient of the exact blow-up solution lambda_d/r^2
};

// Everything derives from mu = (d-2)/2 and the coefficient lambda_d = 2(4-d).
inline CriticalExponents exponents(Dimension dim) {
  const int d = to_int(dim);
  CriticalExponents e{};
  e.mu = (d - 2) / 2.0;
  e.lambda_d = 2.0 * (4 - d);
  e.nu = std::sqrt(e.mu * e.mu + 2.0 * e.lambda_d);
  e.p = e.mu + e.nu;
  e.alpha = (e.p - 2.0) / (4 - d);
  return e;
}

// Small-radius normalizer for point potentials: log^+(1/eps)/pi in d=2,
// 1/(2*pi*eps) in d=3.  Not defined in d=1.
inline double psi0(Dimension dim, double eps) {
  if (!(eps > 0.0)) throw std::invalid_argument("psi0: eps must be positive");
  switch (dim) {
    case Dimension::two:
      return std::max(0.0, std::log(1.0 / eps)) / std::numbers::pi;
    case Dimension::three:
      return 1.0 / (2.0 * std::numbers::pi * eps);
    default:
      throw std::invalid_argument("psi0: only defined in d = 2, 3");
  }
}

// Exact singular solution lambda_d/|x|^2 of Δu = u²; the d <= 3 point
// potential in closed form.
inline double v_infinity(Dimension dim, double r) {
  if (!(r > 0.0)) throw std::invalid_argument("v_infinity: r must be positive");
  return exponents(dim).lambda_d / (r * r);
}

}  // namespace sbmlab
