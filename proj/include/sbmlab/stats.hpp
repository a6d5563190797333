#pragma once
// Small fixed-order accumulators for Monte Carlo reductions.

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace sbmlab {

struct MCEstimate {
  double mean = 0.0;
  double std_error = 0.0;
  std::uint64_t n = 0;

  double rel_error() const { return mean != 0.0 ? std_error / std::fabs(mean) : 0.0; }
};

class Accumulator {
 public:
  void add(double x, double weight = 1.0) {
    sum_ += static_cast<long double>(weight) * x;
    sumsq_ += static_cast<long double>(weight) * x * x;
    wsum_ += weight;
    ++n_;
  }

  // Sample mean with its standard error.  Weighted entries are treated as a
  // plain weighted mean over n equally-likely draws (weights sum to ~n).
  MCEstimate estimate() const {
    MCEstimate e;
    e.n = n_;
    if (n_ == 0) return e;
    const long double m = sum_ / wsum_;
    e.mean = static_cast<double>(m);
    if (n_ > 1) {
      long double var = sumsq_ / wsum_ - m * m;
      if (var < 0) var = 0;
      e.std_error = static_cast<double>(std::sqrt(var / static_cast<long double>(n_)));
    }
    return e;
  }

  std::uint64_t count() const { return n_; }

 private:
  long double sum_ = 0.0L;
  long double sumsq_ = 0.0L;
  long double wsum_ = 0.0L;
  std::uint64_t n_ = 0;
};

// Deterministic reduction over a per-replicate buffer (fill in any order,
// reduce in index order).
inline MCEstimate reduce(const std::vector<double>& samples) {
  Accumulator acc;
  for (double x : samples) acc.add(x);
  return acc.estimate();
}

inline double combined_std_error(const MCEstimate& a, const MCEstimate& b) {
  return std::sqrt(a.std_error * a.std_error + b.std_error * b.std_error);
}

}  // namespace sbmlab
