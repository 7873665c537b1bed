#pragma once

#include <cmath>
#include <algorithm>
#include <cstdint>
#include <limits>

namespace utopk {

// Neumaier-compensated running sum.
class CompensatedSum {
 public:
  CompensatedSum() = default;
  explicit CompensatedSum(double init) : sum_(init) {}

  CompensatedSum& operator+=(double x) {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x)) {
      comp_ += (sum_ - t) + x;
    } else {
      comp_ += (x - t) + sum_;
    }
    sum_ = t;
    return *this;
  }
  CompensatedSum& operator-=(double x) { return *this += -x; }

  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

// Standard normal CDF.
inline double standard_normal_cdf(double z) {
  return 0.5 * std::erfc(-z / std::sqrt(2.0));
}

// Two-sided tail mass beyond three standard deviations, 2(1 - Phi(3)).
inline double three_sigma_tail_mass() {
  return std::erfc(3.0 / std::sqrt(2.0));
}

// A product of CDF values kept as (number of exact-zero factors, number of
// factors below one, log of the product of the nonzero factors). Dividing out
// a zero factor is exact, which a plain log-space product cannot do, and a
// product whose factors are all one evaluates to exactly 1.
struct LogProduct {
  std::int64_t zeros = 0;
  std::int64_t below_one = 0;
  double log_nonzero = 0.0;

  void multiply(double factor) {
    if (factor <= 0.0) {
      ++zeros;
      ++below_one;
    } else if (factor < 1.0) {
      ++below_one;
      log_nonzero += std::log(factor);
    }
  }
  void divide(double factor) {
    if (factor <= 0.0) {
      --zeros;
      --below_one;
    } else if (factor < 1.0) {
      --below_one;
      log_nonzero -= std::log(factor);
    }
  }
  LogProduct divided_by(double factor) const {
    LogProduct out = *this;
    out.divide(factor);
    return out;
  }

  // Natural log of the product; -inf when any factor is zero.
  double log_value() const {
    if (zeros > 0) {
      return -std::numeric_limits<double>::infinity();
    }
    return below_one == 0 ? 0.0 : log_nonzero;
  }
  double value() const {
    if (zeros > 0) {
      return 0.0;
    }
    return below_one == 0 ? 1.0 : std::min(1.0, std::exp(log_nonzero));
  }
};

}  // namespace utopk
