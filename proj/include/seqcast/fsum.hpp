#pragma once

#include <cmath>
#include <cstddef>

namespace seqcast {

// Exact floating-point accumulator (Shewchuk's expansion summation, the
// algorithm behind Python's math.fsum). The running sum is kept as a list of
// non-overlapping partials whose exact sum equals the exact sum of all inputs,
// so the final rounded result does not depend on the order in which terms were
// added. Attention reductions over the token axis use this to make masked
// attention exactly permutation-equivariant.
class ExactSum {
public:
  void add(double x) {
    std::size_t i = 0;
    for (std::size_t j = 0; j < count_; ++j) {
      double y = partials_[j];
      if (std::fabs(x) < std::fabs(y)) {
        double t = x;
        x = y;
        y = t;
      }
      double hi = x + y;
      double lo = y - (hi - x);
      if (lo != 0.0) partials_[i++] = lo;
      x = hi;
    }
    partials_[i++] = x;
    count_ = i;
  }

  // Correctly rounded value of the exact sum (the final-rounding step of
  // math.fsum, including the half-even correction across partials).
  double result() const {
    double hi = 0.0;
    std::size_t n = count_;
    if (n > 0) {
      hi = partials_[--n];
      double lo = 0.0;
      while (n > 0) {
        double x = hi;
        double y = partials_[--n];
        hi = x + y;
        double yr = hi - x;
        lo = y - yr;
        if (lo != 0.0) break;
      }
      if (n > 0 && ((lo < 0.0 && partials_[n - 1] < 0.0) ||
                    (lo > 0.0 && partials_[n - 1] > 0.0))) {
        double y = lo * 2.0;
        double x = hi + y;
        double yr = x - hi;
        if (y == yr) hi = x;
      }
    }
    return hi;
  }

  void reset() { count_ = 0; }

private:
  // Doubles span a finite exponent range, so the number of non-overlapping
  // partials is bounded; 40 slots is far more than attention sums ever need.
  double partials_[40];
  std::size_t count_ = 0;
};

} // namespace seqcast
