#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

namespace ridgeci {

/// Neumaier compensated accumulator.
class CompensatedSum {
 public:
  void add(double x) {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x))
      comp_ += (sum_ - t) + x;
    else
      comp_ += (x - t) + sum_;
    sum_ = t;
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

/// Fixed-length vector of compensated accumulators.
class CompensatedVector {
 public:
  explicit CompensatedVector(std::size_t size) : sums_(size) {}
  void add(std::size_t i, double x) { sums_[i].add(x); }
  double value(std::size_t i) const { return sums_[i].value(); }
  std::size_t size() const { return sums_.size(); }

 private:
  std::vector<CompensatedSum> sums_;
};

}  // namespace ridgeci
