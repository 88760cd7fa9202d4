#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>

namespace mmseq {

// A Monte Carlo point estimate and its standard error.
struct Estimate {
  double value = 0.0;
  double se = 0.0;
};

// Welford accumulator with Chan's pairwise merge. Merging partials in a fixed
// order gives bit-identical results independent of how they were computed.
class RunningMoments {
 public:
  void add(double x) noexcept {
    ++count_;
    const double delta = x - mean_;
    mean_ += delta / static_cast<double>(count_);
    m2_ += delta * (x - mean_);
  }

  void merge(const RunningMoments& other) noexcept {
    if (other.count_ == 0) return;
    if (count_ == 0) {
      *this = other;
      return;
    }
    const double n_a = static_cast<double>(count_);
    const double n_b = static_cast<double>(other.count_);
    const double n = n_a + n_b;
    const double delta = other.mean_ - mean_;
    mean_ += delta * n_b / n;
    m2_ += other.m2_ + delta * delta * n_a * n_b / n;
    count_ += other.count_;
  }

  std::uint64_t count() const noexcept { return count_; }
  double mean() const noexcept { return mean_; }
  double variance() const noexcept {
    return count_ > 1 ? m2_ / static_cast<double>(count_ - 1) : 0.0;
  }
  double standard_error() const noexcept {
    return count_ > 1 ? std::sqrt(variance() / static_cast<double>(count_)) : 0.0;
  }
  Estimate estimate() const noexcept { return {mean(), standard_error()}; }

 private:
  std::uint64_t count_ = 0;
  double mean_ = 0.0;
  double m2_ = 0.0;
};

// Standard error of a sum/difference of independent estimates.
inline double combined_se(double a, double b) noexcept { return std::hypot(a, b); }
inline double combined_se(double a, double b, double c) noexcept {
  return std::sqrt(a * a + b * b + c * c);
}

}  // namespace mmseq
