#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

namespace mmseq {

// Composite Simpson rule on a fixed uniform grid of `nodes` points (odd).
class SimpsonGrid {
 public:
  SimpsonGrid(double lo, double hi, std::size_t nodes);

  double lo() const noexcept { return lo_; }
  double hi() const noexcept { return hi_; }
  double step() const noexcept { return step_; }
  std::size_t size() const noexcept { return nodes_.size(); }

  std::span<const double> nodes() const noexcept { return nodes_; }
  std::span<const double> weights() const noexcept { return weights_; }
  std::span<const double> log_weights() const noexcept { return log_weights_; }

  template <class F>
  double integrate(F&& f) const {
    double acc = 0.0;
    for (std::size_t i = 0; i < nodes_.size(); ++i) acc += weights_[i] * f(nodes_[i]);
    return acc;
  }

 private:
  double lo_;
  double hi_;
  double step_;
  std::vector<double> nodes_;
  std::vector<double> weights_;
  std::vector<double> log_weights_;
};

// Composite Simpson on [lo, hi] with `intervals` (even, >= 2) subintervals.
template <class F>
double simpson(F&& f, double lo, double hi, std::size_t intervals) {
  if (intervals < 2) intervals = 2;
  if (intervals % 2 != 0) ++intervals;
  const double h = (hi - lo) / static_cast<double>(intervals);
  double acc = f(lo) + f(hi);
  for (std::size_t i = 1; i < intervals; ++i) {
    const double x = lo + h * static_cast<double>(i);
    acc += (i % 2 == 1 ? 4.0 : 2.0) * f(x);
  }
  return acc * h / 3.0;
}

// log(sum(exp(v))) with max-shift; -inf for an empty or all -inf input.
double log_sum_exp(std::span<const double> values) noexcept;

}  // namespace mmseq
