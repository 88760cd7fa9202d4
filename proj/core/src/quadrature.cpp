#include "mmseq/quadrature.hpp"

#include <algorithm>
#include <limits>
#include <string>

#include "mmseq/errors.hpp"

namespace mmseq {

SimpsonGrid::SimpsonGrid(double lo, double hi, std::size_t nodes)
    : lo_(lo), hi_(hi) {
  if (!(hi > lo) || nodes < 3 || nodes % 2 == 0) {
    throw InvalidInputError("Simpson grid needs hi > lo and an odd node count >= 3, got " +
                            std::to_string(nodes));
  }
  const std::size_t intervals = nodes - 1;
  step_ = (hi - lo) / static_cast<double>(intervals);
  nodes_.resize(nodes);
  weights_.resize(nodes);
  log_weights_.resize(nodes);
  for (std::size_t i = 0; i < nodes; ++i) {
    nodes_[i] = (i == intervals) ? hi : lo + step_ * static_cast<double>(i);
    double w = 2.0;
    if (i == 0 || i == intervals) {
      w = 1.0;
    } else if (i % 2 == 1) {
      w = 4.0;
    }
    weights_[i] = w * step_ / 3.0;
    log_weights_[i] = std::log(weights_[i]);
  }
}

double log_sum_exp(std::span<const double> values) noexcept {
  double m = -std::numeric_limits<double>::infinity();
  for (double v : values) m = std::max(m, v);
  if (!std::isfinite(m)) return m;
  double acc = 0.0;
  for (double v : values) acc += std::exp(v - m);
  return m + std::log(acc);
}

}  // namespace mmseq
