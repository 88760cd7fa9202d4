#pragma once

// Reference computations that share no code with the library: closed forms
// and brute-force quadrature used to check it.

#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <numbers>
#include <vector>

namespace oracle {

inline double normal_pdf(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi); }
inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

// exp(x^2) erfc(x) for x >= 0; asymptotic series once erfc nears underflow.
inline double erfcx(double x) {
  if (x < 25.0) return std::exp(x * x) * std::erfc(x);
  const double t = 1.0 / (2.0 * x * x);
  return (1.0 - t + 3.0 * t * t - 15.0 * t * t * t + 105.0 * t * t * t * t) /
         (x * std::sqrt(std::numbers::pi));
}

// E[Y | xbar] for Y ~ U[-a, a] and xbar | Y ~ N(Y, s^2): mean of N(xbar, s^2)
// truncated to [-a, a]. Tail masses are scaled by exp(-lo^2/2) so that the
// ratio stays accurate when xbar lies far outside the support.
inline double truncated_normal_mean(double xbar, double s, double a) {
  if (xbar > 0.0) return -truncated_normal_mean(-xbar, s, a);
  const double lo = (-a - xbar) / s;
  const double hi = (a - xbar) / s;
  const double r2 = std::numbers::sqrt2;
  if (lo <= 0.0) {
    const double mass = normal_cdf(hi) - normal_cdf(lo);
    return xbar + s * (normal_pdf(lo) - normal_pdf(hi)) / mass;
  }
  const double shrink = std::exp(0.5 * (lo * lo - hi * hi));
  const double mass = 0.5 * (erfcx(lo / r2) - shrink * erfcx(hi / r2));
  const double dens = (1.0 - shrink) / std::sqrt(2.0 * std::numbers::pi);
  return xbar + s * dens / mass;
}

// Trapezoid posterior mean on a dense grid for a generic log-likelihood.
inline double dense_posterior_mean(const std::function<double(double)>& log_prior,
                                   const std::function<double(double)>& log_lik, double a,
                                   std::size_t points = 100001) {
  std::vector<double> lv(points);
  double peak = -std::numeric_limits<double>::infinity();
  const double h = 2.0 * a / static_cast<double>(points - 1);
  for (std::size_t i = 0; i < points; ++i) {
    const double y = -a + h * static_cast<double>(i);
    lv[i] = log_prior(y) + log_lik(y);
    peak = std::max(peak, lv[i]);
  }
  double num = 0.0;
  double den = 0.0;
  for (std::size_t i = 0; i < points; ++i) {
    const double y = -a + h * static_cast<double>(i);
    const double w = (i == 0 || i + 1 == points ? 0.5 : 1.0) * std::exp(lv[i] - peak);
    num += w * y;
    den += w;
  }
  return num / den;
}

// mmse of Y ~ U[-a, a] from n Gaussian observations with noise sigma, by a
// product midpoint rule over (y, xbar).
inline double uniform_gaussian_mmse(double a, double sigma, std::size_t n, std::size_t ny = 2000,
                                    std::size_t nx = 2000) {
  const double s = sigma / std::sqrt(static_cast<double>(n));
  double total = 0.0;
  const double hy = 2.0 * a / static_cast<double>(ny);
  for (std::size_t i = 0; i < ny; ++i) {
    const double y = -a + hy * (static_cast<double>(i) + 0.5);
    const double hx = 24.0 * s / static_cast<double>(nx);
    double inner = 0.0;
    for (std::size_t j = 0; j < nx; ++j) {
      const double xb = y - 12.0 * s + hx * (static_cast<double>(j) + 0.5);
      const double e = y - truncated_normal_mean(xb, s, a);
      inner += e * e * normal_pdf((xb - y) / s) / s;
    }
    total += inner * hx / (2.0 * a);
  }
  return total * hy;
}

// Logistic location density exp(-z) / (s (1 + exp(-z))^2), z = (u - y) / s.
inline double logistic_log_density(double u, double y, double s) {
  const double z = (u - y) / s;
  return -z - 2.0 * std::log1p(std::exp(-z)) - std::log(s);
}

}  // namespace oracle
