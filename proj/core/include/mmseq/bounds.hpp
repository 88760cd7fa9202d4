#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mmseq/model.hpp"
#include "mmseq/regret.hpp"
#include "mmseq/stats.hpp"

namespace mmseq {

// Hidden constants of the bounds. Only their existence is known, so callers
// either keep the defaults or fit each one once on a calibration cell.
struct BoundConfig {
  double L = 1.0;
  bool fit_L = false;
  double c_corollary = 1.0;
  double c_thm2_moment = 1.0;
  double c1 = 1.0;
  double c2 = 1.0;
  double L0 = 1.0;
  double C_abs = 1.0;

  // Throws InvalidInputError unless every constant is finite and positive.
  void validate() const;
};

struct BoundReport {
  std::string bound;
  std::vector<std::pair<std::string, double>> inputs;
  double value = 0.0;
  std::optional<double> r_star;
  BoundConfig config;
};

// {"bound", "value", "r_star" (when present), "config", "inputs"}.
std::string to_json(const BoundReport& report);

// L D^2 min{1, (E[I^{-1/2}] + sqrt(mmse)) / (D sqrt(n))}.
double thm1_rhs(double L, double delta, std::size_t n_obs, double e_inv_sqrt_fisher, double mmse);
// L D^2 min{1, sigma / (D sqrt(n))}.
double thm1_rhs_gaussian(double L, double delta, std::size_t n_obs, double sigma);

// c min{1/k^2, (E[I^{-1/2}] + sqrt(mmse)) / (k sqrt(n))}.
double corollary_rhs(std::size_t k, std::size_t n_obs, double e_inv_sqrt_fisher, double mmse,
                     double c);
// c min{1/k^2, sqrt(mmse) / k}.
double corollary_weakened_rhs(std::size_t k, double mmse, double c);

// mmse_hat - E[1/I(Y)] / n. DomainError for the noiseless channel.
double info_inequality_gap(const ScalarChannelModel& model, std::size_t n_obs, double mmse_hat);

// c (e2 e4)^{2/3} k^{-2/(3p)}.
double thm2_bound_moment(double e2, double e4, std::size_t k, std::size_t p, double c);

// Minimizer of r^2 k^{-2/p} + sqrt(e2 e4) / r, the Markov-tail balance behind
// the moment form: r = (sqrt(e2 e4) / 2)^{1/3} k^{2/(3p)}.
double moment_balance_radius(double e2, double e4, std::size_t k, std::size_t p);

// g(r) = c1 r^2 k^{-2/p} + c2 sqrt(e4) exp(-(r - e1)^2 / (4v)).
double thm2_objective(double r, double e1, double e4, double v, std::size_t k, std::size_t p,
                      double c1, double c2);

struct SubgaussianBound {
  double value = 0.0;
  double r_star = 0.0;
};

// Minimum of thm2_objective over r in (e1, e1 + 20 sqrt(v)]: a coarse scan
// picks the bracket, golden-section search refines it to relative tolerance
// 1e-8.
SubgaussianBound thm2_bound_subgaussian(double e1, double e4, double v, std::size_t k,
                                        std::size_t p, double c1, double c2);

// c log(k) / k^{2/p}; k >= 2.
double weakened_thm2(std::size_t k, std::size_t p, double c);

// (1 / (n I(y))) sum_i d/dy log p(x_i | y).
double score_average_Gn(const ScalarChannelModel& model, std::span<const double> x, double y);

struct BvmOptions {
  std::size_t N = 10000;
  std::uint64_t seed = 0;
  std::size_t chunks = 16;
  std::size_t threads = 1;
  std::vector<double> L0 = {1.0};
  std::vector<double> quantile_levels = {0.5, 0.9, 0.99};
};

struct BvmSummary {
  std::size_t n_obs = 0;
  std::size_t N = 0;
  std::uint64_t seed = 0;
  Estimate mean_abs_z;        // E|Z_n|
  Estimate mean_abs_error;    // E|eta(X) - Y|
  Estimate mean_sq_error;     // E|eta(X) - Y|^2
  // Quantiles of sqrt(n I(Y)) |Z_n| at BvmOptions::quantile_levels.
  std::vector<std::pair<double, double>> scaled_z_quantiles;
  // Fraction of draws with sqrt(n I(Y)) |Z_n| <= L0 (log n / n)^{1/4}, per L0.
  std::vector<std::pair<double, double>> coverage;
};

// Z_n = eta(X) - (Y + G_n(X, Y)) over N joint draws, eta from the quadrature
// oracle. Chunked and reduced in chunk order like the regret estimators.
BvmSummary bvm_diagnostics(const ScalarChannelModel& model, std::size_t n_obs,
                           const BvmOptions& opts);

std::string to_json(const BvmSummary& summary);

// One named bound with its inputs, as evaluated by the `bounds` subcommand.
// Names: thm1, thm1-gaussian, corollary, corollary-weakened, info-gap,
// thm2-moment, thm2-subgaussian, weakened-thm2.
struct BoundRequest {
  std::string name;
  BoundConfig config;
  std::map<std::string, double> inputs;
  std::optional<ScalarChannelModel> model;  // info-gap only
};

// Throws InvalidInputError for an unknown name or a missing input.
BoundReport evaluate_bound(const BoundRequest& request);

// Scale c with c * shape == observed; the constant-fitting step used for
// calibration cells. Throws InvalidInputError unless shape > 0.
double fit_scale(double observed, double shape);

}  // namespace mmseq
