#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <string>

#include "mmseq/model.hpp"
#include "mmseq/quantizer.hpp"
#include "mmseq/stats.hpp"

namespace mmseq {

// Cell assignment of an observation. The regression value eta(x) is passed
// alongside x so that eta-space quantizers need not recompute it; X-space
// quantizers simply ignore it.
using CellIndexFn = std::function<std::size_t(const Vector& x, const Vector& eta)>;

// x -> quantize_nn(codebook, eta(x)).
CellIndexFn eta_cell_fn(const Codebook& codebook);
// x -> covering_quantize(cq, eta(x)); the overflow cell is index cq.overflow_index().
CellIndexFn covering_cell_fn(const CoveringQuantizer& cq);

// Per-cell representatives (p x m) used as the fitted mean of Y and of eta for
// cells that receive no draws in the fitting pass. A NaN column, or no fill at
// all, falls back to the overall sample mean. Fine codebooks have many such
// tail cells at moderate N, so the codepoint is a far better stand-in.
Matrix eta_cell_fill(const Codebook& codebook);
// Centers for the covered cells; the overflow column is NaN.
Matrix covering_cell_fill(const CoveringQuantizer& cq);

// Sample budget and seeding of a Monte Carlo estimate. Draws are split into
// `chunks` independently seeded streams; results depend only on (seed,
// chunks), never on `threads`.
struct McOptions {
  std::size_t N = 100000;
  std::uint64_t seed = 0;
  std::size_t chunks = 16;
  std::size_t threads = 1;
};

// Mean of ||Y - eta(X)||^2 over N joint draws.
Estimate estimate_mmse(const VectorJointModel& model, const McOptions& opts);

// Two-pass estimate of E||Y - c_Y(q(X))||^2: pass 1 fits per-cell means of Y,
// an independent pass 2 evaluates the squared error against them.
Estimate estimate_mmse_k(const VectorJointModel& model, const CellIndexFn& cell, std::size_t m,
                         const McOptions& opts, const Matrix* empty_fill = nullptr);

// Same as estimate_mmse_k with eta(X) in place of Y in both passes:
// E||eta(X) - E[eta(X) | q(X)]||^2.
Estimate estimate_regret_direct(const VectorJointModel& model, const CellIndexFn& cell,
                                std::size_t m, const McOptions& opts,
                                const Matrix* empty_fill = nullptr);

// estimate_regret_direct with the cell function x -> quantize_nn(codebook, eta(x))
// and eta_cell_fill(codebook) for empty cells.
Estimate regret_via_eta_quantization(const VectorJointModel& model, const Codebook& codebook,
                                     const McOptions& opts);

// E[e_C(Y)] under f_Y by cell-split composite Simpson.
double distortion_of_Y(const Codebook& codebook, const PriorDensity& prior);
double distortion_of_Y(const Codebook& codebook, const Density1D& density);

struct RegretEstimate {
  Estimate mmse;
  Estimate mmse_k;
  Estimate regret_direct;
  double regret_decomp = 0.0;  // mmse_k - mmse
  // Per-draw paired residual (Y-c_Y)^2 - (Y-eta)^2 - (eta-c_eta)^2.
  Estimate paired_residual;
  // Per-draw ||eta-c_eta||^2 - y_error(Y) when a y_error function was given,
  // an estimate of regret - E[y_error(Y)] far tighter than the difference of
  // two separate estimates. NaN otherwise.
  Estimate regret_minus_y_error{std::numeric_limits<double>::quiet_NaN(),
                                std::numeric_limits<double>::quiet_NaN()};
  std::size_t n_obs = 0;
  std::size_t k = 0;
  std::size_t N = 0;
  std::uint64_t seed = 0;
  std::size_t empty_cells = 0;
  std::size_t occupied_cells = 0;

  // mmse_k - mmse - regret_direct.
  double residual() const noexcept { return mmse_k.value - mmse.value - regret_direct.value; }
  // Root-sum-square of the three standard errors.
  double combined_se() const noexcept {
    return ::mmseq::combined_se(mmse.se, mmse_k.se, regret_direct.se);
  }
};

// All three quantities on one shared two-pass structure: pass 1 fits the per-
// cell means of Y and of eta, pass 2 (independent draws) evaluates
// ||Y-eta||^2, ||Y-c_Y||^2 and ||eta-c_eta||^2 on the same samples.
// Reference error of Y paired against the regret, e.g. y -> e_C(y).
using YErrorFn = std::function<double(const Vector& y)>;

RegretEstimate estimate_decomposition(const VectorJointModel& model, const CellIndexFn& cell,
                                      std::size_t m, const McOptions& opts,
                                      const Matrix* empty_fill = nullptr,
                                      const YErrorFn& y_error = {});

struct DecompositionResidual {
  double residual = 0.0;
  double combined_se = 0.0;
};

DecompositionResidual decomposition_residual(const VectorJointModel& model,
                                             const CellIndexFn& cell, std::size_t m,
                                             const McOptions& opts,
                                             const Matrix* empty_fill = nullptr);

// Flat JSON object: mmse, mmse_se, mmse_k, mmse_k_se, regret_direct,
// regret_direct_se, regret_decomp, n_obs, k, N, seed.
std::string to_json(const RegretEstimate& est);
RegretEstimate regret_estimate_from_json(const std::string& text);

}  // namespace mmseq
