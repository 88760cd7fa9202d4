#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <limits>
#include <string>
#include <string_view>
#include <vector>

#include "mmseq/bounds.hpp"
#include "mmseq/model.hpp"
#include "mmseq/stats.hpp"

namespace mmseq {

enum class Regime { kQuantizationLimited, kEstimationLimited };

std::string_view to_string(Regime regime) noexcept;

// Quantization-limited iff n > k^2; the tie n = k^2 is estimation-limited.
Regime regime_classify(std::size_t n_obs, std::size_t k);

// One (n, k) cell of a sweep. The CSV columns are fixed; the remaining fields
// appear in the JSON form only.
struct SweepRow {
  std::string model;
  std::size_t n = 0;
  std::size_t k = 0;
  std::size_t N = 0;
  std::uint64_t seed = 0;
  Estimate mmse;
  Estimate mmse_k;
  Estimate regret;
  // Scalar sweeps: distortion_of_Y of the codebook. Vector sweeps: the
  // moment-form bound with its fitted constant.
  double dist_y = 0.0;
  // Scalar sweeps: corollary bound. Vector sweeps: subgaussian-form bound.
  double bound = 0.0;
  std::string regime;  // to_string(Regime), or "error"
  double wall_ms = 0.0;

  std::string error;            // empty unless the cell failed
  double bound_constant = 0.0;  // fitted or configured constant behind `bound`
  Estimate residual;            // mmse_k - mmse - regret with combined SE
  double delta = 0.0;           // scalar: largest codebook gap
  double radius = 0.0;          // vector: covering radius r
  double eps = 0.0;             // vector: achieved covering eps
  std::size_t cells = 0;        // number of quantizer cells incl. overflow
  double moment_constant = 0.0; // vector: constant behind dist_y
  // Scalar: regret - dist_y estimated per draw against e_C(Y); the quantity
  // the corollary bound covers. NaN for vector sweeps.
  Estimate gap{std::numeric_limits<double>::quiet_NaN(),
               std::numeric_limits<double>::quiet_NaN()};
};

struct SweepOptions {
  std::size_t chunks = 16;
  // Cells run concurrently on this many workers; estimators inside a cell are
  // sequential. Results do not depend on it.
  std::size_t threads = 1;
  BoundConfig config;
  // Fit the bound constant on the first cell and freeze it for the rest;
  // otherwise use the configured constant.
  bool calibrate = true;
  // Sample count for moment_report when the model lacks closed-form moments.
  std::size_t moment_samples = 100000;
};

// For each (n, k) in n-major order: Panter-Dite codebook on f_Y, regret via
// eta-space quantization, distortion_of_Y and the corollary bound.
std::vector<SweepRow> sweep_scalar(const ScalarChannelModel& model,
                                   const std::vector<std::size_t>& k_list,
                                   const std::vector<std::size_t>& n_list, std::size_t N,
                                   std::uint64_t master_seed, const SweepOptions& opts = {});

struct RPolicy {
  enum class Kind { kOptimized, kFixed, kMoment };
  Kind kind = Kind::kOptimized;
  double fixed_value = 0.0;

  // "optimized", "moment" or "fixed:<value>".
  static RPolicy parse(std::string_view text);
  std::string str() const;
};

// For each k: r per policy, covering_codebook(p, r, k) on eta-space, regret
// with overflow-cell centroids, and both high-resolution bounds.
std::vector<SweepRow> sweep_vector(const LinearGaussianModel& model,
                                   const std::vector<std::size_t>& k_list, std::size_t N,
                                   std::uint64_t master_seed, RPolicy r_policy = {},
                                   const SweepOptions& opts = {});

struct SlopeFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
};

// Least squares on (log x, log y). Needs two distinct x and positive values.
SlopeFit fit_loglog_slope(const std::vector<std::pair<double, double>>& pairs);

inline constexpr std::string_view kSweepCsvHeader =
    "model,n,k,N,seed,mmse,mmse_se,mmse_k,mmse_k_se,regret,regret_se,dist_y,bound,regime,wall_ms";

void write_csv(std::ostream& os, const std::vector<SweepRow>& rows);
void write_json(std::ostream& os, const std::vector<SweepRow>& rows);
void emit_csv(const std::vector<SweepRow>& rows, const std::filesystem::path& path);
void emit_json(const std::vector<SweepRow>& rows, const std::filesystem::path& path);

// Reads the CSV columns back; JSON-only fields are left at their defaults.
std::vector<SweepRow> read_csv(std::istream& is);
std::vector<SweepRow> load_csv(const std::filesystem::path& path);

}  // namespace mmseq
