#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "mmseq/model.hpp"

namespace mmseq {

// Cell indices are 0-based throughout: a k-point codebook quantizes into
// {0, ..., k-1}, and a covering quantizer's overflow cell is index k.

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

// Reconstruction points c_0..c_{k-1} in R^p, stored row-major. One-dimensional
// codebooks built through Codebook::scalar are strictly increasing and carry
// the support they were designed on.
class Codebook {
 public:
  Codebook(std::size_t dim, std::vector<double> coords);

  static Codebook scalar(std::vector<double> points, Interval support);
  static Codebook scalar(std::vector<double> points, double half_width) {
    return scalar(std::move(points), Interval{-half_width, half_width});
  }
  // A 1-D codebook without a declared support (e.g. read back from a file).
  static Codebook scalar(std::vector<double> points);

  std::size_t dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return coords_.size() / dim_; }
  std::span<const double> point(std::size_t j) const noexcept {
    return std::span<const double>(coords_).subspan(j * dim_, dim_);
  }
  std::span<const double> coords() const noexcept { return coords_; }
  const std::optional<Interval>& support() const noexcept { return support_; }
  // Points of a 1-D codebook.
  const std::vector<double>& values() const noexcept { return coords_; }

 private:
  std::size_t dim_;
  std::vector<double> coords_;
  std::optional<Interval> support_;
  bool sorted_ = false;

  friend std::size_t quantize_nn(const Codebook&, std::span<const double>);
};

// Nearest codepoint; ties go to the lowest index.
std::size_t quantize_nn(const Codebook& codebook, std::span<const double> v);
inline std::size_t quantize_nn(const Codebook& codebook, double v) {
  return quantize_nn(codebook, std::span<const double>(&v, 1));
}

// Largest gap of the endpoint-padded sorted codebook -A = y_0 <= y_1 < ... <= y_{k+1} = A.
double delta(const Codebook& codebook, double half_width);
double delta(const Codebook& codebook, Interval support);

// min_j (y - c_j)^2.
double cell_error(const Codebook& codebook, double y);

// Evaluable (possibly unnormalized) density on a bounded interval.
struct Density1D {
  Interval support;
  std::function<double(double)> f;
};

Density1D density_of(const PriorDensity& prior);

// Integral of cell_error(C, y) f(y) dy / integral of f, by composite Simpson on
// each Voronoi interval separately.
double expected_cell_error(const Codebook& codebook, const Density1D& density);

struct LloydResult {
  Codebook codebook;
  std::vector<double> distortion_history;  // one entry per iteration
  std::size_t iterations = 0;
  std::size_t reseeds = 0;
};

// Lloyd-Max design on a 1-D density. Exits once no point moves by tol or more
// in an iteration; throws ConvergenceError (carrying the last iterate) after
// max_iter iterations.
LloydResult lloyd_max_1d(const Density1D& density, std::size_t k, double tol = 1e-10,
                         std::size_t max_iter = 100000);

// Points at the (2j-1)/(2k) quantiles of the measure proportional to f^{1/3}.
Codebook panter_dite_1d(const Density1D& density, std::size_t k);

// Documented constants of the cubic-grid covering construction: for
// k >= covering_min_k(p) the achieved covering radius satisfies
// eps <= kCoveringGridConstant * r * k^{-1/p}. Measured worst cases over
// k in [2^p, 4096]: 1.50 (p=1), 2.35 (p=2), 2.73 (p=3), 2.96 (p=4); the
// constant grows like sqrt(p) beyond that range.
inline constexpr double kCoveringGridConstant = 3.0;
constexpr std::size_t covering_min_k(std::size_t p) noexcept { return std::size_t{1} << p; }

class CoveringQuantizer {
 public:
  CoveringQuantizer(Codebook centers, double radius, double eps, double side = 0.0);

  const Codebook& centers() const noexcept { return centers_; }
  std::size_t dim() const noexcept { return centers_.dim(); }
  double radius() const noexcept { return radius_; }
  double eps() const noexcept { return eps_; }
  // Lattice side length, 0 for the single-center fallback.
  double side() const noexcept { return side_; }
  std::size_t overflow_index() const noexcept { return centers_.size(); }
  std::size_t cell_count() const noexcept { return centers_.size() + 1; }

 private:
  Codebook centers_;
  double radius_;
  double eps_;
  double side_;
};

// Covers the radius-r ball in R^p with at most k centers on a half-offset
// cubic lattice of side s (centers (i + 1/2) s whose cube meets the open
// ball); s is the smallest side found by bisection whose center count is
// <= k, and eps = s sqrt(p) / 2. If the grid cannot beat eps = r, a single
// center at the origin is returned. The result is audited on audit_points
// uniform points of the ball (plus points on its boundary sphere); an
// uncovered point raises ConstructionError.
CoveringQuantizer covering_codebook(std::size_t p, double r, std::size_t k,
                                    std::size_t audit_points = 100000,
                                    std::uint64_t audit_seed = 0x5eed);

// Number of `points` uniform audit points farther than eps from every center.
std::size_t covering_audit(const CoveringQuantizer& cq, std::size_t points, std::uint64_t seed);

// Nearest center when ||v|| <= r (boundary included), overflow_index() otherwise.
std::size_t covering_quantize(const CoveringQuantizer& cq, std::span<const double> v);

struct Sample {
  Vector x;
  Vector y;
};

struct CellCentroids {
  std::vector<Vector> points;
  std::vector<std::size_t> counts;
  std::size_t empty_cells = 0;
};

// Per-cell empirical mean of y. Empty cells get count 0 and the global mean.
CellCentroids centroids_from_samples(const std::function<std::size_t(const Vector&)>& cell_index,
                                     std::span<const Sample> samples, std::size_t m);

}  // namespace mmseq
