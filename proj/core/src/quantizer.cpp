#include "mmseq/quantizer.hpp"

#include <algorithm>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/tools/roots.hpp>
#include <cmath>
#include <limits>
#include <numeric>
#include <spdlog/spdlog.h>
#include <string>

#include "mmseq/errors.hpp"

namespace mmseq {

namespace {

// Simpson subintervals per Voronoi cell.
constexpr std::size_t kCellIntervals = 256;

void require_sorted_within(const std::vector<double>& pts, const std::optional<Interval>& support) {
  for (std::size_t j = 0; j < pts.size(); ++j) {
    if (!std::isfinite(pts[j])) throw InvalidInputError("codebook point is not finite");
    if (j > 0 && !(pts[j] > pts[j - 1])) {
      throw InvalidInputError("1-D codebook points must be strictly increasing");
    }
    if (support && (pts[j] < support->lo || pts[j] > support->hi)) {
      throw DomainError("codebook point " + std::to_string(pts[j]) + " outside the support");
    }
  }
}

// Voronoi boundaries of a sorted 1-D codebook clipped to `support`.
std::vector<double> cell_boundaries(const std::vector<double>& pts, Interval support) {
  std::vector<double> b(pts.size() + 1);
  b.front() = support.lo;
  b.back() = support.hi;
  for (std::size_t j = 1; j < pts.size(); ++j) b[j] = 0.5 * (pts[j - 1] + pts[j]);
  return b;
}

}  // namespace

// ---------------------------------------------------------------------------
// Codebook

Codebook::Codebook(std::size_t dim, std::vector<double> coords)
    : dim_(dim), coords_(std::move(coords)) {
  if (dim_ == 0) throw InvalidInputError("codebook dimension must be >= 1");
  if (coords_.empty() || coords_.size() % dim_ != 0) {
    throw InvalidInputError("codebook needs k >= 1 points of dimension " + std::to_string(dim_));
  }
  for (double c : coords_) {
    if (!std::isfinite(c)) throw InvalidInputError("codebook point is not finite");
  }
}

Codebook Codebook::scalar(std::vector<double> points, Interval support) {
  if (!(support.hi > support.lo)) throw InvalidInputError("codebook support must have hi > lo");
  require_sorted_within(points, support);
  Codebook c(1, std::move(points));
  c.support_ = support;
  c.sorted_ = true;
  return c;
}

Codebook Codebook::scalar(std::vector<double> points) {
  require_sorted_within(points, std::nullopt);
  Codebook c(1, std::move(points));
  c.sorted_ = true;
  return c;
}

std::size_t quantize_nn(const Codebook& codebook, std::span<const double> v) {
  const std::size_t k = codebook.size();
  const std::size_t d = codebook.dim();
  if (v.size() != d) throw InvalidInputError("quantize_nn: dimension mismatch");
  if (codebook.sorted_) {
    // Sorted: compare the two neighbours of v.
    const auto& pts = codebook.values();
    const auto it = std::lower_bound(pts.begin(), pts.end(), v[0]);
    const auto j = static_cast<std::size_t>(it - pts.begin());
    if (j == 0) return 0;
    if (j == k) return k - 1;
    return (v[0] - pts[j - 1] <= pts[j] - v[0]) ? j - 1 : j;
  }
  const auto c = codebook.coords();
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < k; ++j) {
    double acc = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      const double t = v[i] - c[j * d + i];
      acc += t * t;
    }
    if (acc < best_d) {
      best_d = acc;
      best = j;
    }
  }
  return best;
}

double delta(const Codebook& codebook, double half_width) {
  return delta(codebook, Interval{-half_width, half_width});
}

double delta(const Codebook& codebook, Interval support) {
  if (codebook.dim() != 1) throw InvalidInputError("delta needs a 1-D codebook");
  std::vector<double> pts = codebook.values();
  std::sort(pts.begin(), pts.end());
  for (double y : pts) {
    if (y < support.lo || y > support.hi) {
      throw DomainError("codebook point " + std::to_string(y) + " outside [" +
                        std::to_string(support.lo) + ", " + std::to_string(support.hi) + "]");
    }
  }
  double gap = pts.front() - support.lo;
  for (std::size_t j = 1; j < pts.size(); ++j) gap = std::max(gap, pts[j] - pts[j - 1]);
  return std::max(gap, support.hi - pts.back());
}

double cell_error(const Codebook& codebook, double y) {
  double best = std::numeric_limits<double>::infinity();
  for (double c : codebook.values()) best = std::min(best, (y - c) * (y - c));
  return best;
}

Density1D density_of(const PriorDensity& prior) {
  return {Interval{-prior.half_width(), prior.half_width()},
          [prior](double y) { return prior.density(y); }};
}

double expected_cell_error(const Codebook& codebook, const Density1D& density) {
  if (codebook.dim() != 1) throw InvalidInputError("expected_cell_error needs a 1-D codebook");
  std::vector<double> pts = codebook.values();
  std::sort(pts.begin(), pts.end());
  const auto b = cell_boundaries(pts, density.support);
  double num = 0.0;
  double mass = 0.0;
  for (std::size_t j = 0; j < pts.size(); ++j) {
    const double lo = std::clamp(b[j], density.support.lo, density.support.hi);
    const double hi = std::clamp(b[j + 1], density.support.lo, density.support.hi);
    if (!(hi > lo)) continue;
    const double c = pts[j];
    num += simpson([&](double y) { return (y - c) * (y - c) * density.f(y); }, lo, hi,
                   kCellIntervals);
    mass += simpson(density.f, lo, hi, kCellIntervals);
  }
  if (!(mass > 0.0)) throw InvalidInputError("density has zero mass on its support");
  return num / mass;
}

// ---------------------------------------------------------------------------
// Lloyd-Max

namespace {

// Point x in [lo, hi] with integral of f over [lo, x] equal to target.
double cell_quantile(const Density1D& density, double lo, double hi, double target) {
  double a = lo;
  double b = hi;
  for (int i = 0; i < 60; ++i) {
    const double m = 0.5 * (a + b);
    if (simpson(density.f, lo, m, kCellIntervals) < target) {
      a = m;
    } else {
      b = m;
    }
  }
  return 0.5 * (a + b);
}

}  // namespace

LloydResult lloyd_max_1d(const Density1D& density, std::size_t k, double tol,
                         std::size_t max_iter) {
  if (k == 0) throw InvalidInputError("lloyd_max_1d needs k >= 1");
  if (!(tol > 0.0)) throw InvalidInputError("lloyd_max_1d needs tol > 0");
  const Interval s = density.support;
  if (!(s.hi > s.lo)) throw InvalidInputError("density support must have hi > lo");

  std::vector<double> pts(k);
  for (std::size_t j = 0; j < k; ++j) {
    pts[j] = s.lo + (s.hi - s.lo) * (static_cast<double>(j) + 0.5) / static_cast<double>(k);
  }

  LloydResult result{Codebook::scalar(pts, s), {}, 0, 0};
  std::vector<double> mass(k), moment(k);
  for (std::size_t it = 0; it < max_iter; ++it) {
    const auto b = cell_boundaries(pts, s);
    for (std::size_t j = 0; j < k; ++j) {
      mass[j] = simpson(density.f, b[j], b[j + 1], kCellIntervals);
      moment[j] = simpson([&](double y) { return y * density.f(y); }, b[j], b[j + 1],
                          kCellIntervals);
    }
    std::vector<double> next(k);
    bool reseeded = false;
    for (std::size_t j = 0; j < k; ++j) {
      next[j] = mass[j] > 0.0 ? std::clamp(moment[j] / mass[j], b[j], b[j + 1]) : pts[j];
    }
    std::vector<std::size_t> seeded(k, 0);
    const std::vector<double> cell_mass = mass;
    for (std::size_t j = 0; j < k; ++j) {
      if (mass[j] > 0.0) continue;
      const auto heavy = static_cast<std::size_t>(std::max_element(mass.begin(), mass.end()) - mass.begin());
      // Seeds go to mass quantiles 3/4, 1/4, 7/8, 1/8, ... of the heavy cell so
      // they land where the density is positive and differ from its centroid.
      const std::size_t t = seeded[heavy]++;
      const double tail = std::ldexp(1.0, -static_cast<int>(t / 2 + 2));
      const double q = t % 2 == 0 ? 1.0 - tail : tail;
      const double seed = cell_quantile(density, b[heavy], b[heavy + 1], q * cell_mass[heavy]);
      spdlog::warn("lloyd_max_1d: empty cell {} re-seeded at {} inside heaviest cell {}", j, seed,
                   heavy);
      next[j] = seed;
      mass[heavy] *= 0.5;
      ++result.reseeds;
      reseeded = true;
    }
    std::sort(next.begin(), next.end());
    next.erase(std::unique(next.begin(), next.end()), next.end());
    while (next.size() < k) {
      // Coincident points after a re-seed: split the widest gap.
      const auto bb = cell_boundaries(next, s);
      std::size_t w = 0;
      for (std::size_t j = 1; j + 1 < bb.size(); ++j) {
        if (bb[j + 1] - bb[j] > bb[w + 1] - bb[w]) w = j;
      }
      next.push_back(0.5 * (bb[w] + bb[w + 1]));
      std::sort(next.begin(), next.end());
      reseeded = true;
    }

    double move = 0.0;
    for (std::size_t j = 0; j < k; ++j) move = std::max(move, std::abs(next[j] - pts[j]));
    pts = std::move(next);
    result.codebook = Codebook::scalar(pts, s);
    result.distortion_history.push_back(expected_cell_error(result.codebook, density));
    result.iterations = it + 1;
    if (!reseeded && move < tol) return result;
  }
  throw ConvergenceError("lloyd_max_1d did not converge in " + std::to_string(max_iter) +
                             " iterations",
                         pts);
}

// ---------------------------------------------------------------------------
// Panter-Dite

Codebook panter_dite_1d(const Density1D& density, std::size_t k) {
  if (k == 0) throw InvalidInputError("panter_dite_1d needs k >= 1");
  const Interval s = density.support;
  if (!(s.hi > s.lo)) throw InvalidInputError("density support must have hi > lo");

  constexpr std::size_t kTable = 4096;
  const double h = (s.hi - s.lo) / static_cast<double>(kTable);
  auto node = [&](std::size_t i) {
    return i == kTable ? s.hi : s.lo + h * static_cast<double>(i);
  };
  auto root_density = [&](double y) {
    const double f = density.f(y);
    if (f < 0.0 || std::isnan(f)) throw InvalidInputError("density is negative or NaN");
    return std::cbrt(f);
  };
  for (std::size_t i = 0; i < kTable; ++i) {
    const double a = node(i), b = node(i + 1);
    if (density.f(a) == 0.0 && density.f(0.5 * (a + b)) == 0.0 && density.f(b) == 0.0) {
      throw DomainError("panter_dite_1d: density vanishes on [" + std::to_string(a) + ", " +
                        std::to_string(b) + "]; f^{1/3} quantiles are not unique");
    }
  }

  using Quad = boost::math::quadrature::gauss_kronrod<double, 31>;
  auto integral = [&](double a, double b) {
    if (!(b > a)) return 0.0;
    return Quad::integrate(root_density, a, b, 4, 1e-12);
  };
  std::vector<double> cumulative(kTable + 1, 0.0);
  for (std::size_t i = 0; i < kTable; ++i) {
    cumulative[i + 1] = cumulative[i] + integral(node(i), node(i + 1));
  }
  const double total = cumulative.back();

  std::vector<double> pts(k);
  for (std::size_t j = 0; j < k; ++j) {
    const double target = total * (2.0 * static_cast<double>(j) + 1.0) / (2.0 * static_cast<double>(k));
    auto it = std::upper_bound(cumulative.begin(), cumulative.end(), target);
    std::size_t i = it == cumulative.begin() ? 0 : static_cast<std::size_t>(it - cumulative.begin()) - 1;
    i = std::min(i, kTable - 1);
    const double a = node(i), b = node(i + 1);
    const double rest = target - cumulative[i];
    auto residual = [&](double y) { return integral(a, y) - rest; };
    const double fa = residual(a), fb = residual(b);
    double root = a;
    if (fa >= 0.0) {
      root = a;
    } else if (fb <= 0.0) {
      root = b;
    } else {
      boost::uintmax_t iters = 200;
      auto tol = [](double l, double u) { return std::abs(u - l) <= 4e-16 * std::max(1.0, std::abs(u)); };
      const auto [l, u] = boost::math::tools::toms748_solve(residual, a, b, fa, fb, tol, iters);
      root = 0.5 * (l + u);
    }
    pts[j] = root;
  }
  for (std::size_t j = 1; j < k; ++j) {
    if (!(pts[j] > pts[j - 1])) {
      throw NumericalDegeneracyError("panter_dite_1d: quantile inversion produced coincident points");
    }
  }
  return Codebook::scalar(std::move(pts), s);
}

// ---------------------------------------------------------------------------
// Covering quantizer

CoveringQuantizer::CoveringQuantizer(Codebook centers, double radius, double eps, double side)
    : centers_(std::move(centers)), radius_(radius), eps_(eps), side_(side) {
  if (!(radius_ > 0.0) || !(eps_ > 0.0)) {
    throw InvalidInputError("covering quantizer needs r > 0 and eps > 0");
  }
}

namespace {

// Centers (i + 1/2) s of the half-offset lattice whose cube meets the open
// radius-r ball. Stops early once more than `limit` centers are found.
std::vector<double> lattice_centers(std::size_t p, double r, double s, std::size_t limit) {
  const auto half = static_cast<long>(std::ceil(r / s)) + 1;
  std::vector<long> idx(p, -half);
  std::vector<double> out;
  const double r2 = r * r;
  while (true) {
    double dist2 = 0.0;
    for (std::size_t i = 0; i < p; ++i) {
      const double c = (static_cast<double>(idx[i]) + 0.5) * s;
      const double gap = std::max(std::abs(c) - 0.5 * s, 0.0);
      dist2 += gap * gap;
    }
    if (dist2 < r2) {
      for (std::size_t i = 0; i < p; ++i) out.push_back((static_cast<double>(idx[i]) + 0.5) * s);
      if (out.size() / p > limit) return out;
    }
    std::size_t d = 0;
    while (d < p && ++idx[d] >= half) idx[d++] = -half;
    if (d == p) break;
  }
  return out;
}

std::size_t lattice_count(std::size_t p, double r, double s, std::size_t limit) {
  return lattice_centers(p, r, s, limit).size() / p;
}

}  // namespace

CoveringQuantizer covering_codebook(std::size_t p, double r, std::size_t k,
                                    std::size_t audit_points, std::uint64_t audit_seed) {
  if (p == 0) throw InvalidInputError("covering_codebook needs p >= 1");
  if (!(r > 0.0) || !std::isfinite(r)) throw InvalidInputError("covering_codebook needs r > 0");
  if (k == 0) throw InvalidInputError("covering_codebook needs k >= 1");

  std::optional<CoveringQuantizer> cq;
  if (k >= covering_min_k(p)) {
    // At s = 2r the lattice keeps exactly the 2^p cubes around the origin.
    double hi = 2.0 * r;
    double lo = hi;
    while (lattice_count(p, r, lo, k) <= k) {
      hi = lo;
      lo *= 0.5;
    }
    for (int it = 0; it < 200 && hi - lo > 1e-15 * hi; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (lattice_count(p, r, mid, k) <= k) hi = mid;
      else lo = mid;
    }
    const double eps = 0.5 * hi * std::sqrt(static_cast<double>(p));
    if (eps < r) {
      cq.emplace(Codebook(p, lattice_centers(p, r, hi, k)), r, eps, hi);
    }
  }
  if (!cq) cq.emplace(Codebook(p, std::vector<double>(p, 0.0)), r, r, 0.0);

  if (audit_points > 0) {
    const std::size_t misses = covering_audit(*cq, audit_points, audit_seed);
    if (misses != 0) {
      throw ConstructionError("covering audit found " + std::to_string(misses) +
                              " uncovered points (p=" + std::to_string(p) +
                              ", k=" + std::to_string(k) + ")");
    }
  }
  return *cq;
}

std::size_t covering_audit(const CoveringQuantizer& cq, std::size_t points, std::uint64_t seed) {
  const std::size_t p = cq.dim();
  const double r = cq.radius();
  const double tol = cq.eps() * (1.0 + 1e-12) + 1e-15;
  const auto c = cq.centers().coords();
  const std::size_t k = cq.centers().size();
  Engine engine = make_engine(seed, 0xc0fe);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<double> v(p);
  std::size_t misses = 0;
  for (std::size_t n = 0; n < points; ++n) {
    double norm2 = 0.0;
    for (double& t : v) {
      t = gauss(engine);
      norm2 += t * t;
    }
    // Every 100th audit point sits on the boundary sphere.
    const double u = std::generate_canonical<double, 53>(engine);
    const double radius = (n % 100 == 0) ? r : r * std::pow(u, 1.0 / static_cast<double>(p));
    const double scale = radius / std::sqrt(norm2);
    for (double& t : v) t *= scale;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < k && best > tol * tol; ++j) {
      double acc = 0.0;
      for (std::size_t i = 0; i < p; ++i) {
        const double d = v[i] - c[j * p + i];
        acc += d * d;
      }
      best = std::min(best, acc);
    }
    if (best > tol * tol) ++misses;
  }
  return misses;
}

std::size_t covering_quantize(const CoveringQuantizer& cq, std::span<const double> v) {
  if (v.size() != cq.dim()) throw InvalidInputError("covering_quantize: dimension mismatch");
  double norm2 = 0.0;
  for (double t : v) norm2 += t * t;
  if (std::sqrt(norm2) > cq.radius()) return cq.overflow_index();
  return quantize_nn(cq.centers(), v);
}

// ---------------------------------------------------------------------------
// Centroids

CellCentroids centroids_from_samples(const std::function<std::size_t(const Vector&)>& cell_index,
                                     std::span<const Sample> samples, std::size_t m) {
  if (m == 0) throw InvalidInputError("centroids_from_samples needs m >= 1");
  if (samples.empty()) throw InvalidInputError("centroids_from_samples needs samples");
  const auto p = samples.front().y.size();
  CellCentroids out;
  out.points.assign(m, Vector::Zero(p));
  out.counts.assign(m, 0);
  Vector global = Vector::Zero(p);
  for (const auto& s : samples) {
    const std::size_t j = cell_index(s.x);
    if (j >= m) throw InvalidInputError("cell index " + std::to_string(j) + " out of range");
    out.points[j] += s.y;
    ++out.counts[j];
    global += s.y;
  }
  global /= static_cast<double>(samples.size());
  for (std::size_t j = 0; j < m; ++j) {
    if (out.counts[j] == 0) {
      out.points[j] = global;
      ++out.empty_cells;
    } else {
      out.points[j] /= static_cast<double>(out.counts[j]);
    }
  }
  if (out.empty_cells > 0) {
    spdlog::info("centroids_from_samples: {} of {} cells empty, set to the global mean",
                 out.empty_cells, m);
  }
  return out;
}

}  // namespace mmseq
