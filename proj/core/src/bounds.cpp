#include "mmseq/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <json.hpp>
#include <string>

#include "mmseq/chunked.hpp"
#include "mmseq/errors.hpp"

namespace mmseq {
namespace {

constexpr std::uint64_t kStreamBvm = 3;
constexpr std::size_t kCoarseScanPoints = 2000;
constexpr double kGoldenRelTol = 1e-8;

void require(bool ok, const std::string& what) {
  if (!ok) throw InvalidInputError(what);
}

void require_nonneg(double v, const char* name) {
  require(std::isfinite(v) && v >= 0.0, std::string(name) + " must be finite and >= 0");
}

void require_pos(double v, const char* name) {
  require(std::isfinite(v) && v > 0.0, std::string(name) + " must be finite and > 0");
}

nlohmann::ordered_json config_json(const BoundConfig& c) {
  nlohmann::ordered_json j;
  j["L"] = c.L;
  j["fit_L"] = c.fit_L;
  j["c_corollary"] = c.c_corollary;
  j["c_thm2_moment"] = c.c_thm2_moment;
  j["c1"] = c.c1;
  j["c2"] = c.c2;
  j["L0"] = c.L0;
  j["C_abs"] = c.C_abs;
  return j;
}

// Type-7 (linear interpolation) quantile of sorted data.
double sorted_quantile(const std::vector<double>& sorted, double level) {
  if (sorted.empty()) return std::nan("");
  const double h = level * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

}  // namespace

void BoundConfig::validate() const {
  require_pos(L, "L");
  require_pos(c_corollary, "c_corollary");
  require_pos(c_thm2_moment, "c_thm2_moment");
  require_pos(c1, "c1");
  require_pos(c2, "c2");
  require_pos(L0, "L0");
  require_pos(C_abs, "C_abs");
}

std::string to_json(const BoundReport& report) {
  nlohmann::ordered_json j;
  j["bound"] = report.bound;
  j["value"] = report.value;
  if (report.r_star) j["r_star"] = *report.r_star;
  j["config"] = config_json(report.config);
  nlohmann::ordered_json inputs = nlohmann::ordered_json::object();
  for (const auto& [key, value] : report.inputs) inputs[key] = value;
  j["inputs"] = inputs;
  return j.dump();
}

double thm1_rhs(double L, double delta, std::size_t n_obs, double e_inv_sqrt_fisher,
                double mmse) {
  require_pos(L, "L");
  require_nonneg(delta, "delta");
  require(n_obs >= 1, "n_obs must be >= 1");
  require_nonneg(e_inv_sqrt_fisher, "E[I^{-1/2}]");
  require_nonneg(mmse, "mmse");
  if (delta == 0.0) return 0.0;
  const double ratio =
      (e_inv_sqrt_fisher + std::sqrt(mmse)) / (delta * std::sqrt(static_cast<double>(n_obs)));
  return L * delta * delta * std::min(1.0, ratio);
}

double thm1_rhs_gaussian(double L, double delta, std::size_t n_obs, double sigma) {
  require_pos(L, "L");
  require_nonneg(delta, "delta");
  require(n_obs >= 1, "n_obs must be >= 1");
  require_nonneg(sigma, "sigma");
  if (delta == 0.0) return 0.0;
  const double ratio = sigma / (delta * std::sqrt(static_cast<double>(n_obs)));
  return L * delta * delta * std::min(1.0, ratio);
}

double corollary_rhs(std::size_t k, std::size_t n_obs, double e_inv_sqrt_fisher, double mmse,
                     double c) {
  require(k >= 1, "k must be >= 1");
  require(n_obs >= 1, "n_obs must be >= 1");
  require_nonneg(e_inv_sqrt_fisher, "E[I^{-1/2}]");
  require_nonneg(mmse, "mmse");
  require_pos(c, "c");
  const double kd = static_cast<double>(k);
  const double est = (e_inv_sqrt_fisher + std::sqrt(mmse)) /
                     (kd * std::sqrt(static_cast<double>(n_obs)));
  return c * std::min(1.0 / (kd * kd), est);
}

double corollary_weakened_rhs(std::size_t k, double mmse, double c) {
  require(k >= 1, "k must be >= 1");
  require_nonneg(mmse, "mmse");
  require_pos(c, "c");
  const double kd = static_cast<double>(k);
  return c * std::min(1.0 / (kd * kd), std::sqrt(mmse) / kd);
}

double info_inequality_gap(const ScalarChannelModel& model, std::size_t n_obs, double mmse_hat) {
  require(n_obs >= 1, "n_obs must be >= 1");
  if (model.is_noiseless()) {
    throw DomainError("Fisher information is undefined for the noiseless channel");
  }
  return mmse_hat - model.expected_inv_fisher() / static_cast<double>(n_obs);
}

double thm2_bound_moment(double e2, double e4, std::size_t k, std::size_t p, double c) {
  require_pos(e2, "e2");
  require_pos(e4, "e4");
  require(k >= 1, "k must be >= 1");
  require(p >= 1, "p must be >= 1");
  require_pos(c, "c");
  const double exponent = -2.0 / (3.0 * static_cast<double>(p));
  return c * std::pow(e2 * e4, 2.0 / 3.0) * std::pow(static_cast<double>(k), exponent);
}

double moment_balance_radius(double e2, double e4, std::size_t k, std::size_t p) {
  require_pos(e2, "e2");
  require_pos(e4, "e4");
  require(k >= 1, "k must be >= 1");
  require(p >= 1, "p must be >= 1");
  return std::cbrt(std::sqrt(e2 * e4) / 2.0) *
         std::pow(static_cast<double>(k), 2.0 / (3.0 * static_cast<double>(p)));
}

double thm2_objective(double r, double e1, double e4, double v, std::size_t k, std::size_t p,
                      double c1, double c2) {
  const double d = r - e1;
  return c1 * r * r * std::pow(static_cast<double>(k), -2.0 / static_cast<double>(p)) +
         c2 * std::sqrt(e4) * std::exp(-d * d / (4.0 * v));
}

SubgaussianBound thm2_bound_subgaussian(double e1, double e4, double v, std::size_t k,
                                        std::size_t p, double c1, double c2) {
  require_nonneg(e1, "e1");
  require_nonneg(e4, "e4");
  require_pos(v, "v");
  require(k >= 1, "k must be >= 1");
  require(p >= 1, "p must be >= 1");
  require_pos(c1, "c1");
  require_pos(c2, "c2");
  const auto g = [&](double r) { return thm2_objective(r, e1, e4, v, k, p, c1, c2); };

  const double width = 20.0 * std::sqrt(v);
  const double step = width / static_cast<double>(kCoarseScanPoints);
  std::size_t best_i = 1;
  double best = g(e1 + step);
  for (std::size_t i = 2; i <= kCoarseScanPoints; ++i) {
    const double val = g(e1 + step * static_cast<double>(i));
    if (val < best) {
      best = val;
      best_i = i;
    }
  }
  double best_r = e1 + step * static_cast<double>(best_i);

  // Golden section on the neighbouring scan cells; the lower end never reaches e1.
  double a = e1 + step * static_cast<double>(best_i - 1);
  double b = e1 + step * static_cast<double>(std::min(best_i + 1, kCoarseScanPoints));
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double x1 = b - inv_phi * (b - a);
  double x2 = a + inv_phi * (b - a);
  double f1 = g(x1);
  double f2 = g(x2);
  while (b - a > kGoldenRelTol * std::max(std::abs(a) + std::abs(b), 1e-300) / 2.0) {
    if (f1 <= f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - inv_phi * (b - a);
      f1 = g(x1);
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + inv_phi * (b - a);
      f2 = g(x2);
    }
  }
  const double r_gs = f1 <= f2 ? x1 : x2;
  const double f_gs = std::min(f1, f2);
  if (f_gs < best && r_gs > e1) {
    best = f_gs;
    best_r = r_gs;
  }
  return {best, best_r};
}

double weakened_thm2(std::size_t k, std::size_t p, double c) {
  require(k >= 2, "k must be >= 2 for the log k / k^{2/p} form");
  require(p >= 1, "p must be >= 1");
  require_pos(c, "c");
  const double kd = static_cast<double>(k);
  return c * std::log(kd) / std::pow(kd, 2.0 / static_cast<double>(p));
}

double score_average_Gn(const ScalarChannelModel& model, std::span<const double> x, double y) {
  require(!x.empty(), "score average needs at least one observation");
  const double info = model.fisher(y);
  double sum = 0.0;
  for (double xi : x) sum += model.cond_score(xi, y);
  return sum / (static_cast<double>(x.size()) * info);
}

BvmSummary bvm_diagnostics(const ScalarChannelModel& model, std::size_t n_obs,
                           const BvmOptions& opts) {
  require(n_obs >= 1, "n_obs must be >= 1");
  require(opts.N >= 10000, "bvm diagnostics need N >= 10000");
  require(opts.chunks >= 1, "chunk count must be >= 1");
  for (double l0 : opts.L0) require_pos(l0, "L0");
  for (double q : opts.quantile_levels) require(q >= 0.0 && q <= 1.0, "quantile level in [0,1]");

  struct Partial {
    RunningMoments abs_z;
    RunningMoments abs_err;
    RunningMoments sq_err;
    std::vector<double> scaled;
  };
  const std::size_t chunks = std::min(opts.chunks, opts.N);
  std::vector<Partial> partials(chunks);
  const double nd = static_cast<double>(n_obs);
  run_chunks(chunks, opts.threads, [&](std::size_t c) {
    Partial& part = partials[c];
    Engine engine = make_engine(opts.seed, kStreamBvm, c);
    const std::size_t size = chunk_size(opts.N, chunks, c);
    part.scaled.reserve(size);
    for (std::size_t i = 0; i < size; ++i) {
      const ScalarDraw draw = sample_joint(model, n_obs, engine);
      const double eta = posterior_mean_scalar(model, draw.x);
      const double gn = score_average_Gn(model, draw.x, draw.y);
      const double z = eta - (draw.y + gn);
      part.abs_z.add(std::abs(z));
      part.abs_err.add(std::abs(eta - draw.y));
      part.sq_err.add((eta - draw.y) * (eta - draw.y));
      part.scaled.push_back(std::sqrt(nd * model.fisher(draw.y)) * std::abs(z));
    }
  });

  RunningMoments abs_z;
  RunningMoments abs_err;
  RunningMoments sq_err;
  std::vector<double> scaled;
  scaled.reserve(opts.N);
  for (const auto& part : partials) {
    abs_z.merge(part.abs_z);
    abs_err.merge(part.abs_err);
    sq_err.merge(part.sq_err);
    scaled.insert(scaled.end(), part.scaled.begin(), part.scaled.end());
  }
  std::sort(scaled.begin(), scaled.end());

  BvmSummary out;
  out.n_obs = n_obs;
  out.N = opts.N;
  out.seed = opts.seed;
  out.mean_abs_z = abs_z.estimate();
  out.mean_abs_error = abs_err.estimate();
  out.mean_sq_error = sq_err.estimate();
  for (double q : opts.quantile_levels) {
    out.scaled_z_quantiles.emplace_back(q, sorted_quantile(scaled, q));
  }
  const double radius_scale = std::pow(std::log(nd) / nd, 0.25);
  for (double l0 : opts.L0) {
    const double threshold = l0 * radius_scale;
    const auto inside = static_cast<std::size_t>(
        std::upper_bound(scaled.begin(), scaled.end(), threshold) - scaled.begin());
    out.coverage.emplace_back(l0, static_cast<double>(inside) / static_cast<double>(scaled.size()));
  }
  return out;
}

std::string to_json(const BvmSummary& s) {
  nlohmann::ordered_json j;
  j["n_obs"] = s.n_obs;
  j["N"] = s.N;
  j["seed"] = s.seed;
  j["mean_abs_z"] = s.mean_abs_z.value;
  j["mean_abs_z_se"] = s.mean_abs_z.se;
  j["mean_abs_error"] = s.mean_abs_error.value;
  j["mean_abs_error_se"] = s.mean_abs_error.se;
  j["mean_sq_error"] = s.mean_sq_error.value;
  j["mean_sq_error_se"] = s.mean_sq_error.se;
  auto quantiles = nlohmann::ordered_json::array();
  for (const auto& [level, value] : s.scaled_z_quantiles) {
    quantiles.push_back({{"level", level}, {"value", value}});
  }
  j["scaled_z_quantiles"] = quantiles;
  auto coverage = nlohmann::ordered_json::array();
  for (const auto& [l0, frac] : s.coverage) coverage.push_back({{"L0", l0}, {"coverage", frac}});
  j["coverage"] = coverage;
  return j.dump();
}

BoundReport evaluate_bound(const BoundRequest& request) {
  request.config.validate();
  BoundReport report;
  report.bound = request.name;
  report.config = request.config;
  const auto input = [&](const char* key) {
    const auto it = request.inputs.find(key);
    if (it == request.inputs.end()) {
      throw InvalidInputError("bound '" + request.name + "' needs input '" + key + "'");
    }
    report.inputs.emplace_back(key, it->second);
    return it->second;
  };
  const auto count = [&](const char* key) {
    const double v = input(key);
    if (!(v >= 1.0 && v == std::floor(v) && v < 1e15)) {
      throw InvalidInputError(std::string("bound input '") + key + "' must be a positive integer");
    }
    return static_cast<std::size_t>(v);
  };
  const BoundConfig& c = request.config;
  const std::string& name = request.name;
  if (name == "thm1") {
    const double delta = input("delta");
    const std::size_t n = count("n");
    const double e = input("e_inv_sqrt_fisher");
    report.value = thm1_rhs(c.L, delta, n, e, input("mmse"));
  } else if (name == "thm1-gaussian") {
    const double delta = input("delta");
    const std::size_t n = count("n");
    report.value = thm1_rhs_gaussian(c.L, delta, n, input("sigma"));
  } else if (name == "corollary") {
    const std::size_t k = count("k");
    const std::size_t n = count("n");
    const double e = input("e_inv_sqrt_fisher");
    report.value = corollary_rhs(k, n, e, input("mmse"), c.c_corollary);
  } else if (name == "corollary-weakened") {
    const std::size_t k = count("k");
    report.value = corollary_weakened_rhs(k, input("mmse"), c.c_corollary);
  } else if (name == "info-gap") {
    if (!request.model) throw InvalidInputError("bound 'info-gap' needs a scalar model block");
    const std::size_t n = count("n");
    report.value = info_inequality_gap(*request.model, n, input("mmse"));
  } else if (name == "thm2-moment") {
    const double e2 = input("e2");
    const double e4 = input("e4");
    const std::size_t k = count("k");
    report.value = thm2_bound_moment(e2, e4, k, count("p"), c.c_thm2_moment);
  } else if (name == "thm2-subgaussian") {
    const double e1 = input("e1");
    const double e4 = input("e4");
    const double v = input("v");
    const std::size_t k = count("k");
    const SubgaussianBound sub = thm2_bound_subgaussian(e1, e4, v, k, count("p"), c.c1, c.c2);
    report.value = sub.value;
    report.r_star = sub.r_star;
  } else if (name == "weakened-thm2") {
    // Follows from the subgaussian form, so it shares its leading constant c1.
    const std::size_t k = count("k");
    report.value = weakened_thm2(k, count("p"), c.c1);
  } else {
    throw InvalidInputError("unknown bound '" + name + "'");
  }
  return report;
}

double fit_scale(double observed, double shape) {
  require(std::isfinite(shape) && shape > 0.0, "calibration shape must be > 0");
  require(std::isfinite(observed), "calibration target must be finite");
  return observed / shape;
}

}  // namespace mmseq
