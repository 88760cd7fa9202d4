#include "mmseq/experiments.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <json.hpp>
#include <optional>
#include <ostream>
#include <sstream>
#include <spdlog/spdlog.h>

#include "mmseq/chunked.hpp"
#include "mmseq/codebook_io.hpp"
#include "mmseq/errors.hpp"
#include "mmseq/quantizer.hpp"
#include "mmseq/regret.hpp"

namespace mmseq {
namespace {

constexpr std::uint64_t kStreamScalarSweep = 10;
constexpr std::uint64_t kStreamVectorSweep = 11;
constexpr std::uint64_t kStreamVectorMoments = 12;
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

void mark_failed(SweepRow& row, const std::string& what) {
  row.error = what.empty() ? "unknown error" : what;
  row.regime = "error";
  row.mmse = row.mmse_k = row.regret = row.residual = row.gap = {kNaN, kNaN};
  row.dist_y = row.bound = row.bound_constant = row.moment_constant = kNaN;
  row.delta = row.radius = row.eps = kNaN;
}

std::string describe(const std::exception& e) {
  if (const auto* err = dynamic_cast<const Error*>(&e)) {
    return std::string(to_string(err->kind())) + ": " + err->what();
  }
  return e.what();
}

void fill_estimates(SweepRow& row, const RegretEstimate& est) {
  row.mmse = est.mmse;
  row.mmse_k = est.mmse_k;
  row.regret = est.regret_direct;
  row.residual = {est.residual(), est.combined_se()};
}

// The bound of a cell before its constant is applied.
struct CellShape {
  bool ok = false;
  double unit = 0.0;
  double moment_unit = 0.0;
  double gap = 0.0;  // |paired regret - dist_y| (scalar) or regret (vector)
};

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  fields.push_back(std::move(cur));
  return fields;
}

std::size_t parse_count(const std::string& s, const char* what) {
  std::size_t pos = 0;
  unsigned long long v = 0;
  try {
    v = std::stoull(s, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos == 0 || pos != s.size()) {
    throw InvalidInputError(std::string("sweep CSV: bad ") + what + " '" + s + "'");
  }
  return static_cast<std::size_t>(v);
}

nlohmann::ordered_json json_number(double v) {
  if (std::isfinite(v)) return v;
  return nullptr;
}

}  // namespace

std::string_view to_string(Regime regime) noexcept {
  return regime == Regime::kQuantizationLimited ? "quantization-limited" : "estimation-limited";
}

Regime regime_classify(std::size_t n_obs, std::size_t k) {
  if (n_obs < 1 || k < 1) throw InvalidInputError("regime_classify needs n, k >= 1");
  const auto kk = static_cast<unsigned long long>(k) * static_cast<unsigned long long>(k);
  return static_cast<unsigned long long>(n_obs) > kk ? Regime::kQuantizationLimited
                                                     : Regime::kEstimationLimited;
}

std::vector<SweepRow> sweep_scalar(const ScalarChannelModel& model,
                                   const std::vector<std::size_t>& k_list,
                                   const std::vector<std::size_t>& n_list, std::size_t N,
                                   std::uint64_t master_seed, const SweepOptions& opts) {
  if (k_list.empty() || n_list.empty()) throw InvalidInputError("sweep lists must be nonempty");
  opts.config.validate();
  const double half_width = model.half_width();
  const Density1D density = density_of(model.prior());
  const double e_inv_sqrt = model.is_noiseless() ? 0.0 : model.expected_inv_sqrt_fisher();

  // Codebooks depend on k only.
  std::vector<std::optional<Codebook>> codebooks(k_list.size());
  std::vector<std::string> codebook_errors(k_list.size());
  for (std::size_t ki = 0; ki < k_list.size(); ++ki) {
    try {
      codebooks[ki] = panter_dite_1d(density, k_list[ki]);
    } catch (const std::exception& e) {
      codebook_errors[ki] = describe(e);
    }
  }

  const std::size_t cells = n_list.size() * k_list.size();
  std::vector<SweepRow> rows(cells);
  std::vector<CellShape> shapes(cells);
  run_chunks(cells, opts.threads, [&](std::size_t cell) {
    const auto start = Clock::now();
    const std::size_t ni = cell / k_list.size();
    const std::size_t ki = cell % k_list.size();
    SweepRow& row = rows[cell];
    row.model = model.name();
    row.n = n_list[ni];
    row.k = k_list[ki];
    row.N = N;
    row.seed = derive_seed(master_seed, kStreamScalarSweep, cell);
    row.cells = row.k;
    try {
      if (!codebooks[ki]) throw ConstructionError(codebook_errors[ki]);
      const Codebook& cb = *codebooks[ki];
      const VectorJointModel joint = joint_model(model, row.n);
      const Matrix fill = eta_cell_fill(cb);
      const YErrorFn y_error = [&cb](const Vector& y) { return cell_error(cb, y(0)); };
      const RegretEstimate est =
          estimate_decomposition(joint, eta_cell_fn(cb), cb.size(),
                                 McOptions{N, row.seed, opts.chunks, 1}, &fill, y_error);
      fill_estimates(row, est);
      row.dist_y = distortion_of_Y(cb, density);
      row.gap = est.regret_minus_y_error;
      row.delta = delta(cb, half_width);
      row.regime = std::string(to_string(regime_classify(row.n, row.k)));
      shapes[cell] = {true,
                      corollary_rhs(row.k, row.n, e_inv_sqrt, std::max(est.mmse.value, 0.0), 1.0),
                      0.0, std::abs(row.gap.value)};
    } catch (const std::exception& e) {
      mark_failed(row, describe(e));
    }
    row.wall_ms = elapsed_ms(start);
  });

  double c = opts.config.c_corollary;
  if (opts.calibrate) {
    if (shapes[0].ok && shapes[0].unit > 0.0) {
      c = fit_scale(shapes[0].gap, shapes[0].unit);
    } else {
      spdlog::warn("sweep_scalar: calibration cell unusable, keeping c = {}", c);
    }
  }
  for (std::size_t cell = 0; cell < cells; ++cell) {
    if (!shapes[cell].ok) continue;
    rows[cell].bound_constant = c;
    rows[cell].bound = c * shapes[cell].unit;
  }
  return rows;
}

RPolicy RPolicy::parse(std::string_view text) {
  if (text == "optimized") return {};
  if (text == "moment") return {Kind::kMoment, 0.0};
  constexpr std::string_view prefix = "fixed:";
  if (text.substr(0, prefix.size()) == prefix) {
    double v = 0.0;
    try {
      v = parse_double(text.substr(prefix.size()));
    } catch (const Error&) {
      throw ConfigError("r_policy: bad fixed radius in '" + std::string(text) + "'");
    }
    if (!(std::isfinite(v) && v > 0.0)) {
      throw ConfigError("r_policy: fixed radius must be > 0 in '" + std::string(text) + "'");
    }
    return {Kind::kFixed, v};
  }
  throw ConfigError("r_policy must be optimized, moment or fixed:<r>, got '" + std::string(text) +
                    "'");
}

std::string RPolicy::str() const {
  switch (kind) {
    case Kind::kOptimized:
      return "optimized";
    case Kind::kMoment:
      return "moment";
    case Kind::kFixed:
      return "fixed:" + format_double(fixed_value);
  }
  return "optimized";
}

std::vector<SweepRow> sweep_vector(const LinearGaussianModel& model,
                                   const std::vector<std::size_t>& k_list, std::size_t N,
                                   std::uint64_t master_seed, RPolicy r_policy,
                                   const SweepOptions& opts) {
  if (k_list.empty()) throw InvalidInputError("sweep lists must be nonempty");
  opts.config.validate();
  const VectorJointModel joint = model.to_joint();
  const std::size_t p = model.p();
  const std::size_t p_eff = joint.effective_dim();

  KnownMoments km = model.known_moments();
  double v = model.subgaussian_v();
  if (!km.mean_norm || !km.mean_sq_norm || !km.mean_fourth_norm || !(v > 0.0)) {
    const MomentReport rep = moment_report(
        joint, opts.moment_samples, derive_seed(master_seed, kStreamVectorMoments));
    if (!km.mean_norm) km.mean_norm = rep.mean_norm.value;
    if (!km.mean_sq_norm) km.mean_sq_norm = rep.mean_sq_norm.value;
    if (!km.mean_fourth_norm) km.mean_fourth_norm = rep.mean_fourth_norm.value;
    if (!(v > 0.0)) v = rep.subgaussian_v;
  }
  const double e1 = *km.mean_norm;
  const double e2 = *km.mean_sq_norm;
  const double e4 = *km.mean_fourth_norm;
  const BoundConfig& cfg = opts.config;

  const std::size_t cells = k_list.size();
  std::vector<SweepRow> rows(cells);
  std::vector<CellShape> shapes(cells);
  run_chunks(cells, opts.threads, [&](std::size_t cell) {
    const auto start = Clock::now();
    SweepRow& row = rows[cell];
    row.model = joint.name;
    row.n = model.n();
    row.k = k_list[cell];
    row.N = N;
    row.seed = derive_seed(master_seed, kStreamVectorSweep, cell);
    try {
      const SubgaussianBound sub = thm2_bound_subgaussian(e1, e4, v, row.k, p_eff, cfg.c1, cfg.c2);
      switch (r_policy.kind) {
        case RPolicy::Kind::kOptimized:
          row.radius = sub.r_star;
          break;
        case RPolicy::Kind::kMoment:
          row.radius = moment_balance_radius(e2, e4, row.k, p_eff);
          break;
        case RPolicy::Kind::kFixed:
          row.radius = r_policy.fixed_value;
          break;
      }
      const CoveringQuantizer cq = covering_codebook(p, row.radius, row.k);
      row.eps = cq.eps();
      row.cells = cq.cell_count();
      const Matrix fill = covering_cell_fill(cq);
      const RegretEstimate est =
          estimate_decomposition(joint, covering_cell_fn(cq), cq.cell_count(),
                                 McOptions{N, row.seed, opts.chunks, 1}, &fill);
      fill_estimates(row, est);
      row.regime = std::string(to_string(regime_classify(row.n, row.k)));
      shapes[cell] = {true, sub.value, thm2_bound_moment(e2, e4, row.k, p_eff, 1.0),
                      row.regret.value};
    } catch (const std::exception& e) {
      mark_failed(row, describe(e));
    }
    row.wall_ms = elapsed_ms(start);
  });

  // (c1, c2) are fitted as a common scale on the configured pair, which leaves
  // the minimizing r unchanged.
  double scale = 1.0;
  double c_moment = cfg.c_thm2_moment;
  if (opts.calibrate) {
    if (shapes[0].ok && shapes[0].unit > 0.0 && shapes[0].moment_unit > 0.0) {
      scale = fit_scale(shapes[0].gap, shapes[0].unit);
      c_moment = fit_scale(shapes[0].gap, shapes[0].moment_unit);
    } else {
      spdlog::warn("sweep_vector: calibration cell unusable, keeping configured constants");
    }
  }
  for (std::size_t cell = 0; cell < cells; ++cell) {
    if (!shapes[cell].ok) continue;
    rows[cell].bound_constant = scale;
    rows[cell].bound = scale * shapes[cell].unit;
    rows[cell].moment_constant = c_moment;
    rows[cell].dist_y = c_moment * shapes[cell].moment_unit;
  }
  return rows;
}

SlopeFit fit_loglog_slope(const std::vector<std::pair<double, double>>& pairs) {
  if (pairs.size() < 2) throw InvalidInputError("slope fit needs at least two points");
  double mx = 0.0;
  double my = 0.0;
  for (const auto& [x, y] : pairs) {
    if (!(x > 0.0 && y > 0.0 && std::isfinite(x) && std::isfinite(y))) {
      throw InvalidInputError("slope fit needs finite positive x and y");
    }
    mx += std::log(x);
    my += std::log(y);
  }
  const double m = static_cast<double>(pairs.size());
  mx /= m;
  my /= m;
  double sxx = 0.0;
  double sxy = 0.0;
  double syy = 0.0;
  for (const auto& [x, y] : pairs) {
    const double dx = std::log(x) - mx;
    const double dy = std::log(y) - my;
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
  }
  if (sxx == 0.0) throw InvalidInputError("slope fit needs at least two distinct x");
  SlopeFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  fit.r_squared = syy == 0.0 ? 1.0 : (sxy * sxy) / (sxx * syy);
  return fit;
}

void write_csv(std::ostream& os, const std::vector<SweepRow>& rows) {
  os << kSweepCsvHeader << '\n';
  for (const auto& r : rows) {
    os << csv_field(r.model) << ',' << r.n << ',' << r.k << ',' << r.N << ',' << r.seed << ','
       << format_double(r.mmse.value) << ',' << format_double(r.mmse.se) << ','
       << format_double(r.mmse_k.value) << ',' << format_double(r.mmse_k.se) << ','
       << format_double(r.regret.value) << ',' << format_double(r.regret.se) << ','
       << format_double(r.dist_y) << ',' << format_double(r.bound) << ',' << csv_field(r.regime)
       << ',' << format_double(r.wall_ms) << '\n';
  }
}

void write_json(std::ostream& os, const std::vector<SweepRow>& rows) {
  auto arr = nlohmann::ordered_json::array();
  for (const auto& r : rows) {
    nlohmann::ordered_json j;
    j["model"] = r.model;
    j["n"] = r.n;
    j["k"] = r.k;
    j["N"] = r.N;
    j["seed"] = r.seed;
    j["mmse"] = json_number(r.mmse.value);
    j["mmse_se"] = json_number(r.mmse.se);
    j["mmse_k"] = json_number(r.mmse_k.value);
    j["mmse_k_se"] = json_number(r.mmse_k.se);
    j["regret"] = json_number(r.regret.value);
    j["regret_se"] = json_number(r.regret.se);
    j["dist_y"] = json_number(r.dist_y);
    j["bound"] = json_number(r.bound);
    j["regime"] = r.regime;
    j["wall_ms"] = json_number(r.wall_ms);
    j["bound_constant"] = json_number(r.bound_constant);
    j["residual"] = json_number(r.residual.value);
    j["residual_se"] = json_number(r.residual.se);
    j["cells"] = r.cells;
    if (r.radius > 0.0) {
      j["r"] = json_number(r.radius);
      j["eps"] = json_number(r.eps);
      j["moment_constant"] = json_number(r.moment_constant);
    } else {
      j["gap"] = json_number(r.gap.value);
      j["gap_se"] = json_number(r.gap.se);
      j["delta"] = json_number(r.delta);
    }
    if (!r.error.empty()) j["error"] = r.error;
    arr.push_back(std::move(j));
  }
  os << arr.dump(2) << '\n';
}

void emit_csv(const std::vector<SweepRow>& rows, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open '" + path.string() + "' for writing");
  write_csv(os, rows);
  if (!os) throw IoError("write to '" + path.string() + "' failed");
}

void emit_json(const std::vector<SweepRow>& rows, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open '" + path.string() + "' for writing");
  write_json(os, rows);
  if (!os) throw IoError("write to '" + path.string() + "' failed");
}

std::vector<SweepRow> read_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line != kSweepCsvHeader) {
    throw InvalidInputError("sweep CSV: missing or unexpected header");
  }
  std::vector<SweepRow> rows;
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() != 15) {
      throw InvalidInputError("sweep CSV line " + std::to_string(lineno) + ": expected 15 fields");
    }
    SweepRow r;
    r.model = f[0];
    r.n = parse_count(f[1], "n");
    r.k = parse_count(f[2], "k");
    r.N = parse_count(f[3], "N");
    r.seed = parse_count(f[4], "seed");
    r.mmse = {parse_double(f[5]), parse_double(f[6])};
    r.mmse_k = {parse_double(f[7]), parse_double(f[8])};
    r.regret = {parse_double(f[9]), parse_double(f[10])};
    r.dist_y = parse_double(f[11]);
    r.bound = parse_double(f[12]);
    r.regime = f[13];
    r.wall_ms = parse_double(f[14]);
    rows.push_back(std::move(r));
  }
  return rows;
}

std::vector<SweepRow> load_csv(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open '" + path.string() + "'");
  return read_csv(is);
}

}  // namespace mmseq
