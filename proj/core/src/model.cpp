#include "mmseq/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>
#include <string>

#include "mmseq/errors.hpp"

namespace mmseq {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
// Posterior terms more than this many nats below the peak are below double
// precision relative to the normalizer and are not exponentiated.
constexpr double kLogCut = 40.0;
// Coarse stride of the windowed likelihood scan for non-Gaussian families.
constexpr std::size_t kCoarseStride = 64;
// Posteriors whose non-negligible window spans fewer grid nodes than this are
// re-integrated on a local grid of kRefineNodes nodes.
constexpr std::size_t kSharpWindowNodes = 64;
constexpr std::size_t kRefineNodes = 1025;

void require_finite_positive(double v, const char* what) {
  if (!(std::isfinite(v) && v > 0.0)) {
    throw InvalidInputError(std::string(what) + " must be finite and positive");
  }
}

std::string format_vector(std::span<const double> x) {
  std::ostringstream os;
  os.precision(17);
  os << '(';
  const std::size_t shown = std::min<std::size_t>(x.size(), 8);
  for (std::size_t i = 0; i < shown; ++i) os << (i ? ", " : "") << x[i];
  if (x.size() > shown) os << ", ... [" << x.size() << " values]";
  os << ')';
  return os.str();
}

// log(1 + exp(-t)) for t >= 0.
inline double log1p_exp_neg(double t) noexcept { return t > 37.0 ? std::exp(-t) : std::log1p(std::exp(-t)); }

}  // namespace

// ---------------------------------------------------------------------------
// PriorDensity

struct PriorDensity::State {
  std::string name;
  double half_width = 1.0;
  double log_lipschitz = 0.0;
  LogDensityFn unnormalized;
  double log_normalizer = 0.0;
  SimpsonGrid grid{-1.0, 1.0, kPosteriorGridNodes};
  std::vector<double> log_weighted;
  // strided[j]: log_weighted on the subgrid of stride 2^(j+1).
  std::vector<std::vector<double>> strided;
  // max_log_weighted[j]: largest entry at stride 2^j.
  std::vector<double> max_log_weighted;
  // Inverse-CDF table: nodes y_i on [-A, A] and cumulative masses.
  std::vector<double> cdf_nodes;
  std::vector<double> cdf;
};

PriorDensity::PriorDensity(std::string name, double half_width,
                           LogDensityFn unnormalized_log_density, double log_lipschitz) {
  require_finite_positive(half_width, "prior half-width A");
  if (!unnormalized_log_density) throw InvalidInputError("prior log-density is empty");
  auto st = std::make_shared<State>();
  st->name = std::move(name);
  st->half_width = half_width;
  st->log_lipschitz = log_lipschitz;
  st->unnormalized = std::move(unnormalized_log_density);
  st->grid = SimpsonGrid(-half_width, half_width, kPosteriorGridNodes);

  const auto& g = st->grid;
  std::vector<double> raw(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    raw[i] = st->unnormalized(g.nodes()[i]);
    if (std::isnan(raw[i]) || raw[i] == std::numeric_limits<double>::infinity()) {
      throw InvalidInputError("prior log-density is not finite at y=" +
                              std::to_string(g.nodes()[i]));
    }
  }
  std::vector<double> terms(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) terms[i] = g.log_weights()[i] + raw[i];
  st->log_normalizer = log_sum_exp(terms);
  if (!std::isfinite(st->log_normalizer)) {
    throw InvalidInputError("prior density integrates to zero");
  }
  st->log_weighted.resize(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    st->log_weighted[i] = terms[i] - st->log_normalizer;
  }
  st->max_log_weighted.push_back(
      *std::max_element(st->log_weighted.begin(), st->log_weighted.end()));
  for (std::size_t stride = 2; stride <= kMaxPriorGridStride; stride *= 2) {
    const std::size_t m = (g.size() - 1) / stride + 1;
    const double log_third = std::log(g.step() * static_cast<double>(stride) / 3.0);
    std::vector<double> lw(m);
    for (std::size_t i = 0; i < m; ++i) {
      const double w = (i == 0 || i + 1 == m) ? 1.0 : (i % 2 == 1 ? 4.0 : 2.0);
      lw[i] = log_third + std::log(w) + raw[i * stride] - st->log_normalizer;
    }
    st->max_log_weighted.push_back(*std::max_element(lw.begin(), lw.end()));
    st->strided.push_back(std::move(lw));
  }

  // Cumulative table by the trapezoid rule, renormalized to end at exactly 1.
  const std::size_t m = kInverseCdfNodes;
  st->cdf_nodes.resize(m);
  st->cdf.resize(m);
  const double h = 2.0 * half_width / static_cast<double>(m - 1);
  double prev = std::exp(st->unnormalized(-half_width) - st->log_normalizer);
  st->cdf_nodes[0] = -half_width;
  st->cdf[0] = 0.0;
  for (std::size_t i = 1; i < m; ++i) {
    const double y = (i == m - 1) ? half_width : -half_width + h * static_cast<double>(i);
    const double f = std::exp(st->unnormalized(y) - st->log_normalizer);
    st->cdf_nodes[i] = y;
    st->cdf[i] = st->cdf[i - 1] + 0.5 * h * (prev + f);
    prev = f;
  }
  const double total = st->cdf.back();
  for (double& c : st->cdf) c /= total;
  st->cdf.back() = 1.0;
  state_ = std::move(st);
}

PriorDensity PriorDensity::uniform(double half_width) {
  return PriorDensity("uniform", half_width, [](double) { return 0.0; }, 0.0);
}

PriorDensity PriorDensity::truncated_cosine(double half_width) {
  require_finite_positive(half_width, "prior half-width A");
  const double omega = std::numbers::pi / (4.0 * half_width);
  return PriorDensity(
      "cosine", half_width, [omega](double y) { return std::log(std::cos(omega * y)); }, omega);
}

const std::string& PriorDensity::name() const noexcept { return state_->name; }
double PriorDensity::half_width() const noexcept { return state_->half_width; }
double PriorDensity::log_lipschitz() const noexcept { return state_->log_lipschitz; }
const SimpsonGrid& PriorDensity::grid() const noexcept { return state_->grid; }
std::span<const double> PriorDensity::log_weighted_density() const noexcept {
  return state_->log_weighted;
}

namespace {

std::size_t stride_level(std::size_t stride) {
  std::size_t j = 0;
  for (std::size_t t = 1; t <= kMaxPriorGridStride; t *= 2, ++j) {
    if (t == stride) return j;
  }
  throw InvalidInputError("prior grid stride must be a power of two up to " +
                          std::to_string(kMaxPriorGridStride));
}

}  // namespace

std::span<const double> PriorDensity::log_weighted_density(std::size_t stride) const {
  const std::size_t j = stride_level(stride);
  return j == 0 ? std::span<const double>(state_->log_weighted) : state_->strided[j - 1];
}

double PriorDensity::max_log_weighted_density(std::size_t stride) const {
  return state_->max_log_weighted[stride_level(stride)];
}

double PriorDensity::log_density(double y) const {
  if (!(std::abs(y) <= state_->half_width)) return kNegInf;
  return state_->unnormalized(y) - state_->log_normalizer;
}

double PriorDensity::density(double y) const { return std::exp(log_density(y)); }

double PriorDensity::sample(Engine& engine) const {
  const double u = std::generate_canonical<double, 53>(engine);
  const auto& cdf = state_->cdf;
  const auto& ys = state_->cdf_nodes;
  auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
  if (it == cdf.end()) return ys.back();
  const std::size_t hi = static_cast<std::size_t>(it - cdf.begin());
  const std::size_t lo = hi - 1;
  const double span = cdf[hi] - cdf[lo];
  const double t = span > 0.0 ? (u - cdf[lo]) / span : 0.5;
  return ys[lo] + t * (ys[hi] - ys[lo]);
}

// ---------------------------------------------------------------------------
// ScalarChannelModel

ScalarChannelModel::ScalarChannelModel(PriorDensity prior, NoiseFamily noise)
    : prior_(std::move(prior)), noise_(noise) {
  if (const auto* g = std::get_if<GaussianNoise>(&noise_)) {
    require_finite_positive(g->sigma, "Gaussian noise sigma");
  } else if (const auto* l = std::get_if<LogisticNoise>(&noise_)) {
    require_finite_positive(l->scale, "logistic noise scale");
  }
}

ScalarChannelModel ScalarChannelModel::uniform_gaussian(double half_width, double sigma) {
  return {PriorDensity::uniform(half_width), GaussianNoise{sigma}};
}
ScalarChannelModel ScalarChannelModel::cosine_gaussian(double half_width, double sigma) {
  return {PriorDensity::truncated_cosine(half_width), GaussianNoise{sigma}};
}
ScalarChannelModel ScalarChannelModel::uniform_logistic(double half_width, double scale) {
  return {PriorDensity::uniform(half_width), LogisticNoise{scale}};
}
ScalarChannelModel ScalarChannelModel::uniform_noiseless(double half_width) {
  return {PriorDensity::uniform(half_width), NoiselessChannel{}};
}

std::string ScalarChannelModel::name() const {
  const char* noise = std::visit(
      [](const auto& n) -> const char* {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, GaussianNoise>) return "gaussian";
        else if constexpr (std::is_same_v<T, LogisticNoise>) return "logistic";
        else return "noiseless";
      },
      noise_);
  return prior_.name() + "-" + noise;
}

double ScalarChannelModel::cond_log_density(double u, double y) const {
  return std::visit(
      [&](const auto& n) -> double {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, GaussianNoise>) {
          const double z = (u - y) / n.sigma;
          return -0.5 * z * z - std::log(n.sigma) - 0.5 * std::log(2.0 * std::numbers::pi);
        } else if constexpr (std::is_same_v<T, LogisticNoise>) {
          const double a = std::abs(u - y) / n.scale;
          return -a - 2.0 * log1p_exp_neg(a) - std::log(n.scale);
        } else {
          return u == y ? 0.0 : kNegInf;
        }
      },
      noise_);
}

double ScalarChannelModel::cond_score(double u, double y) const {
  return std::visit(
      [&](const auto& n) -> double {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, GaussianNoise>) {
          return (u - y) / (n.sigma * n.sigma);
        } else if constexpr (std::is_same_v<T, LogisticNoise>) {
          return std::tanh(0.5 * (u - y) / n.scale) / n.scale;
        } else {
          throw DomainError("score undefined for the noiseless channel");
        }
      },
      noise_);
}

double ScalarChannelModel::fisher(double y) const {
  if (!(std::abs(y) <= half_width())) {
    throw DomainError("y=" + std::to_string(y) + " outside the prior support [-A, A]");
  }
  return std::visit(
      [&](const auto& n) -> double {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, GaussianNoise>) {
          return 1.0 / (n.sigma * n.sigma);
        } else if constexpr (std::is_same_v<T, LogisticNoise>) {
          return 1.0 / (3.0 * n.scale * n.scale);
        } else {
          throw DomainError("Fisher information undefined for the noiseless channel");
        }
      },
      noise_);
}

double ScalarChannelModel::log_likelihood(std::span<const double> x, double y) const {
  return std::visit(
      [&](const auto& n) -> double {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, GaussianNoise>) {
          double acc = 0.0;
          for (double u : x) acc += (u - y) * (u - y);
          const double k = static_cast<double>(x.size());
          return -0.5 * acc / (n.sigma * n.sigma) -
                 k * (std::log(n.sigma) + 0.5 * std::log(2.0 * std::numbers::pi));
        } else if constexpr (std::is_same_v<T, LogisticNoise>) {
          const double inv = 1.0 / n.scale;
          double lin = 0.0;
          double soft = 0.0;
          for (double u : x) {
            const double a = std::abs(u - y) * inv;
            lin += a;
            soft += log1p_exp_neg(a);
          }
          return -lin - 2.0 * soft - static_cast<double>(x.size()) * std::log(n.scale);
        } else {
          for (double u : x) {
            if (u != y) return kNegInf;
          }
          return 0.0;
        }
      },
      noise_);
}

void ScalarChannelModel::sample_observations(double y, std::span<double> out,
                                             Engine& engine) const {
  std::visit(
      [&](const auto& n) {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, GaussianNoise>) {
          std::normal_distribution<double> gauss(0.0, n.sigma);
          for (double& v : out) v = y + gauss(engine);
        } else if constexpr (std::is_same_v<T, LogisticNoise>) {
          for (double& v : out) {
            double u = 0.0;
            do {
              u = std::generate_canonical<double, 53>(engine);
            } while (u <= 0.0);
            v = y + n.scale * std::log(u / (1.0 - u));
          }
        } else {
          for (double& v : out) v = y;
        }
      },
      noise_);
}

double ScalarChannelModel::expected_inv_sqrt_fisher() const {
  return prior_.expect([this](double y) { return 1.0 / std::sqrt(fisher(y)); });
}

double ScalarChannelModel::expected_inv_fisher() const {
  return prior_.expect([this](double y) { return 1.0 / fisher(y); });
}

// ---------------------------------------------------------------------------
// Posterior mean

namespace {

struct PosteriorScratch {
  std::vector<double> logv;
  std::vector<double> up;
  std::vector<double> down;
  // e^{-y/2s} and e^{y/2s} on the posterior grid for the last (grid, s) seen.
  const double* node_key = nullptr;
  double inv2s_key = 0.0;
  std::vector<double> node_w;
  std::vector<double> node_wi;
  std::vector<double> refined;
};

PosteriorScratch& scratch() {
  thread_local PosteriorScratch s;
  return s;
}

[[noreturn]] void throw_degenerate(std::span<const double> x) {
  throw NumericalDegeneracyError("posterior normalizer vanished for x=" + format_vector(x));
}

// Evaluates the unnormalized log posterior on the nodes it can matter on.
// Nodes left at -inf carry less than exp(-kLogCut) relative mass. Assumes the
// summed log-likelihood is unimodal in y (true for the log-concave families
// shipped here): a coarse scan locates the peak region and the window is grown
// outwards until the log posterior has fallen by kLogCut on both sides.
double windowed_log_posterior(const ScalarChannelModel& model, std::span<const double> x,
                              std::vector<double>& logv) {
  const auto& grid = model.prior().grid();
  const auto base = model.prior().log_weighted_density();
  const std::size_t m = grid.size();
  const std::size_t intervals = (m - 1) / kCoarseStride;
  // Logistic fast path: log p(u|y) = -2 log(2 cosh((u - y) / (2s))) - log s,
  // and 2 cosh((u - y) / (2s)) = e^{u/2s} e^{-y/2s} + e^{-u/2s} e^{y/2s}, so
  // with the per-observation exponentials cached each node costs n
  // multiply-adds. Products run in 4 lanes renormalized every 4 factors; with
  // every factor below e^40 a lane stays below e^160.
  const auto* logistic = std::get_if<LogisticNoise>(&model.noise());
  bool fast = false;
  double inv2s = 0.0;
  double const_term = 0.0;
  auto& s = scratch();
  if (logistic != nullptr) {
    inv2s = 0.5 / logistic->scale;
    double xmax = 0.0;
    for (double v : x) xmax = std::max(xmax, std::abs(v));
    fast = (xmax + model.half_width()) * inv2s < 40.0;
    if (fast) {
      s.up.resize(x.size());
      s.down.resize(x.size());
      for (std::size_t i = 0; i < x.size(); ++i) {
        s.up[i] = std::exp(x[i] * inv2s);
        s.down[i] = 1.0 / s.up[i];
      }
      const_term = -static_cast<double>(x.size()) * std::log(logistic->scale);
      if (s.node_key != grid.nodes().data() || s.inv2s_key != inv2s) {
        s.node_w.resize(m);
        s.node_wi.resize(m);
        for (std::size_t i = 0; i < m; ++i) {
          s.node_w[i] = std::exp(-grid.nodes()[i] * inv2s);
          s.node_wi[i] = std::exp(grid.nodes()[i] * inv2s);
        }
        s.node_key = grid.nodes().data();
        s.inv2s_key = inv2s;
      }
    }
  }
  auto loglik = [&](std::size_t node) {
    if (!fast) return model.log_likelihood(x, grid.nodes()[node]);
    const double w = s.node_w[node];
    const double wi = s.node_wi[node];
    const double* up = s.up.data();
    const double* down = s.down.data();
    const std::size_t n = x.size();
    double lane[4] = {1.0, 1.0, 1.0, 1.0};
    long exponent = 0;
    std::size_t i = 0;
    while (i + 16 <= n) {
      for (std::size_t r = 0; r < 4; ++r, i += 4) {
        for (std::size_t l = 0; l < 4; ++l) lane[l] *= up[i + l] * w + down[i + l] * wi;
      }
      for (double& v : lane) {
        int e = 0;
        v = std::frexp(v, &e);
        exponent += e;
      }
    }
    // At most 15 more factors: below e^600.
    for (; i < n; ++i) lane[0] *= up[i] * w + down[i] * wi;
    const double sum = std::log(lane[0] * lane[1] * lane[2] * lane[3]) +
                       static_cast<double>(exponent) * std::numbers::ln2;
    return const_term - 2.0 * sum;
  };
  auto eval = [&](std::size_t i) {
    if (logv[i] == kNegInf && std::isfinite(base[i])) {
      logv[i] = base[i] + loglik(i);
      if (std::isnan(logv[i])) logv[i] = kNegInf;
    }
    return logv[i];
  };
  std::fill(logv.begin(), logv.end(), kNegInf);

  double coarse_max = kNegInf;
  std::size_t peak = 0;
  for (std::size_t c = 0; c <= intervals; ++c) {
    const double v = eval(c * kCoarseStride);
    if (v > coarse_max) {
      coarse_max = v;
      peak = c;
    }
  }
  if (!std::isfinite(coarse_max)) {
    // Likelihood may be too narrow for the coarse scan to see; fall back to
    // every node.
    for (std::size_t i = 0; i < m; ++i) eval(i);
    return *std::max_element(logv.begin(), logv.end());
  }

  // Coarse intervals [c, c+1] to refine: every interval touching a coarse
  // node within kLogCut of the coarse peak, plus the peak's neighbours.
  std::size_t first = peak == 0 ? 0 : peak - 1;
  std::size_t last = std::min(peak, intervals - 1);
  for (std::size_t c = 0; c <= intervals; ++c) {
    if (logv[c * kCoarseStride] >= coarse_max - kLogCut) {
      first = std::min(first, c == 0 ? 0 : c - 1);
      last = std::max(last, std::min(c, intervals - 1));
    }
  }
  double peak_value = coarse_max;
  auto refine = [&](std::size_t c) {
    for (std::size_t i = c * kCoarseStride; i <= (c + 1) * kCoarseStride; ++i) {
      peak_value = std::max(peak_value, eval(i));
    }
  };
  for (std::size_t c = first; c <= last; ++c) refine(c);
  // Grow until both window edges sit kLogCut below the refined peak.
  while (first > 0 && logv[first * kCoarseStride] >= peak_value - kLogCut) refine(--first);
  while (last + 1 < intervals && logv[(last + 1) * kCoarseStride] >= peak_value - kLogCut) {
    refine(++last);
  }
  return peak_value;
}

// Posterior mean over [lo, hi] on a local Simpson grid, for posteriors too
// narrow for the fixed grid (e.g. piled against a support edge).
double refined_posterior_mean(const ScalarChannelModel& model, std::span<const double> x,
                              double lo, double hi) {
  const auto* g = std::get_if<GaussianNoise>(&model.noise());
  double xbar = 0.0;
  for (double v : x) xbar += v;
  xbar /= static_cast<double>(x.size());
  const double scale = g ? 0.5 * static_cast<double>(x.size()) / (g->sigma * g->sigma) : 0.0;
  const SimpsonGrid local(lo, hi, kRefineNodes);
  const auto nodes = local.nodes();
  auto& logv = scratch().refined;
  logv.resize(kRefineNodes);
  double peak = kNegInf;
  for (std::size_t i = 0; i < kRefineNodes; ++i) {
    const double y = nodes[i];
    const double ll = g ? -scale * (xbar - y) * (xbar - y) : model.log_likelihood(x, y);
    const double v = local.log_weights()[i] + model.prior().log_density(y) + ll;
    logv[i] = std::isnan(v) ? kNegInf : v;
    peak = std::max(peak, logv[i]);
  }
  if (!std::isfinite(peak)) throw_degenerate(x);
  double num = 0.0;
  double den = 0.0;
  for (std::size_t i = 0; i < kRefineNodes; ++i) {
    const double w = std::exp(logv[i] - peak);
    den += w;
    num += w * nodes[i];
  }
  if (!(den > 0.0) || !std::isfinite(num)) throw_degenerate(x);
  return std::clamp(num / den, -model.half_width(), model.half_width());
}

}  // namespace

double posterior_mean_scalar(const ScalarChannelModel& model, std::span<const double> x) {
  if (x.empty()) throw InvalidInputError("posterior mean needs at least one observation");
  for (double v : x) {
    if (!std::isfinite(v)) throw InvalidInputError("non-finite observation in x=" + format_vector(x));
  }
  const double a = model.half_width();

  if (model.is_noiseless()) {
    for (double v : x) {
      if (v != x[0] || std::abs(v) > a) throw_degenerate(x);
    }
    return x[0];
  }

  const auto& grid = model.prior().grid();
  const auto full_nodes = grid.nodes();
  auto& s = scratch();

  // Nodes y = full_nodes[i * stride] for i in [lo, hi); others are treated as
  // far below the peak.
  std::size_t stride = 1;
  std::size_t lo = 0;
  std::size_t hi = grid.size();
  double peak = kNegInf;
  if (const auto* g = std::get_if<GaussianNoise>(&model.noise())) {
    // Sufficient statistic: sum_i log phi((x_i - y)/sigma) = -n (xbar - y)^2 / (2 sigma^2) + const.
    double xbar = 0.0;
    for (double v : x) xbar += v;
    xbar /= static_cast<double>(x.size());
    const double scale = 0.5 * static_cast<double>(x.size()) / (g->sigma * g->sigma);
    const double sd = g->sigma / std::sqrt(static_cast<double>(x.size()));
    // Wide posteriors: a coarser Simpson subgrid with step <= sd / 32.
    while (stride < kMaxPriorGridStride &&
           64.0 * static_cast<double>(stride) * grid.step() <= sd) {
      stride *= 2;
    }
    const auto base = model.prior().log_weighted_density(stride);
    const std::size_t m = base.size();
    const double hs = grid.step() * static_cast<double>(stride);
    // Narrow posteriors: every node farther than `reach` from xbar is more than
    // kLogCut below the node nearest clamp(xbar), hence below the peak.
    const double yc = std::clamp(xbar, -a, a);
    auto ic = static_cast<std::size_t>(std::lround((yc + a) / hs));
    if (!std::isfinite(base[ic]) && m > 2) ic = std::clamp<std::size_t>(ic, 1, m - 2);
    const double dc = xbar - full_nodes[ic * stride];
    const double reach2 =
        (model.prior().max_log_weighted_density(stride) - base[ic] + kLogCut) / scale + dc * dc;
    if (std::isfinite(reach2)) {
      const double reach = std::sqrt(reach2);
      lo = static_cast<std::size_t>(std::max(0.0, std::floor((xbar - reach + a) / hs)));
      hi = static_cast<std::size_t>(
          std::clamp(std::ceil((xbar + reach + a) / hs) + 1.0, 0.0, static_cast<double>(m)));
      lo = std::min(lo, ic);
      hi = std::max(hi, ic + 1);
    } else {
      hi = m;
    }
    s.logv.resize(m);
    for (std::size_t i = lo; i < hi; ++i) {
      const double d = xbar - full_nodes[i * stride];
      const double v = base[i] - scale * d * d;
      s.logv[i] = std::isnan(v) ? kNegInf : v;
      peak = std::max(peak, s.logv[i]);
    }
  } else {
    s.logv.resize(grid.size());
    peak = windowed_log_posterior(model, x, s.logv);
  }
  if (!std::isfinite(peak)) throw_degenerate(x);

  const std::size_t m = s.logv.size();
  std::size_t first = m;
  std::size_t last = 0;
  double num = 0.0;
  double den = 0.0;
  for (std::size_t i = lo; i < hi; ++i) {
    const double d = s.logv[i] - peak;
    if (d < -kLogCut) continue;
    first = std::min(first, i);
    last = i;
    const double w = std::exp(d);
    den += w;
    num += w * full_nodes[i * stride];
  }
  if (!(den > 0.0) || !std::isfinite(den) || !std::isfinite(num)) throw_degenerate(x);
  if ((last - first) * stride >= kSharpWindowNodes) return std::clamp(num / den, -a, a);
  return refined_posterior_mean(model, x, full_nodes[(first == 0 ? 0 : first - 1) * stride],
                                full_nodes[std::min(last + 1, m - 1) * stride]);
}

ScalarDraw sample_joint(const ScalarChannelModel& model, std::size_t n, Engine& engine) {
  if (n == 0) throw InvalidInputError("sample_joint needs n >= 1");
  ScalarDraw d;
  d.y = model.prior().sample(engine);
  d.x.resize(n);
  model.sample_observations(d.y, d.x, engine);
  return d;
}

double fisher_info(const ScalarChannelModel& model, double y) { return model.fisher(y); }

VectorJointModel joint_model(const ScalarChannelModel& model, std::size_t n_obs) {
  if (n_obs == 0) throw InvalidInputError("scalar channel needs n_obs >= 1");
  VectorJointModel j;
  j.name = model.name();
  j.n = n_obs;
  j.p = 1;
  j.sampler = [model, n_obs](Engine& engine, Vector& x, Vector& y) {
    y.resize(1);
    x.resize(static_cast<Eigen::Index>(n_obs));
    y[0] = model.prior().sample(engine);
    model.sample_observations(y[0], std::span<double>(x.data(), n_obs), engine);
  };
  j.regression = [model](const Vector& x) {
    Vector eta(1);
    eta[0] = posterior_mean_scalar(
        model, std::span<const double>(x.data(), static_cast<std::size_t>(x.size())));
    return eta;
  };
  return j;
}

// ---------------------------------------------------------------------------
// LinearGaussianModel

namespace {

Matrix cholesky_factor(const Matrix& m, const char* what) {
  if (m.rows() != m.cols() || m.rows() == 0) {
    throw InvalidInputError(std::string(what) + " must be a nonempty square matrix");
  }
  if (!m.isApprox(m.transpose(), 1e-12)) {
    throw InvalidInputError(std::string(what) + " must be symmetric");
  }
  Eigen::LLT<Matrix> llt(m);
  if (llt.info() != Eigen::Success) {
    throw LinearAlgebraError(std::string(what) + " is not positive definite");
  }
  return llt.matrixL();
}

}  // namespace

LinearGaussianModel::LinearGaussianModel(Matrix sigma_y, Matrix h, Matrix sigma_w)
    : sigma_y_(std::move(sigma_y)), h_(std::move(h)), sigma_w_(std::move(sigma_w)) {
  chol_y_ = cholesky_factor(sigma_y_, "Sigma_Y");
  chol_w_ = cholesky_factor(sigma_w_, "Sigma_W");
  if (h_.cols() != sigma_y_.rows() || h_.rows() != sigma_w_.rows()) {
    throw InvalidInputError("channel matrix H must be n x p with n = dim(Sigma_W), p = dim(Sigma_Y)");
  }
  const Matrix cov_x = h_ * sigma_y_ * h_.transpose() + sigma_w_;
  Eigen::LDLT<Matrix> ldlt(cov_x);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive() ||
      ldlt.vectorD().minCoeff() <= 1e-300) {
    throw LinearAlgebraError("H Sigma_Y H^T + Sigma_W is singular");
  }
  // A = Sigma_Y H^T Cov_X^{-1}  <=>  A^T = Cov_X^{-1} H Sigma_Y.
  a_ = ldlt.solve(h_ * sigma_y_).transpose();
  eta_cov_ = a_ * cov_x * a_.transpose();
  eta_cov_ = 0.5 * (eta_cov_ + eta_cov_.transpose());
}

LinearGaussianModel LinearGaussianModel::scalar(double var_y, double gain, double var_w) {
  return {Matrix::Constant(1, 1, var_y), Matrix::Constant(1, 1, gain),
          Matrix::Constant(1, 1, var_w)};
}

LinearGaussianModel LinearGaussianModel::isotropic(std::size_t p, double noise_var) {
  const auto d = static_cast<Eigen::Index>(p);
  return {Matrix::Identity(d, d), Matrix::Identity(d, d), noise_var * Matrix::Identity(d, d)};
}

double LinearGaussianModel::closed_form_mmse() const {
  const double v = (sigma_y_ - a_ * h_ * sigma_y_).trace();
  return std::max(0.0, v);
}

KnownMoments LinearGaussianModel::known_moments() const {
  KnownMoments km;
  const double tr = eta_cov_.trace();
  km.mean_sq_norm = tr;
  km.mean_fourth_norm = tr * tr + 2.0 * (eta_cov_ * eta_cov_).trace();
  // E||eta|| in closed form only for isotropic covariance (scaled chi law).
  const auto d = static_cast<double>(p());
  const double s2 = tr / d;
  if ((eta_cov_ - s2 * Matrix::Identity(eta_cov_.rows(), eta_cov_.cols())).norm() <=
      1e-12 * std::max(1.0, tr)) {
    km.mean_norm = std::sqrt(2.0 * s2) * std::exp(std::lgamma(0.5 * (d + 1.0)) - std::lgamma(0.5 * d));
  }
  return km;
}

double LinearGaussianModel::subgaussian_v() const {
  Eigen::SelfAdjointEigenSolver<Matrix> es(eta_cov_);
  return es.eigenvalues().maxCoeff();
}

std::size_t LinearGaussianModel::rank() const {
  Eigen::ColPivHouseholderQR<Matrix> qr(a_);
  qr.setThreshold(1e-10);
  return static_cast<std::size_t>(qr.rank());
}

VectorJointModel LinearGaussianModel::to_joint(std::string name) const {
  VectorJointModel j;
  j.name = std::move(name);
  j.n = n();
  j.p = p();
  j.sampler = [ly = chol_y_, lw = chol_w_, h = h_](Engine& engine, Vector& x, Vector& y) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    Vector z(ly.rows());
    for (auto& v : z) v = gauss(engine);
    y = ly * z;
    Vector w(lw.rows());
    for (auto& v : w) v = gauss(engine);
    x = h * y + lw * w;
  };
  j.regression = [a = a_](const Vector& x) -> Vector { return a * x; };
  j.moments = known_moments();
  j.subgaussian_v = subgaussian_v();
  j.closed_form_mmse = closed_form_mmse();
  j.intrinsic_dim = rank();
  return j;
}

double closed_form_mmse(const LinearGaussianModel& model) { return model.closed_form_mmse(); }

// ---------------------------------------------------------------------------
// Moment report

MomentReport moment_report(const VectorJointModel& model, std::size_t N, std::uint64_t seed) {
  if (N < 1000) throw InvalidInputError("moment_report needs N >= 1000, got " + std::to_string(N));
  Engine engine = make_engine(seed, 0x6d6f6d);
  RunningMoments m1, m2, m4, y4;
  std::vector<double> norms;
  norms.reserve(N);
  Vector x, y;
  for (std::size_t i = 0; i < N; ++i) {
    model.sample(engine, x, y);
    const double r = model.eta(x).norm();
    norms.push_back(r);
    m1.add(r);
    m2.add(r * r);
    m4.add(r * r * r * r);
    const double ry2 = y.squaredNorm();
    y4.add(ry2 * ry2);
  }
  MomentReport rep;
  rep.samples = N;
  rep.mean_norm = m1.estimate();
  rep.mean_sq_norm = m2.estimate();
  rep.mean_fourth_norm = m4.estimate();
  rep.mean_fourth_norm_y = y4.estimate();
  if (model.subgaussian_v) {
    rep.subgaussian_v = *model.subgaussian_v;
  } else {
    const double mean = m1.mean();
    double best = 0.0;
    for (double lambda : {-2.0, -1.0, -0.5, -0.25, 0.25, 0.5, 1.0, 2.0}) {
      std::vector<double> t(norms.size());
      for (std::size_t i = 0; i < norms.size(); ++i) t[i] = lambda * (norms[i] - mean);
      const double log_mgf = log_sum_exp(t) - std::log(static_cast<double>(norms.size()));
      best = std::max(best, 2.0 * log_mgf / (lambda * lambda));
    }
    rep.subgaussian_v = best;
    rep.v_approximate = true;
  }
  return rep;
}

}  // namespace mmseq
