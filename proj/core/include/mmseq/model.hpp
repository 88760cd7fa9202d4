#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "mmseq/quadrature.hpp"
#include "mmseq/rng.hpp"
#include "mmseq/stats.hpp"

namespace mmseq {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// Node count of the fixed posterior quadrature grid on [-A, A].
inline constexpr std::size_t kPosteriorGridNodes = 4097;
inline constexpr std::size_t kMaxPriorGridStride = 16;
// Node count of the cached inverse-CDF table used for prior sampling.
inline constexpr std::size_t kInverseCdfNodes = (std::size_t{1} << 16) + 1;

// Density f_Y supported on [-A, A]. Built from an unnormalized log-density,
// normalized by Simpson quadrature, and immutable afterwards (copies share
// the cached tables).
class PriorDensity {
 public:
  using LogDensityFn = std::function<double(double)>;

  PriorDensity(std::string name, double half_width, LogDensityFn unnormalized_log_density,
               double log_lipschitz);

  static PriorDensity uniform(double half_width);
  // f_Y(y) proportional to cos(pi y / (4A)); strictly positive on [-A, A] with
  // log-Lipschitz constant pi / (4A).
  static PriorDensity truncated_cosine(double half_width);

  const std::string& name() const noexcept;
  double half_width() const noexcept;
  double log_lipschitz() const noexcept;

  // Normalized log f_Y; -inf outside [-A, A].
  double log_density(double y) const;
  double density(double y) const;

  double sample(Engine& engine) const;

  const SimpsonGrid& grid() const noexcept;
  // log(Simpson weight) + log f_Y at each node of grid().
  std::span<const double> log_weighted_density() const noexcept;
  // Same on the subgrid of every stride-th node (Simpson weights of that
  // subgrid); stride is a power of two up to kMaxPriorGridStride.
  std::span<const double> log_weighted_density(std::size_t stride) const;
  // Largest entry of log_weighted_density(stride).
  double max_log_weighted_density(std::size_t stride) const;

  // Integral of f_Y * g over [-A, A] on the posterior grid.
  template <class G>
  double expect(G&& g) const {
    const auto& gr = grid();
    const auto lw = log_weighted_density();
    double acc = 0.0;
    for (std::size_t i = 0; i < gr.size(); ++i) {
      if (std::isfinite(lw[i])) acc += std::exp(lw[i]) * g(gr.nodes()[i]);
    }
    return acc;
  }

 private:
  struct State;
  std::shared_ptr<const State> state_;
};

struct GaussianNoise {
  double sigma = 1.0;
};

// Location family with density exp(-z) / (s (1 + exp(-z))^2), z = (u - y) / s.
struct LogisticNoise {
  double scale = 1.0;
};

// X_i = Y exactly.
struct NoiselessChannel {};

using NoiseFamily = std::variant<GaussianNoise, LogisticNoise, NoiselessChannel>;

// Scalar Y on [-A, A] observed through n conditionally i.i.d. X_i.
class ScalarChannelModel {
 public:
  ScalarChannelModel(PriorDensity prior, NoiseFamily noise);

  static ScalarChannelModel uniform_gaussian(double half_width, double sigma);
  static ScalarChannelModel cosine_gaussian(double half_width, double sigma);
  static ScalarChannelModel uniform_logistic(double half_width, double scale);
  static ScalarChannelModel uniform_noiseless(double half_width);

  const PriorDensity& prior() const noexcept { return prior_; }
  const NoiseFamily& noise() const noexcept { return noise_; }
  double half_width() const noexcept { return prior_.half_width(); }
  std::string name() const;

  bool is_noiseless() const noexcept {
    return std::holds_alternative<NoiselessChannel>(noise_);
  }

  // log dP_{X1|Y=y}/du at u.
  double cond_log_density(double u, double y) const;
  // d/dy of cond_log_density.
  double cond_score(double u, double y) const;
  // I(y); throws DomainError outside [-A, A] or for the noiseless channel.
  double fisher(double y) const;
  // Sum over i of cond_log_density(x_i, y).
  double log_likelihood(std::span<const double> x, double y) const;

  void sample_observations(double y, std::span<double> out, Engine& engine) const;

  // E[I(Y)^{-1/2}] and E[1/I(Y)] under f_Y, by the posterior-grid quadrature.
  double expected_inv_sqrt_fisher() const;
  double expected_inv_fisher() const;

 private:
  PriorDensity prior_;
  NoiseFamily noise_;
};

struct ScalarDraw {
  std::vector<double> x;
  double y = 0.0;
};

// E[Y | X = x]: Simpson quadrature on the fixed 4097-node grid with
// log-sum-exp normalization. Throws InvalidInputError for empty or non-finite
// x, NumericalDegeneracyError if the posterior normalizer vanishes.
double posterior_mean_scalar(const ScalarChannelModel& model, std::span<const double> x);

ScalarDraw sample_joint(const ScalarChannelModel& model, std::size_t n, Engine& engine);

double fisher_info(const ScalarChannelModel& model, double y);

// Moments of ||eta(X)|| that a model may know in closed form.
struct KnownMoments {
  std::optional<double> mean_norm;
  std::optional<double> mean_sq_norm;
  std::optional<double> mean_fourth_norm;
};

// Joint law of (X in R^n, Y in R^p) with a regression oracle eta(x) = E[Y|X=x].
struct VectorJointModel {
  using Sampler = std::function<void(Engine&, Vector& x, Vector& y)>;
  using Regression = std::function<Vector(const Vector& x)>;

  std::string name;
  std::size_t n = 0;
  std::size_t p = 0;
  Sampler sampler;
  Regression regression;
  KnownMoments moments;
  std::optional<double> subgaussian_v;
  std::optional<double> closed_form_mmse;
  // Dimension of the support of eta(X) when known to be smaller than p
  // (e.g. rank of a linear regression matrix).
  std::optional<std::size_t> intrinsic_dim;

  void sample(Engine& engine, Vector& x, Vector& y) const { sampler(engine, x, y); }
  Vector eta(const Vector& x) const { return regression(x); }
  std::size_t effective_dim() const noexcept { return intrinsic_dim.value_or(p); }
};

// The scalar channel with n_obs observations seen as a joint (X, Y) source
// whose regression oracle is posterior_mean_scalar.
VectorJointModel joint_model(const ScalarChannelModel& model, std::size_t n_obs);

// Y ~ N(0, Sigma_Y), X = H Y + W, W ~ N(0, Sigma_W).
class LinearGaussianModel {
 public:
  LinearGaussianModel(Matrix sigma_y, Matrix h, Matrix sigma_w);

  static LinearGaussianModel scalar(double var_y, double gain, double var_w);
  // Sigma_Y = I_p, H = I_p, Sigma_W = noise_var * I_p.
  static LinearGaussianModel isotropic(std::size_t p, double noise_var);

  std::size_t p() const noexcept { return static_cast<std::size_t>(sigma_y_.rows()); }
  std::size_t n() const noexcept { return static_cast<std::size_t>(h_.rows()); }

  const Matrix& sigma_y() const noexcept { return sigma_y_; }
  const Matrix& channel() const noexcept { return h_; }
  const Matrix& sigma_w() const noexcept { return sigma_w_; }

  // A = Sigma_Y H^T (H Sigma_Y H^T + Sigma_W)^{-1}; eta(x) = A x.
  const Matrix& regression_matrix() const noexcept { return a_; }
  // Cov(eta(X)) = A (H Sigma_Y H^T + Sigma_W) A^T.
  const Matrix& eta_covariance() const noexcept { return eta_cov_; }

  double closed_form_mmse() const;
  KnownMoments known_moments() const;
  // Largest eigenvalue of Cov(eta(X)): the Euclidean norm is 1-Lipschitz, so
  // Gaussian concentration gives this variance proxy for ||eta(X)||.
  double subgaussian_v() const;
  std::size_t rank() const;

  VectorJointModel to_joint(std::string name = "linear-gaussian") const;

 private:
  Matrix sigma_y_;
  Matrix h_;
  Matrix sigma_w_;
  Matrix a_;
  Matrix eta_cov_;
  Matrix chol_y_;
  Matrix chol_w_;
};

double closed_form_mmse(const LinearGaussianModel& model);

struct MomentReport {
  std::size_t samples = 0;
  Estimate mean_norm;         // E||eta||
  Estimate mean_sq_norm;      // E||eta||^2
  Estimate mean_fourth_norm;  // E||eta||^4
  Estimate mean_fourth_norm_y;  // E||Y||^4 (Jensen upper bound for the above)
  double subgaussian_v = 0.0;
  bool v_approximate = false;
};

// Empirical moments of ||eta(X)|| from N >= 1000 draws. When the model does
// not declare v, an empirical proxy max_lambda 2 log M(lambda) / lambda^2 over
// lambda in {+-0.25, +-0.5, +-1, +-2} is reported and flagged approximate.
MomentReport moment_report(const VectorJointModel& model, std::size_t N, std::uint64_t seed);

}  // namespace mmseq
