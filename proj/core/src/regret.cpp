#include "mmseq/regret.hpp"

#include <algorithm>
#include <json.hpp>
#include <limits>
#include <spdlog/spdlog.h>
#include <string>
#include <vector>

#include "mmseq/chunked.hpp"
#include "mmseq/errors.hpp"

namespace mmseq {
namespace {

constexpr std::uint64_t kStreamSingle = 0;
constexpr std::uint64_t kStreamFit = 1;
constexpr std::uint64_t kStreamEval = 2;

void validate(const VectorJointModel& model, const McOptions& opts) {
  if (!model.sampler || !model.regression) {
    throw InvalidInputError("joint model '" + model.name + "' has no sampler or regression");
  }
  if (model.p == 0) throw InvalidInputError("joint model '" + model.name + "' has p = 0");
  if (opts.N < 1000) throw InvalidInputError("sample size N must be >= 1000");
  if (opts.chunks == 0) throw InvalidInputError("chunk count must be >= 1");
}

std::size_t effective_chunks(const McOptions& opts) { return std::min(opts.chunks, opts.N); }

std::size_t checked_cell(const CellIndexFn& cell, const Vector& x, const Vector& eta,
                         std::size_t m) {
  const std::size_t j = cell(x, eta);
  if (j >= m) {
    throw InvalidInputError("cell index " + std::to_string(j) + " out of range for " +
                            std::to_string(m) + " cells");
  }
  return j;
}

struct FitPartial {
  Matrix sum_y;    // p x m
  Matrix sum_eta;  // p x m
  std::vector<std::uint64_t> counts;
};

struct CellMeans {
  Matrix y;    // p x m
  Matrix eta;  // p x m
  std::size_t empty = 0;
  std::size_t occupied = 0;
};

CellMeans fit_cell_means(const VectorJointModel& model, const CellIndexFn& cell, std::size_t m,
                         const McOptions& opts, const Matrix* empty_fill) {
  const std::size_t chunks = effective_chunks(opts);
  const auto p = static_cast<Eigen::Index>(model.p);
  const auto mi = static_cast<Eigen::Index>(m);
  std::vector<FitPartial> partials(chunks);
  run_chunks(chunks, opts.threads, [&](std::size_t c) {
    FitPartial& part = partials[c];
    part.sum_y = Matrix::Zero(p, mi);
    part.sum_eta = Matrix::Zero(p, mi);
    part.counts.assign(m, 0);
    Engine engine = make_engine(opts.seed, kStreamFit, c);
    Vector x;
    Vector y;
    const std::size_t size = chunk_size(opts.N, chunks, c);
    for (std::size_t i = 0; i < size; ++i) {
      model.sample(engine, x, y);
      const Vector eta = model.eta(x);
      const std::size_t j = checked_cell(cell, x, eta, m);
      const auto jj = static_cast<Eigen::Index>(j);
      part.sum_y.col(jj) += y;
      part.sum_eta.col(jj) += eta;
      ++part.counts[j];
    }
  });

  Matrix sum_y = Matrix::Zero(p, mi);
  Matrix sum_eta = Matrix::Zero(p, mi);
  std::vector<std::uint64_t> counts(m, 0);
  for (const auto& part : partials) {
    sum_y += part.sum_y;
    sum_eta += part.sum_eta;
    for (std::size_t j = 0; j < m; ++j) counts[j] += part.counts[j];
  }
  const double total = static_cast<double>(opts.N);
  const Vector mean_y = sum_y.rowwise().sum() / total;
  const Vector mean_eta = sum_eta.rowwise().sum() / total;

  CellMeans out;
  out.y.resize(p, mi);
  out.eta.resize(p, mi);
  for (std::size_t j = 0; j < m; ++j) {
    const auto jj = static_cast<Eigen::Index>(j);
    if (counts[j] == 0) {
      ++out.empty;
      if (empty_fill && !empty_fill->col(jj).hasNaN()) {
        out.y.col(jj) = empty_fill->col(jj);
        out.eta.col(jj) = empty_fill->col(jj);
      } else {
        out.y.col(jj) = mean_y;
        out.eta.col(jj) = mean_eta;
      }
    } else {
      ++out.occupied;
      const double cnt = static_cast<double>(counts[j]);
      out.y.col(jj) = sum_y.col(jj) / cnt;
      out.eta.col(jj) = sum_eta.col(jj) / cnt;
    }
  }
  if (m > 1 && out.occupied == 1) {
    spdlog::warn("{}: all {} fitting samples fell in a single cell of {}", model.name, opts.N, m);
  }
  if (out.empty > 0) {
    spdlog::debug("{}: {} of {} cells empty in the fitting pass", model.name, out.empty, m);
  }
  return out;
}

struct EvalPartial {
  RunningMoments mmse;
  RunningMoments mmse_k;
  RunningMoments regret;
  RunningMoments paired;
  RunningMoments gap;
};

EvalPartial evaluate(const VectorJointModel& model, const CellIndexFn& cell, std::size_t m,
                     const CellMeans& means, const McOptions& opts, const YErrorFn& y_error) {
  const std::size_t chunks = effective_chunks(opts);
  std::vector<EvalPartial> partials(chunks);
  run_chunks(chunks, opts.threads, [&](std::size_t c) {
    EvalPartial& part = partials[c];
    Engine engine = make_engine(opts.seed, kStreamEval, c);
    Vector x;
    Vector y;
    const std::size_t size = chunk_size(opts.N, chunks, c);
    for (std::size_t i = 0; i < size; ++i) {
      model.sample(engine, x, y);
      const Vector eta = model.eta(x);
      const auto j = static_cast<Eigen::Index>(checked_cell(cell, x, eta, m));
      const double e_mmse = (y - eta).squaredNorm();
      const double e_k = (y - means.y.col(j)).squaredNorm();
      const double e_reg = (eta - means.eta.col(j)).squaredNorm();
      part.mmse.add(e_mmse);
      part.mmse_k.add(e_k);
      part.regret.add(e_reg);
      part.paired.add(e_k - e_mmse - e_reg);
      if (y_error) part.gap.add(e_reg - y_error(y));
    }
  });
  EvalPartial total;
  for (const auto& part : partials) {
    total.mmse.merge(part.mmse);
    total.mmse_k.merge(part.mmse_k);
    total.regret.merge(part.regret);
    total.paired.merge(part.paired);
    total.gap.merge(part.gap);
  }
  return total;
}

}  // namespace

CellIndexFn eta_cell_fn(const Codebook& codebook) {
  return [codebook](const Vector&, const Vector& eta) {
    return quantize_nn(codebook, std::span<const double>(eta.data(), eta.size()));
  };
}

CellIndexFn covering_cell_fn(const CoveringQuantizer& cq) {
  return [cq](const Vector&, const Vector& eta) {
    return covering_quantize(cq, std::span<const double>(eta.data(), eta.size()));
  };
}

Matrix eta_cell_fill(const Codebook& codebook) {
  const auto p = static_cast<Eigen::Index>(codebook.dim());
  Matrix fill(p, static_cast<Eigen::Index>(codebook.size()));
  for (std::size_t j = 0; j < codebook.size(); ++j) {
    const auto c = codebook.point(j);
    for (Eigen::Index i = 0; i < p; ++i) fill(i, static_cast<Eigen::Index>(j)) = c[i];
  }
  return fill;
}

Matrix covering_cell_fill(const CoveringQuantizer& cq) {
  const Matrix centers = eta_cell_fill(cq.centers());
  Matrix fill(centers.rows(), centers.cols() + 1);
  fill.leftCols(centers.cols()) = centers;
  fill.col(centers.cols()).setConstant(std::numeric_limits<double>::quiet_NaN());
  return fill;
}

Estimate estimate_mmse(const VectorJointModel& model, const McOptions& opts) {
  validate(model, opts);
  const std::size_t chunks = effective_chunks(opts);
  std::vector<RunningMoments> partials(chunks);
  run_chunks(chunks, opts.threads, [&](std::size_t c) {
    Engine engine = make_engine(opts.seed, kStreamSingle, c);
    Vector x;
    Vector y;
    const std::size_t size = chunk_size(opts.N, chunks, c);
    for (std::size_t i = 0; i < size; ++i) {
      model.sample(engine, x, y);
      partials[c].add((y - model.eta(x)).squaredNorm());
    }
  });
  RunningMoments total;
  for (const auto& part : partials) total.merge(part);
  return total.estimate();
}

RegretEstimate estimate_decomposition(const VectorJointModel& model, const CellIndexFn& cell,
                                      std::size_t m, const McOptions& opts,
                                      const Matrix* empty_fill, const YErrorFn& y_error) {
  validate(model, opts);
  if (m == 0) throw InvalidInputError("cell count must be >= 1");
  if (!cell) throw InvalidInputError("cell function is empty");
  if (empty_fill && (empty_fill->rows() != static_cast<Eigen::Index>(model.p) ||
                     empty_fill->cols() != static_cast<Eigen::Index>(m))) {
    throw InvalidInputError("empty-cell fill must be p x m");
  }
  const CellMeans means = fit_cell_means(model, cell, m, opts, empty_fill);
  const EvalPartial eval = evaluate(model, cell, m, means, opts, y_error);

  RegretEstimate out;
  out.mmse = eval.mmse.estimate();
  out.mmse_k = eval.mmse_k.estimate();
  out.regret_direct = eval.regret.estimate();
  out.regret_decomp = out.mmse_k.value - out.mmse.value;
  out.paired_residual = eval.paired.estimate();
  if (y_error) out.regret_minus_y_error = eval.gap.estimate();
  out.n_obs = model.n;
  out.k = m;
  out.N = opts.N;
  out.seed = opts.seed;
  out.empty_cells = means.empty;
  out.occupied_cells = means.occupied;
  return out;
}

Estimate estimate_mmse_k(const VectorJointModel& model, const CellIndexFn& cell, std::size_t m,
                         const McOptions& opts, const Matrix* empty_fill) {
  return estimate_decomposition(model, cell, m, opts, empty_fill).mmse_k;
}

Estimate estimate_regret_direct(const VectorJointModel& model, const CellIndexFn& cell,
                                std::size_t m, const McOptions& opts,
                                const Matrix* empty_fill) {
  return estimate_decomposition(model, cell, m, opts, empty_fill).regret_direct;
}

Estimate regret_via_eta_quantization(const VectorJointModel& model, const Codebook& codebook,
                                     const McOptions& opts) {
  if (codebook.dim() != model.p) {
    throw InvalidInputError("codebook dimension " + std::to_string(codebook.dim()) +
                            " does not match p = " + std::to_string(model.p));
  }
  const Matrix fill = eta_cell_fill(codebook);
  return estimate_regret_direct(model, eta_cell_fn(codebook), codebook.size(), opts, &fill);
}

double distortion_of_Y(const Codebook& codebook, const Density1D& density) {
  return expected_cell_error(codebook, density);
}

double distortion_of_Y(const Codebook& codebook, const PriorDensity& prior) {
  return expected_cell_error(codebook, density_of(prior));
}

DecompositionResidual decomposition_residual(const VectorJointModel& model,
                                             const CellIndexFn& cell, std::size_t m,
                                             const McOptions& opts,
                                             const Matrix* empty_fill) {
  const RegretEstimate est = estimate_decomposition(model, cell, m, opts, empty_fill);
  return {est.residual(), est.combined_se()};
}

std::string to_json(const RegretEstimate& est) {
  nlohmann::ordered_json j;
  j["mmse"] = est.mmse.value;
  j["mmse_se"] = est.mmse.se;
  j["mmse_k"] = est.mmse_k.value;
  j["mmse_k_se"] = est.mmse_k.se;
  j["regret_direct"] = est.regret_direct.value;
  j["regret_direct_se"] = est.regret_direct.se;
  j["regret_decomp"] = est.regret_decomp;
  j["n_obs"] = est.n_obs;
  j["k"] = est.k;
  j["N"] = est.N;
  j["seed"] = est.seed;
  return j.dump();
}

RegretEstimate regret_estimate_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
    RegretEstimate est;
    est.mmse = {j.at("mmse").get<double>(), j.at("mmse_se").get<double>()};
    est.mmse_k = {j.at("mmse_k").get<double>(), j.at("mmse_k_se").get<double>()};
    est.regret_direct = {j.at("regret_direct").get<double>(),
                         j.at("regret_direct_se").get<double>()};
    est.regret_decomp = j.at("regret_decomp").get<double>();
    est.n_obs = j.at("n_obs").get<std::size_t>();
    est.k = j.at("k").get<std::size_t>();
    est.N = j.at("N").get<std::size_t>();
    est.seed = j.at("seed").get<std::uint64_t>();
    return est;
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInputError(std::string("regret estimate JSON: ") + e.what());
  }
}

}  // namespace mmseq
