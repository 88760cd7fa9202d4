#include "mmseq_cli/cli.hpp"

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <ostream>
#include <spdlog/sinks/ostream_sink.h>
#include <spdlog/spdlog.h>
#include <sstream>

#include "mmseq/bounds.hpp"
#include "mmseq/codebook_io.hpp"
#include "mmseq/config.hpp"
#include "mmseq/errors.hpp"
#include "mmseq/experiments.hpp"
#include "mmseq/quantizer.hpp"
#include "mmseq/regret.hpp"

namespace mmseq::cli {
namespace {

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kConfig:
    case ErrorKind::kInvalidInput:
    case ErrorKind::kDomain:
      return kExitConfig;
    case ErrorKind::kNumericalDegeneracy:
    case ErrorKind::kLinearAlgebra:
      return kExitNumerical;
    case ErrorKind::kConvergence:
      return kExitConvergence;
    case ErrorKind::kIo:
    case ErrorKind::kConstruction:
      return kExitFailure;
  }
  return kExitFailure;
}

// Single line: newlines in details would break the error format.
std::string one_line(std::string s) {
  for (char& c : s) {
    if (c == '\n' || c == '\r') c = ' ';
  }
  return s;
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open '" + path.string() + "' for writing");
  os << content;
  if (!os) throw IoError("write to '" + path.string() + "' failed");
}

struct DesignArgs {
  std::string model;
  std::size_t k = 0;
  std::string method;
  std::optional<double> r;
  std::string out;
};

struct RegretArgs {
  std::string model;
  std::string codebook;
  std::optional<std::size_t> n;
  std::optional<std::size_t> N;
  std::optional<std::uint64_t> seed;
  std::size_t chunks = 16;
  std::size_t threads = 1;
  std::string out;
};

struct SweepArgs {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> N;
  std::optional<std::size_t> threads;
};

struct BoundsArgs {
  std::string config;
};

struct BvmArgs {
  std::string model;
  std::size_t n = 0;
  std::size_t N = 10000;
  std::optional<std::uint64_t> seed;
  std::vector<double> L0;
  std::size_t chunks = 16;
  std::size_t threads = 1;
};

std::string run_design(const DesignArgs& a) {
  const ModelSpec spec = model_spec(KeyValueConfig::load(a.model));
  std::ostringstream os;
  if (a.method == "covering") {
    if (!a.r) throw ConfigError("design: --method covering needs --r");
    const std::size_t p =
        spec.is_scalar() ? 1 : make_linear_model(spec).p();
    write_codebook(os, covering_codebook(p, *a.r, a.k));
    return os.str();
  }
  if (a.r) throw ConfigError("design: --r applies to --method covering only");
  if (!spec.is_scalar()) throw ConfigError("design: " + a.method + " needs a scalar model");
  const Density1D density = density_of(make_scalar_model(spec).prior());
  if (a.method == "lloyd") {
    write_codebook(os, lloyd_max_1d(density, a.k).codebook);
  } else {
    write_codebook(os, panter_dite_1d(density, a.k));
  }
  return os.str();
}

std::string run_regret(const RegretArgs& a) {
  const ModelSpec spec = model_spec(KeyValueConfig::load(a.model));
  const CodebookFile file = load_codebook(a.codebook);
  VectorJointModel joint;
  if (spec.is_scalar()) {
    if (!a.n) throw ConfigError("regret: --n is required for scalar models");
    joint = joint_model(make_scalar_model(spec), *a.n);
  } else {
    joint = make_linear_model(spec).to_joint();
    if (a.n && *a.n != joint.n) throw ConfigError("regret: --n does not match the model");
  }
  const McOptions mc{a.N.value_or(100000), a.seed.value_or(spec.seed), a.chunks, a.threads};
  RegretEstimate est;
  if (file.is_covering()) {
    const CoveringQuantizer cq = file.covering();
    const Matrix fill = covering_cell_fill(cq);
    est = estimate_decomposition(joint, covering_cell_fn(cq), cq.cell_count(), mc, &fill);
  } else {
    if (file.codebook.dim() != joint.p) {
      throw ConfigError("regret: codebook dimension does not match the model");
    }
    const Matrix fill = eta_cell_fill(file.codebook);
    est = estimate_decomposition(joint, eta_cell_fn(file.codebook), file.codebook.size(), mc,
                                 &fill);
  }
  return to_json(est) + "\n";
}

std::string run_sweep_cmd(const SweepArgs& a) {
  KeyValueConfig cfg = KeyValueConfig::load(a.config);
  if (a.seed) cfg.set("sweep.seed", std::to_string(*a.seed));
  if (a.N) cfg.set("sweep.N", std::to_string(*a.N));
  if (a.threads) cfg.set("sweep.threads", std::to_string(*a.threads));
  const std::vector<SweepRow> rows = run_sweep(sweep_spec(cfg));
  std::ostringstream os;
  if (std::filesystem::path(a.out).extension() == ".json") {
    write_json(os, rows);
  } else {
    write_csv(os, rows);
  }
  return os.str();
}

std::string run_bounds(const BoundsArgs& a) {
  return to_json(evaluate_bound(bound_request(KeyValueConfig::load(a.config)))) + "\n";
}

std::string run_bvm(const BvmArgs& a) {
  const KeyValueConfig cfg = KeyValueConfig::load(a.model);
  const ModelSpec spec = model_spec(cfg);
  if (!spec.is_scalar()) throw ConfigError("bvm: needs a scalar model");
  BvmOptions opts;
  opts.N = a.N;
  opts.seed = a.seed.value_or(spec.seed);
  opts.chunks = a.chunks;
  opts.threads = a.threads;
  opts.L0 = a.L0.empty() ? std::vector<double>{bound_config(cfg).L0} : a.L0;
  return to_json(bvm_diagnostics(make_scalar_model(spec), a.n, opts)) + "\n";
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"MMSE estimation from quantized observations", "mmseq"};
  app.require_subcommand(1);
  int verbosity = 0;
  bool quiet = false;
  app.add_flag("-v,--verbose", verbosity, "More log output (repeatable)");
  app.add_flag("-q,--quiet", quiet, "Errors only");

  DesignArgs design;
  auto* design_cmd = app.add_subcommand("design", "Design a codebook and write it to a file");
  design_cmd->add_option("--model", design.model, "Model config file")->required();
  design_cmd->add_option("--k", design.k, "Number of codepoints")->required()->check(
      CLI::PositiveNumber);
  design_cmd->add_option("--method", design.method, "lloyd, panter-dite or covering")
      ->required()
      ->check(CLI::IsMember({"lloyd", "panter-dite", "covering"}));
  design_cmd->add_option("--r", design.r, "Covering radius");
  design_cmd->add_option("--out", design.out, "Codebook file")->required();

  RegretArgs regret;
  auto* regret_cmd = app.add_subcommand("regret", "Estimate mmse, mmse_k and the regret");
  regret_cmd->add_option("--model", regret.model, "Model config file")->required();
  regret_cmd->add_option("--codebook", regret.codebook, "Codebook file")->required();
  regret_cmd->add_option("--n", regret.n, "Observations per draw (scalar models)");
  regret_cmd->add_option("--N", regret.N, "Monte Carlo draws per pass (default 100000)");
  regret_cmd->add_option("--seed", regret.seed, "Master seed (default model.seed)");
  regret_cmd->add_option("--chunks", regret.chunks, "Seeded chunks")->check(CLI::PositiveNumber);
  regret_cmd->add_option("--threads", regret.threads, "Worker threads");
  regret_cmd->add_option("--out", regret.out, "JSON output file")->required();

  SweepArgs sweep;
  auto* sweep_cmd = app.add_subcommand("sweep", "Run a scalar or vector sweep");
  sweep_cmd->add_option("--config", sweep.config, "Sweep config file")->required();
  sweep_cmd->add_option("--out", sweep.out, "CSV (or .json) output file")->required();
  sweep_cmd->add_option("--seed", sweep.seed, "Override sweep.seed");
  sweep_cmd->add_option("--N", sweep.N, "Override sweep.N");
  sweep_cmd->add_option("--threads", sweep.threads, "Override sweep.threads");

  BoundsArgs bounds;
  auto* bounds_cmd = app.add_subcommand("bounds", "Evaluate one bound and print it as JSON");
  bounds_cmd->add_option("--config", bounds.config, "Bound config file")->required();

  BvmArgs bvm;
  auto* bvm_cmd = app.add_subcommand("bvm", "Posterior-mean expansion diagnostics as JSON");
  bvm_cmd->add_option("--model", bvm.model, "Model config file")->required();
  bvm_cmd->add_option("--n", bvm.n, "Observations per draw")->required()->check(
      CLI::PositiveNumber);
  bvm_cmd->add_option("--N", bvm.N, "Monte Carlo draws (>= 10000)");
  bvm_cmd->add_option("--seed", bvm.seed, "Master seed (default model.seed)");
  bvm_cmd->add_option("--L0", bvm.L0, "Event constants for the coverage report");
  bvm_cmd->add_option("--chunks", bvm.chunks, "Seeded chunks")->check(CLI::PositiveNumber);
  bvm_cmd->add_option("--threads", bvm.threads, "Worker threads");

  std::vector<std::string> argv_store;
  argv_store.reserve(args.size() + 1);
  argv_store.emplace_back("mmseq");
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const auto& s : argv_store) argv.push_back(s.c_str());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: config: " << one_line(e.what()) << '\n';
    return kExitConfig;
  }

  auto sink = std::make_shared<spdlog::sinks::ostream_sink_mt>(err);
  auto logger = std::make_shared<spdlog::logger>("mmseq", sink);
  logger->set_pattern("%l: %v");
  logger->set_level(quiet            ? spdlog::level::err
                    : verbosity >= 2 ? spdlog::level::debug
                    : verbosity == 1 ? spdlog::level::info
                                     : spdlog::level::warn);
  const auto previous = spdlog::default_logger();
  spdlog::set_default_logger(logger);
  struct RestoreLogger {
    std::shared_ptr<spdlog::logger> previous;
    ~RestoreLogger() { spdlog::set_default_logger(previous); }
  } restore{previous};

  try {
    if (*design_cmd) {
      write_file(design.out, run_design(design));
    } else if (*regret_cmd) {
      write_file(regret.out, run_regret(regret));
    } else if (*sweep_cmd) {
      write_file(sweep.out, run_sweep_cmd(sweep));
    } else if (*bounds_cmd) {
      out << run_bounds(bounds);
    } else if (*bvm_cmd) {
      out << run_bvm(bvm);
    }
  } catch (const Error& e) {
    err << "error: " << to_string(e.kind()) << ": " << one_line(e.what()) << '\n';
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    err << "error: internal: " << one_line(e.what()) << '\n';
    return kExitFailure;
  }
  return kExitOk;
}

}  // namespace mmseq::cli
