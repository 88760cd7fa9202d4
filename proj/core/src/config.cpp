#include "mmseq/config.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <istream>
#include <json.hpp>
#include <sstream>

#include "mmseq/codebook_io.hpp"
#include "mmseq/errors.hpp"

namespace mmseq {
namespace {

std::string trim(std::string_view s) {
  std::size_t a = 0;
  std::size_t b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return std::string(s.substr(a, b - a));
}

// Drops a trailing comment: '#' at the start or after whitespace.
std::string strip_comment(const std::string& line) {
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '#' && (i == 0 || std::isspace(static_cast<unsigned char>(line[i - 1])))) {
      return line.substr(0, i);
    }
  }
  return line;
}

bool is_known(const std::string& key) {
  const auto& keys = known_config_keys();
  return std::find(keys.begin(), keys.end(), key) != keys.end();
}

std::uint64_t parse_unsigned(const std::string& key, const std::string& text) {
  if (text.empty() || !std::all_of(text.begin(), text.end(),
                                   [](char c) { return std::isdigit(static_cast<unsigned char>(c)); })) {
    throw ConfigError(key + ": expected a nonnegative integer, got '" + text + "'");
  }
  try {
    return std::stoull(text);
  } catch (const std::exception&) {
    throw ConfigError(key + ": integer out of range '" + text + "'");
  }
}

}  // namespace

const std::vector<std::string>& known_config_keys() {
  static const std::vector<std::string> keys = {
      "model.kind",       "model.A",          "model.sigma",       "model.p",
      "model.n",          "model.seed",       "model.sigma_y",     "model.h",
      "model.sigma_w",    "sweep.k",          "sweep.n",           "sweep.N",
      "sweep.seed",       "sweep.r_policy",   "sweep.chunks",      "sweep.threads",
      "sweep.calibrate",  "sweep.moment_samples", "bounds.name",   "bounds.L",
      "bounds.fit_L",     "bounds.c_corollary", "bounds.c_thm2_moment", "bounds.c1",
      "bounds.c2",        "bounds.L0",        "bounds.C_abs",      "bounds.delta",
      "bounds.n",         "bounds.k",         "bounds.p",          "bounds.e_inv_sqrt_fisher",
      "bounds.mmse",      "bounds.sigma",     "bounds.e1",         "bounds.e2",
      "bounds.e4",        "bounds.v",
  };
  return keys;
}

KeyValueConfig KeyValueConfig::parse(std::istream& is, const std::string& source) {
  KeyValueConfig cfg;
  cfg.source_ = source;
  std::string section;
  std::string raw;
  std::size_t lineno = 0;
  while (std::getline(is, raw)) {
    ++lineno;
    const std::string line = trim(strip_comment(raw));
    if (line.empty()) continue;
    const std::string where = source + ":" + std::to_string(lineno);
    if (line.front() == '[' && line.back() == ']' && line.find('=') == std::string::npos) {
      section = trim(std::string_view(line).substr(1, line.size() - 2));
      if (section.empty()) throw ConfigError(where + ": empty section name");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(where + ": expected 'key = value'");
    std::string key = trim(std::string_view(line).substr(0, eq));
    std::string value = trim(std::string_view(line).substr(eq + 1));
    if (key.empty()) throw ConfigError(where + ": empty key");
    if (!section.empty()) key = section + "." + key;
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"') {
      value = value.substr(1, value.size() - 2);
    }
    if (!is_known(key)) throw ConfigError(where + ": unknown key '" + key + "'");
    if (cfg.values_.count(key)) throw ConfigError(where + ": duplicate key '" + key + "'");
    if (value.empty()) throw ConfigError(where + ": empty value for '" + key + "'");
    cfg.values_.emplace(std::move(key), std::move(value));
  }
  return cfg;
}

KeyValueConfig KeyValueConfig::parse_string(const std::string& text) {
  std::istringstream is(text);
  return parse(is);
}

KeyValueConfig KeyValueConfig::load(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config file '" + path.string() + "'");
  return parse(is, path.string());
}

const std::string& KeyValueConfig::require(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError(source_ + ": missing required key '" + key + "'");
  return it->second;
}

std::string KeyValueConfig::get_string(const std::string& key, const std::string& fallback) const {
  const auto it = values_.find(key);
  return it == values_.end() ? fallback : it->second;
}

double KeyValueConfig::get_double(const std::string& key) const {
  const std::string& text = require(key);
  try {
    return parse_double(text);
  } catch (const Error&) {
    throw ConfigError(key + ": expected a number, got '" + text + "'");
  }
}

double KeyValueConfig::get_double(const std::string& key, double fallback) const {
  return has(key) ? get_double(key) : fallback;
}

std::size_t KeyValueConfig::get_size(const std::string& key) const {
  return static_cast<std::size_t>(parse_unsigned(key, require(key)));
}

std::size_t KeyValueConfig::get_size(const std::string& key, std::size_t fallback) const {
  return has(key) ? get_size(key) : fallback;
}

std::uint64_t KeyValueConfig::get_u64(const std::string& key, std::uint64_t fallback) const {
  return has(key) ? parse_unsigned(key, require(key)) : fallback;
}

bool KeyValueConfig::get_bool(const std::string& key, bool fallback) const {
  if (!has(key)) return fallback;
  const std::string& text = require(key);
  if (text == "true" || text == "1") return true;
  if (text == "false" || text == "0") return false;
  throw ConfigError(key + ": expected true or false, got '" + text + "'");
}

std::vector<std::size_t> KeyValueConfig::get_size_list(const std::string& key) const {
  std::string text = require(key);
  if (!text.empty() && text.front() == '[') {
    if (text.back() != ']') throw ConfigError(key + ": unterminated list");
    text = text.substr(1, text.size() - 2);
  }
  std::replace(text.begin(), text.end(), ',', ' ');
  std::istringstream is(text);
  std::vector<std::size_t> out;
  std::string tok;
  while (is >> tok) out.push_back(static_cast<std::size_t>(parse_unsigned(key, tok)));
  if (out.empty()) throw ConfigError(key + ": empty list");
  return out;
}

Matrix KeyValueConfig::get_matrix(const std::string& key) const {
  const std::string& text = require(key);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(key + ": expected a number or a JSON array of rows");
  }
  if (j.is_number()) return Matrix::Constant(1, 1, j.get<double>());
  if (!j.is_array() || j.empty()) throw ConfigError(key + ": expected a JSON array of rows");
  // A flat array is a single column.
  if (j.front().is_number()) {
    Matrix m(static_cast<Eigen::Index>(j.size()), 1);
    for (std::size_t i = 0; i < j.size(); ++i) {
      if (!j[i].is_number()) throw ConfigError(key + ": non-numeric entry");
      m(static_cast<Eigen::Index>(i), 0) = j[i].get<double>();
    }
    return m;
  }
  const std::size_t rows = j.size();
  const std::size_t cols = j.front().is_array() ? j.front().size() : 0;
  if (cols == 0) throw ConfigError(key + ": rows must be nonempty arrays");
  Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (std::size_t r = 0; r < rows; ++r) {
    if (!j[r].is_array() || j[r].size() != cols) throw ConfigError(key + ": ragged matrix rows");
    for (std::size_t c = 0; c < cols; ++c) {
      if (!j[r][c].is_number()) throw ConfigError(key + ": non-numeric entry");
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = j[r][c].get<double>();
    }
  }
  return m;
}

void KeyValueConfig::set(const std::string& key, const std::string& value) {
  if (!is_known(key)) throw ConfigError("unknown key '" + key + "'");
  values_[key] = value;
}

std::string_view to_string(ModelKind kind) noexcept {
  switch (kind) {
    case ModelKind::kUniformGaussian:
      return "uniform-gaussian";
    case ModelKind::kCosineGaussian:
      return "cosine-gaussian";
    case ModelKind::kUniformLogistic:
      return "uniform-logistic";
    case ModelKind::kUniformNoiseless:
      return "uniform-noiseless";
    case ModelKind::kLinearGaussian:
      return "linear-gaussian";
  }
  return "unknown";
}

ModelSpec model_spec(const KeyValueConfig& cfg) {
  ModelSpec spec;
  const std::string& kind = cfg.require("model.kind");
  if (kind == "uniform-gaussian") spec.kind = ModelKind::kUniformGaussian;
  else if (kind == "cosine-gaussian") spec.kind = ModelKind::kCosineGaussian;
  else if (kind == "uniform-logistic") spec.kind = ModelKind::kUniformLogistic;
  else if (kind == "uniform-noiseless") spec.kind = ModelKind::kUniformNoiseless;
  else if (kind == "linear-gaussian") spec.kind = ModelKind::kLinearGaussian;
  else throw ConfigError("model.kind: unknown model '" + kind + "'");

  spec.seed = cfg.get_u64("model.seed", 0);
  if (cfg.has("model.n")) spec.n = cfg.get_size("model.n");
  if (cfg.has("model.p")) spec.p = cfg.get_size("model.p");
  if (spec.is_scalar()) {
    spec.A = cfg.get_double("model.A");
    if (spec.kind != ModelKind::kUniformNoiseless) spec.sigma = cfg.get_double("model.sigma");
    if (!(spec.A > 0.0 && std::isfinite(spec.A))) throw ConfigError("model.A must be > 0");
    if (!(spec.sigma > 0.0 && std::isfinite(spec.sigma))) {
      throw ConfigError("model.sigma must be > 0");
    }
    if (spec.p && *spec.p != 1) throw ConfigError("model.p must be 1 for scalar models");
    for (const char* key : {"model.sigma_y", "model.h", "model.sigma_w"}) {
      if (cfg.has(key)) throw ConfigError(std::string(key) + " applies to linear-gaussian only");
    }
    return spec;
  }

  const bool any_matrix = cfg.has("model.sigma_y") || cfg.has("model.h") || cfg.has("model.sigma_w");
  if (any_matrix) {
    spec.sigma_y = cfg.get_matrix("model.sigma_y");
    spec.h = cfg.get_matrix("model.h");
    spec.sigma_w = cfg.get_matrix("model.sigma_w");
    if (spec.p && *spec.p != static_cast<std::size_t>(spec.sigma_y->rows())) {
      throw ConfigError("model.p does not match model.sigma_y");
    }
    if (spec.n && *spec.n != static_cast<std::size_t>(spec.h->rows())) {
      throw ConfigError("model.n does not match the rows of model.h");
    }
  } else {
    spec.p = cfg.get_size("model.p");
    spec.sigma = cfg.get_double("model.sigma", 1.0);
    if (*spec.p == 0) throw ConfigError("model.p must be >= 1");
    if (!(spec.sigma > 0.0 && std::isfinite(spec.sigma))) {
      throw ConfigError("model.sigma must be > 0");
    }
    if (spec.n && *spec.n != *spec.p) {
      throw ConfigError("model.n must equal model.p for the isotropic linear-gaussian model");
    }
  }
  return spec;
}

ScalarChannelModel make_scalar_model(const ModelSpec& spec) {
  switch (spec.kind) {
    case ModelKind::kUniformGaussian:
      return ScalarChannelModel::uniform_gaussian(spec.A, spec.sigma);
    case ModelKind::kCosineGaussian:
      return ScalarChannelModel::cosine_gaussian(spec.A, spec.sigma);
    case ModelKind::kUniformLogistic:
      return ScalarChannelModel::uniform_logistic(spec.A, spec.sigma);
    case ModelKind::kUniformNoiseless:
      return ScalarChannelModel::uniform_noiseless(spec.A);
    case ModelKind::kLinearGaussian:
      break;
  }
  throw ConfigError("model.kind: linear-gaussian is not a scalar channel model");
}

LinearGaussianModel make_linear_model(const ModelSpec& spec) {
  if (spec.is_scalar()) throw ConfigError("model.kind: expected linear-gaussian");
  if (spec.sigma_y) return LinearGaussianModel(*spec.sigma_y, *spec.h, *spec.sigma_w);
  return LinearGaussianModel::isotropic(*spec.p, spec.sigma * spec.sigma);
}

BoundConfig bound_config(const KeyValueConfig& cfg) {
  BoundConfig c;
  c.L = cfg.get_double("bounds.L", c.L);
  c.fit_L = cfg.get_bool("bounds.fit_L", c.fit_L);
  c.c_corollary = cfg.get_double("bounds.c_corollary", c.c_corollary);
  c.c_thm2_moment = cfg.get_double("bounds.c_thm2_moment", c.c_thm2_moment);
  c.c1 = cfg.get_double("bounds.c1", c.c1);
  c.c2 = cfg.get_double("bounds.c2", c.c2);
  c.L0 = cfg.get_double("bounds.L0", c.L0);
  c.C_abs = cfg.get_double("bounds.C_abs", c.C_abs);
  try {
    c.validate();
  } catch (const InvalidInputError& e) {
    throw ConfigError(std::string("bounds: ") + e.what());
  }
  return c;
}

SweepSpec sweep_spec(const KeyValueConfig& cfg) {
  SweepSpec spec;
  spec.model = model_spec(cfg);
  spec.k = cfg.get_size_list("sweep.k");
  if (spec.model.is_scalar()) {
    spec.n = cfg.get_size_list("sweep.n");
    if (cfg.has("sweep.r_policy")) throw ConfigError("sweep.r_policy applies to vector sweeps only");
  } else {
    if (cfg.has("sweep.n")) throw ConfigError("sweep.n applies to scalar sweeps only");
    spec.r_policy = RPolicy::parse(cfg.get_string("sweep.r_policy", "optimized"));
  }
  for (std::size_t v : spec.k) {
    if (v == 0) throw ConfigError("sweep.k entries must be >= 1");
  }
  for (std::size_t v : spec.n) {
    if (v == 0) throw ConfigError("sweep.n entries must be >= 1");
  }
  spec.N = cfg.get_size("sweep.N", spec.N);
  if (spec.N < 1000) throw ConfigError("sweep.N must be >= 1000");
  spec.seed = cfg.get_u64("sweep.seed", spec.model.seed);
  spec.options.chunks = cfg.get_size("sweep.chunks", spec.options.chunks);
  spec.options.threads = cfg.get_size("sweep.threads", spec.options.threads);
  spec.options.calibrate = cfg.get_bool("sweep.calibrate", spec.options.calibrate);
  spec.options.moment_samples = cfg.get_size("sweep.moment_samples", spec.options.moment_samples);
  if (spec.options.chunks == 0) throw ConfigError("sweep.chunks must be >= 1");
  spec.options.config = bound_config(cfg);
  return spec;
}

std::vector<SweepRow> run_sweep(const SweepSpec& spec) {
  if (spec.model.is_scalar()) {
    return sweep_scalar(make_scalar_model(spec.model), spec.k, spec.n, spec.N, spec.seed,
                        spec.options);
  }
  return sweep_vector(make_linear_model(spec.model), spec.k, spec.N, spec.seed, spec.r_policy,
                      spec.options);
}

BoundRequest bound_request(const KeyValueConfig& cfg) {
  BoundRequest req;
  req.name = cfg.require("bounds.name");
  req.config = bound_config(cfg);
  for (const char* key : {"delta", "n", "k", "p", "e_inv_sqrt_fisher", "mmse", "sigma", "e1", "e2",
                          "e4", "v"}) {
    const std::string full = std::string("bounds.") + key;
    if (cfg.has(full)) req.inputs[key] = cfg.get_double(full);
  }
  if (cfg.has("model.kind")) {
    const ModelSpec spec = model_spec(cfg);
    if (spec.is_scalar()) req.model = make_scalar_model(spec);
  }
  return req;
}

}  // namespace mmseq
