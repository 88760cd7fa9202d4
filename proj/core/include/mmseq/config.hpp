#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mmseq/bounds.hpp"
#include "mmseq/experiments.hpp"
#include "mmseq/model.hpp"

namespace mmseq {

// Flat key-value text:
//
//   # comment
//   model.kind = uniform-gaussian
//   [sweep]            # optional section, prefixes the keys below it
//   k = 4, 8, 16
//
// Keys outside the documented set, duplicates and malformed values raise
// ConfigError. Lists are comma/space separated or JSON arrays; matrices are
// JSON arrays of rows.
class KeyValueConfig {
 public:
  static KeyValueConfig parse(std::istream& is, const std::string& source = "<config>");
  static KeyValueConfig parse_string(const std::string& text);
  static KeyValueConfig load(const std::filesystem::path& path);

  bool has(const std::string& key) const { return values_.count(key) != 0; }
  const std::map<std::string, std::string>& entries() const noexcept { return values_; }
  const std::string& source() const noexcept { return source_; }

  // Throws ConfigError naming the key when it is absent.
  const std::string& require(const std::string& key) const;

  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key) const;
  double get_double(const std::string& key, double fallback) const;
  std::size_t get_size(const std::string& key) const;
  std::size_t get_size(const std::string& key, std::size_t fallback) const;
  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::vector<std::size_t> get_size_list(const std::string& key) const;
  Matrix get_matrix(const std::string& key) const;

  // Applies an override (e.g. --seed) as if it had been in the file.
  void set(const std::string& key, const std::string& value);

 private:
  std::string source_;
  std::map<std::string, std::string> values_;
};

// Every key the parser accepts.
const std::vector<std::string>& known_config_keys();

enum class ModelKind { kUniformGaussian, kCosineGaussian, kUniformLogistic, kUniformNoiseless,
                       kLinearGaussian };

std::string_view to_string(ModelKind kind) noexcept;

struct ModelSpec {
  ModelKind kind = ModelKind::kUniformGaussian;
  double A = 1.0;
  double sigma = 1.0;
  std::optional<std::size_t> p;
  std::optional<std::size_t> n;
  std::uint64_t seed = 0;
  std::optional<Matrix> sigma_y;
  std::optional<Matrix> h;
  std::optional<Matrix> sigma_w;

  bool is_scalar() const noexcept { return kind != ModelKind::kLinearGaussian; }
};

// Reads the model.* block. model.kind is required; model.A and model.sigma are
// required by the scalar kinds that use them. A linear-gaussian model takes
// either all of model.sigma_y / model.h / model.sigma_w, or model.p for the
// isotropic model with noise variance model.sigma^2.
ModelSpec model_spec(const KeyValueConfig& cfg);
ScalarChannelModel make_scalar_model(const ModelSpec& spec);
LinearGaussianModel make_linear_model(const ModelSpec& spec);

BoundConfig bound_config(const KeyValueConfig& cfg);

struct SweepSpec {
  ModelSpec model;
  std::vector<std::size_t> k;
  std::vector<std::size_t> n;  // scalar sweeps only
  std::size_t N = 100000;
  std::uint64_t seed = 0;
  RPolicy r_policy;
  SweepOptions options;
};

SweepSpec sweep_spec(const KeyValueConfig& cfg);
std::vector<SweepRow> run_sweep(const SweepSpec& spec);

// bounds.name selects the evaluator; the inputs it needs are read from
// bounds.* (and the model block for info-gap).
BoundRequest bound_request(const KeyValueConfig& cfg);

}  // namespace mmseq
