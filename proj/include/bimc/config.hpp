#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "bimc/estimators.hpp"
#include "bimc/models.hpp"
#include "json.hpp"

namespace bimc {

inline constexpr int kSchemaVersion = 1;

/// Covariance forms accepted in a config file:
///   {"scalar": s}                          s * I
///   {"diagonal": [d1, ..., dm]}
///   {"dense": [[...], ...]}
///   {"precision_operator": {"kind": "shifted_laplacian_squared",
///                           "gamma": g, "delta": d, "grid_n": n}}
struct CovarianceSpec {
  enum class Kind { Scalar, Diagonal, Dense, PrecisionOperator };
  Kind kind = Kind::Scalar;
  double scalar = 1.0;
  std::vector<double> diagonal;
  std::vector<std::vector<double>> dense;
  double gamma = 0.0;
  double delta = 0.0;
  int grid_n = 0;

  friend bool operator==(const CovarianceSpec&, const CovarianceSpec&) = default;
};

/// A mean of length one is broadcast to the model dimension.
struct ComponentSpec {
  double weight = 1.0;
  std::vector<double> mean;
  CovarianceSpec cov;

  friend bool operator==(const ComponentSpec&, const ComponentSpec&) = default;
};

struct NominalSpec {
  bool mixture = false;
  std::vector<ComponentSpec> components;

  friend bool operator==(const NominalSpec&, const NominalSpec&) = default;
};

struct RunConfig {
  int schema_version = kSchemaVersion;
  ModelSpec model;
  NominalSpec nominal;
  double y_min = 0.0;
  double y_max = 1.0;
  Method method = Method::BIMC;
  int n_pseudo = 1;
  std::uint64_t n_samples = 1000;
  std::uint64_t seed = 0;
  std::optional<double> override_y;
  std::optional<double> override_sigma_sq;
  int ensemble = 1;
  unsigned threads = 1;
  std::optional<double> reference_mu;
  double map_relative_tolerance = 1e-8;
  int map_max_iterations = 500;

  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

enum class SweepAxis { SigmaSq, NSamples, ProbabilityLevel, NPseudo };

std::string to_string(SweepAxis a);
SweepAxis sweep_axis_from_string(const std::string& s);

struct SweepSpec {
  SweepAxis axis = SweepAxis::SigmaSq;
  std::vector<double> grid;
  int ensemble = 50;
  RunConfig base;

  friend bool operator==(const SweepSpec&, const SweepSpec&) = default;
};

RunConfig parse_run_config(const nlohmann::json& j);
nlohmann::json to_json(const RunConfig& cfg);

/// A sweep file is a run config with an extra "sweep" section
/// {"axis": ..., "grid": [...], "ensemble": n}.
SweepSpec parse_sweep_spec(const nlohmann::json& j);
nlohmann::json to_json(const SweepSpec& spec);

/// Reads and parses a JSON file; syntax errors become ConfigError("<file>").
nlohmann::json read_json_file(const std::string& path);

/// Materializes the nominal density for a model of dimension `dim`.
Nominal build_nominal(const NominalSpec& spec, Eigen::Index dim);

TargetInterval target_interval(const RunConfig& cfg);
BimcOptions bimc_options(const RunConfig& cfg);

/// Default configuration for each catalog model.
RunConfig default_config(const std::string& model_name);

}  // namespace bimc
