#include "bimc/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

namespace bimc {

using nlohmann::json;

std::string to_string(SweepAxis a) {
  switch (a) {
    case SweepAxis::SigmaSq:
      return "sigma_sq";
    case SweepAxis::NSamples:
      return "n_samples";
    case SweepAxis::ProbabilityLevel:
      return "probability_level";
    case SweepAxis::NPseudo:
      return "n_pseudo";
  }
  return "?";
}

SweepAxis sweep_axis_from_string(const std::string& s) {
  if (s == "sigma_sq") return SweepAxis::SigmaSq;
  if (s == "n_samples") return SweepAxis::NSamples;
  if (s == "probability_level") return SweepAxis::ProbabilityLevel;
  if (s == "n_pseudo") return SweepAxis::NPseudo;
  throw ConfigError("sweep.axis", "unknown axis '" + s + "' (expected sigma_sq, n_samples, probability_level or n_pseudo)");
}

namespace {

std::string join(const std::string& path, const std::string& key) { return path.empty() ? key : path + "." + key; }

void reject_unknown(const json& j, const std::string& path, std::initializer_list<const char*> allowed) {
  const std::set<std::string> keys(allowed.begin(), allowed.end());
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!keys.count(it.key())) throw ConfigError(join(path, it.key()), "unknown key");
  }
}

const json& require(const json& j, const std::string& path, const char* key) {
  if (!j.is_object() || !j.contains(key)) throw ConfigError(join(path, key), "missing required field");
  return j.at(key);
}

const json& expect_object(const json& j, const std::string& path) {
  if (!j.is_object()) throw ConfigError(path, "expected an object");
  return j;
}

double as_double(const json& j, const std::string& path) {
  if (!j.is_number()) throw ConfigError(path, "expected a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) throw ConfigError(path, "expected a finite number");
  return v;
}

double as_positive(const json& j, const std::string& path) {
  const double v = as_double(j, path);
  if (!(v > 0.0)) throw ConfigError(path, "must be positive");
  return v;
}

std::int64_t as_int(const json& j, const std::string& path) {
  if (!j.is_number_integer()) throw ConfigError(path, "expected an integer");
  if (j.is_number_unsigned() && j.get<std::uint64_t>() > static_cast<std::uint64_t>(INT64_MAX)) {
    throw ConfigError(path, "integer out of range");
  }
  return j.get<std::int64_t>();
}

std::uint64_t as_u64(const json& j, const std::string& path) {
  if (!j.is_number_integer()) throw ConfigError(path, "expected an integer");
  if (j.is_number_unsigned()) return j.get<std::uint64_t>();
  const std::int64_t v = j.get<std::int64_t>();
  if (v < 0) throw ConfigError(path, "must be non-negative");
  return static_cast<std::uint64_t>(v);
}

int as_int_at_least(const json& j, const std::string& path, int lo) {
  const std::int64_t v = as_int(j, path);
  if (v < lo || v > INT32_MAX) throw ConfigError(path, "must be an integer >= " + std::to_string(lo));
  return static_cast<int>(v);
}

std::vector<double> as_vector(const json& j, const std::string& path) {
  if (j.is_number()) return {as_double(j, path)};
  if (!j.is_array() || j.empty()) throw ConfigError(path, "expected a number or a non-empty array of numbers");
  std::vector<double> out;
  out.reserve(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) out.push_back(as_double(j[i], path + "[" + std::to_string(i) + "]"));
  return out;
}

ModelSpec parse_model(const json& j, const std::string& path) {
  expect_object(j, path);
  reject_unknown(j, path, {"name", "m", "seed", "epsilon", "analytic_gradient", "t_final", "step_count", "grid_n"});
  ModelSpec s;
  const json& name = require(j, path, "name");
  if (!name.is_string()) throw ConfigError(join(path, "name"), "expected a string");
  s.name = name.get<std::string>();
  const auto& names = catalog_names();
  if (std::find(names.begin(), names.end(), s.name) == names.end()) {
    throw ConfigError(join(path, "name"), "unknown model '" + s.name + "'");
  }
  if (j.contains("m")) s.m = as_int_at_least(j["m"], join(path, "m"), 1);
  if (j.contains("seed")) s.seed = as_u64(j["seed"], join(path, "seed"));
  if (j.contains("epsilon") && !j["epsilon"].is_null()) s.epsilon = as_double(j["epsilon"], join(path, "epsilon"));
  if (j.contains("analytic_gradient")) {
    if (!j["analytic_gradient"].is_boolean()) throw ConfigError(join(path, "analytic_gradient"), "expected a boolean");
    s.analytic_gradient = j["analytic_gradient"].get<bool>();
  }
  if (j.contains("t_final")) {
    s.t_final = as_double(j["t_final"], join(path, "t_final"));
    if (s.t_final < 0.0) throw ConfigError(join(path, "t_final"), "must be non-negative");
  }
  if (j.contains("step_count")) s.step_count = as_int_at_least(j["step_count"], join(path, "step_count"), 1);
  if (j.contains("grid_n")) s.grid_n = as_int_at_least(j["grid_n"], join(path, "grid_n"), 5);
  return s;
}

json model_to_json(const ModelSpec& s) {
  json j;
  j["name"] = s.name;
  j["m"] = s.m;
  j["seed"] = s.seed;
  if (s.epsilon) j["epsilon"] = *s.epsilon;
  j["analytic_gradient"] = s.analytic_gradient;
  j["t_final"] = s.t_final;
  j["step_count"] = s.step_count;
  j["grid_n"] = s.grid_n;
  return j;
}

CovarianceSpec parse_cov(const json& j, const std::string& path) {
  CovarianceSpec c;
  if (j.is_number()) {
    c.scalar = as_positive(j, path);
    return c;
  }
  expect_object(j, path);
  if (j.size() != 1) throw ConfigError(path, "expected exactly one of scalar, diagonal, dense, precision_operator");
  if (j.contains("scalar")) {
    c.scalar = as_positive(j["scalar"], join(path, "scalar"));
  } else if (j.contains("diagonal")) {
    c.kind = CovarianceSpec::Kind::Diagonal;
    c.diagonal = as_vector(j["diagonal"], join(path, "diagonal"));
    for (std::size_t i = 0; i < c.diagonal.size(); ++i) {
      if (!(c.diagonal[i] > 0.0)) throw ConfigError(join(path, "diagonal") + "[" + std::to_string(i) + "]", "must be positive");
    }
  } else if (j.contains("dense")) {
    c.kind = CovarianceSpec::Kind::Dense;
    const json& rows = j["dense"];
    const std::string p = join(path, "dense");
    if (!rows.is_array() || rows.empty()) throw ConfigError(p, "expected a non-empty array of rows");
    for (std::size_t r = 0; r < rows.size(); ++r) {
      const std::string pr = p + "[" + std::to_string(r) + "]";
      if (!rows[r].is_array()) throw ConfigError(pr, "expected an array");
      c.dense.push_back(as_vector(rows[r], pr));
      if (c.dense.back().size() != rows.size()) throw ConfigError(pr, "matrix must be square");
    }
  } else if (j.contains("precision_operator")) {
    c.kind = CovarianceSpec::Kind::PrecisionOperator;
    const std::string p = join(path, "precision_operator");
    const json& op = expect_object(j["precision_operator"], p);
    reject_unknown(op, p, {"kind", "gamma", "delta", "grid_n"});
    const json& kind = require(op, p, "kind");
    if (!kind.is_string() || kind.get<std::string>() != "shifted_laplacian_squared") {
      throw ConfigError(join(p, "kind"), "only 'shifted_laplacian_squared' is supported");
    }
    c.gamma = as_positive(require(op, p, "gamma"), join(p, "gamma"));
    c.delta = as_positive(require(op, p, "delta"), join(p, "delta"));
    c.grid_n = as_int_at_least(require(op, p, "grid_n"), join(p, "grid_n"), 2);
  } else {
    throw ConfigError(path, "expected one of scalar, diagonal, dense, precision_operator");
  }
  return c;
}

json cov_to_json(const CovarianceSpec& c) {
  switch (c.kind) {
    case CovarianceSpec::Kind::Scalar:
      return json{{"scalar", c.scalar}};
    case CovarianceSpec::Kind::Diagonal:
      return json{{"diagonal", c.diagonal}};
    case CovarianceSpec::Kind::Dense:
      return json{{"dense", c.dense}};
    case CovarianceSpec::Kind::PrecisionOperator:
      return json{{"precision_operator",
                   {{"kind", "shifted_laplacian_squared"}, {"gamma", c.gamma}, {"delta", c.delta}, {"grid_n", c.grid_n}}}};
  }
  return json();
}

ComponentSpec parse_component(const json& j, const std::string& path, bool weighted) {
  expect_object(j, path);
  if (weighted) {
    reject_unknown(j, path, {"weight", "mean", "cov"});
  } else {
    reject_unknown(j, path, {"mean", "cov"});
  }
  ComponentSpec c;
  if (weighted) {
    c.weight = as_double(require(j, path, "weight"), join(path, "weight"));
    if (c.weight < 0.0) throw ConfigError(join(path, "weight"), "must be non-negative");
  }
  c.mean = as_vector(require(j, path, "mean"), join(path, "mean"));
  c.cov = parse_cov(require(j, path, "cov"), join(path, "cov"));
  return c;
}

NominalSpec parse_nominal(const json& j, const std::string& path) {
  expect_object(j, path);
  if (j.size() != 1) throw ConfigError(path, "expected exactly one of gaussian, mixture");
  NominalSpec n;
  if (j.contains("gaussian")) {
    n.components.push_back(parse_component(j["gaussian"], join(path, "gaussian"), false));
    return n;
  }
  if (!j.contains("mixture")) throw ConfigError(path, "expected one of gaussian, mixture");
  n.mixture = true;
  const std::string p = join(path, "mixture");
  const json& mix = expect_object(j["mixture"], p);
  reject_unknown(mix, p, {"components"});
  const json& comps = require(mix, p, "components");
  const std::string pc = join(p, "components");
  if (!comps.is_array() || comps.empty()) throw ConfigError(pc, "expected a non-empty array");
  double total = 0.0;
  for (std::size_t i = 0; i < comps.size(); ++i) {
    n.components.push_back(parse_component(comps[i], pc + "[" + std::to_string(i) + "]", true));
    total += n.components.back().weight;
  }
  if (std::abs(total - 1.0) > 1e-9) throw ConfigError(pc, "weights must sum to one");
  return n;
}

json component_to_json(const ComponentSpec& c, bool weighted) {
  json j;
  if (weighted) j["weight"] = c.weight;
  j["mean"] = c.mean;
  j["cov"] = cov_to_json(c.cov);
  return j;
}

json nominal_to_json(const NominalSpec& n) {
  if (!n.mixture) return json{{"gaussian", component_to_json(n.components.front(), false)}};
  json comps = json::array();
  for (const auto& c : n.components) comps.push_back(component_to_json(c, true));
  return json{{"mixture", {{"components", comps}}}};
}

void parse_run_fields(const json& j, RunConfig& cfg) {
  if (!j.is_object()) throw ConfigError("<root>", "expected an object");
  const json& version = require(j, "", "schema_version");
  cfg.schema_version = as_int_at_least(version, "schema_version", 0);
  if (cfg.schema_version != kSchemaVersion) {
    throw ConfigError("schema_version", "unsupported version " + std::to_string(cfg.schema_version));
  }
  cfg.model = parse_model(require(j, "", "model"), "model");
  cfg.nominal = parse_nominal(require(j, "", "nominal"), "nominal");

  const json& y = require(j, "", "Y");
  if (!y.is_array() || y.size() != 2) throw ConfigError("Y", "expected [y_min, y_max]");
  cfg.y_min = as_double(y[0], "Y");
  cfg.y_max = as_double(y[1], "Y");
  if (!(cfg.y_min < cfg.y_max)) throw ConfigError("Y", "y_min must be strictly less than y_max");

  if (j.contains("method")) {
    const json& m = j["method"];
    if (!m.is_string() || (m != "MC" && m != "BIMC")) throw ConfigError("method", "expected \"MC\" or \"BIMC\"");
    cfg.method = method_from_string(m.get<std::string>());
  }
  if (j.contains("n_pseudo")) cfg.n_pseudo = as_int_at_least(j["n_pseudo"], "n_pseudo", 1);
  if (j.contains("n_samples")) {
    cfg.n_samples = as_u64(j["n_samples"], "n_samples");
    if (cfg.n_samples < 1) throw ConfigError("n_samples", "must be >= 1");
  }
  if (j.contains("seed")) cfg.seed = as_u64(j["seed"], "seed");
  if (j.contains("overrides")) {
    const json& o = expect_object(j["overrides"], "overrides");
    reject_unknown(o, "overrides", {"y", "sigma_sq"});
    if (o.contains("y")) cfg.override_y = as_double(o["y"], "overrides.y");
    if (o.contains("sigma_sq")) cfg.override_sigma_sq = as_positive(o["sigma_sq"], "overrides.sigma_sq");
    if (cfg.override_y && cfg.n_pseudo != 1) throw ConfigError("overrides.y", "requires n_pseudo = 1");
  }
  if (j.contains("ensemble")) cfg.ensemble = as_int_at_least(j["ensemble"], "ensemble", 1);
  if (j.contains("threads")) cfg.threads = static_cast<unsigned>(as_int_at_least(j["threads"], "threads", 1));
  if (j.contains("reference_mu")) cfg.reference_mu = as_positive(j["reference_mu"], "reference_mu");
  if (j.contains("solver")) {
    const json& s = expect_object(j["solver"], "solver");
    reject_unknown(s, "solver", {"relative_tolerance", "max_iterations"});
    if (s.contains("relative_tolerance")) {
      cfg.map_relative_tolerance = as_positive(s["relative_tolerance"], "solver.relative_tolerance");
    }
    if (s.contains("max_iterations")) {
      cfg.map_max_iterations = as_int_at_least(s["max_iterations"], "solver.max_iterations", 1);
    }
  }
}

}  // namespace

RunConfig parse_run_config(const json& j) {
  if (j.is_object()) {
    reject_unknown(j, "", {"schema_version", "model", "nominal", "Y", "method", "n_pseudo", "n_samples", "seed",
                           "overrides", "ensemble", "threads", "reference_mu", "solver"});
  }
  RunConfig cfg;
  parse_run_fields(j, cfg);
  return cfg;
}

json to_json(const RunConfig& cfg) {
  json j;
  j["schema_version"] = cfg.schema_version;
  j["model"] = model_to_json(cfg.model);
  j["nominal"] = nominal_to_json(cfg.nominal);
  j["Y"] = {cfg.y_min, cfg.y_max};
  j["method"] = to_string(cfg.method);
  j["n_pseudo"] = cfg.n_pseudo;
  j["n_samples"] = cfg.n_samples;
  j["seed"] = cfg.seed;
  if (cfg.override_y || cfg.override_sigma_sq) {
    json o = json::object();
    if (cfg.override_y) o["y"] = *cfg.override_y;
    if (cfg.override_sigma_sq) o["sigma_sq"] = *cfg.override_sigma_sq;
    j["overrides"] = o;
  }
  j["ensemble"] = cfg.ensemble;
  j["threads"] = cfg.threads;
  if (cfg.reference_mu) j["reference_mu"] = *cfg.reference_mu;
  j["solver"] = {{"relative_tolerance", cfg.map_relative_tolerance}, {"max_iterations", cfg.map_max_iterations}};
  return j;
}

SweepSpec parse_sweep_spec(const json& j) {
  if (!j.is_object()) throw ConfigError("<root>", "expected an object");
  json base = j;
  const json& sweep = expect_object(require(j, "", "sweep"), "sweep");
  base.erase("sweep");
  SweepSpec spec;
  spec.base = parse_run_config(base);
  reject_unknown(sweep, "sweep", {"axis", "grid", "ensemble"});
  const json& axis = require(sweep, "sweep", "axis");
  if (!axis.is_string()) throw ConfigError("sweep.axis", "expected a string");
  spec.axis = sweep_axis_from_string(axis.get<std::string>());
  const json& grid = require(sweep, "sweep", "grid");
  if (!grid.is_array() || grid.empty()) throw ConfigError("sweep.grid", "expected a non-empty array");
  spec.grid = as_vector(grid, "sweep.grid");
  for (std::size_t i = 0; i < spec.grid.size(); ++i) {
    const std::string p = "sweep.grid[" + std::to_string(i) + "]";
    const double v = spec.grid[i];
    switch (spec.axis) {
      case SweepAxis::SigmaSq:
        if (!(v > 0.0)) throw ConfigError(p, "sigma_sq must be positive");
        break;
      case SweepAxis::NSamples:
      case SweepAxis::NPseudo:
        if (!(v >= 1.0) || v != std::floor(v)) throw ConfigError(p, "expected an integer >= 1");
        break;
      case SweepAxis::ProbabilityLevel:
        if (!(v > 0.0 && v < 1.0)) throw ConfigError(p, "probability level must be in (0, 1)");
        break;
    }
  }
  if (sweep.contains("ensemble")) spec.ensemble = as_int_at_least(sweep["ensemble"], "sweep.ensemble", 1);
  return spec;
}

json to_json(const SweepSpec& spec) {
  json j = to_json(spec.base);
  j["sweep"] = {{"axis", to_string(spec.axis)}, {"grid", spec.grid}, {"ensemble", spec.ensemble}};
  return j;
}

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path, "cannot open file");
  try {
    return json::parse(in, nullptr, true, true);
  } catch (const json::parse_error& e) {
    throw ConfigError(path, std::string("JSON syntax error: ") + e.what());
  }
}

namespace {

Vector broadcast_mean(const std::vector<double>& mean, Eigen::Index dim, const std::string& path) {
  if (mean.size() == 1) return Vector::Constant(dim, mean.front());
  if (static_cast<Eigen::Index>(mean.size()) != dim) {
    throw ConfigError(path, "length " + std::to_string(mean.size()) + " does not match model dimension " +
                                std::to_string(dim));
  }
  return Eigen::Map<const Vector>(mean.data(), dim);
}

Matrix build_cov(const CovarianceSpec& c, Eigen::Index dim, const std::string& path) {
  switch (c.kind) {
    case CovarianceSpec::Kind::Scalar:
      return c.scalar * Matrix::Identity(dim, dim);
    case CovarianceSpec::Kind::Diagonal: {
      if (c.diagonal.size() == 1) return c.diagonal.front() * Matrix::Identity(dim, dim);
      if (static_cast<Eigen::Index>(c.diagonal.size()) != dim) throw ConfigError(path, "diagonal length mismatch");
      return Eigen::Map<const Vector>(c.diagonal.data(), dim).asDiagonal();
    }
    case CovarianceSpec::Kind::Dense: {
      if (static_cast<Eigen::Index>(c.dense.size()) != dim) throw ConfigError(path, "dense size mismatch");
      Matrix m(dim, dim);
      for (Eigen::Index r = 0; r < dim; ++r) {
        for (Eigen::Index k = 0; k < dim; ++k) m(r, k) = c.dense[r][k];
      }
      return m;
    }
    case CovarianceSpec::Kind::PrecisionOperator:
      if (static_cast<Eigen::Index>(c.grid_n) * c.grid_n != dim) {
        throw ConfigError(path, "grid_n^2 does not match model dimension");
      }
      return smoothness_prior_covariance(c.grid_n, c.gamma, c.delta);
  }
  return {};
}

}  // namespace

Nominal build_nominal(const NominalSpec& spec, Eigen::Index dim) {
  const std::string root = spec.mixture ? "nominal.mixture.components" : "nominal.gaussian";
  std::vector<GaussianDensity> comps;
  std::vector<double> weights;
  for (std::size_t i = 0; i < spec.components.size(); ++i) {
    const auto& c = spec.components[i];
    const std::string p = spec.mixture ? root + "[" + std::to_string(i) + "]" : root;
    try {
      comps.emplace_back(broadcast_mean(c.mean, dim, join(p, "mean")), build_cov(c.cov, dim, join(p, "cov")));
    } catch (const InvalidArgument& e) {
      throw ConfigError(join(p, "cov"), e.what());
    }
    weights.push_back(c.weight);
  }
  if (!spec.mixture) return std::move(comps.front());
  return GaussianMixture(std::move(comps), std::move(weights));
}

TargetInterval target_interval(const RunConfig& cfg) { return TargetInterval(cfg.y_min, cfg.y_max); }

BimcOptions bimc_options(const RunConfig& cfg) {
  BimcOptions o;
  o.n_pseudo = cfg.n_pseudo;
  o.y_override = cfg.override_y;
  o.sigma_sq_override = cfg.override_sigma_sq;
  o.map.relative_tolerance = cfg.map_relative_tolerance;
  o.map.max_iterations = cfg.map_max_iterations;
  o.sampling.seed = cfg.seed;
  o.sampling.threads = cfg.threads;
  return o;
}

namespace {

ComponentSpec gaussian(std::vector<double> mean, CovarianceSpec cov) { return ComponentSpec{1.0, std::move(mean), cov}; }

CovarianceSpec scalar_cov(double s) {
  CovarianceSpec c;
  c.scalar = s;
  return c;
}

}  // namespace

RunConfig default_config(const std::string& name) {
  RunConfig cfg;
  cfg.model.name = name;
  if (name == "affine") {
    cfg.model.m = 2;
    cfg.nominal.components = {gaussian({1.0, 1.0}, scalar_cov(0.1))};
    cfg.y_min = 1.2803;
    cfg.y_max = 1.4571;
  } else if (name == "rank1") {
    cfg.model.m = 10;
    cfg.model.seed = 6601;
    cfg.nominal.components = {gaussian({1.0}, scalar_cov(0.01))};
    cfg.y_min = 1.24;
    cfg.y_max = 1.25;
  } else if (name == "reaction") {
    cfg.model.m = 1;
    cfg.model.t_final = 0.25;
    cfg.model.step_count = 1000;
    cfg.nominal.components = {gaussian({0.5}, scalar_cov(0.01))};
    cfg.y_min = 0.7;
    cfg.y_max = 0.8;
  } else if (name == "lorenz") {
    cfg.model.m = 3;
    cfg.model.t_final = 0.1;
    cfg.model.step_count = 1000;
    CovarianceSpec c;
    c.kind = CovarianceSpec::Kind::Diagonal;
    c.diagonal = {0.01508870, 0.01531271, 0.02546091};
    cfg.nominal.components = {gaussian({1.508870, -1.531271, 25.46091}, c)};
    cfg.y_min = -5.0;
    cfg.y_max = -4.0;
  } else if (name == "periodic") {
    cfg.model.m = 2;
    cfg.nominal.components = {gaussian({1.0, 1.0}, scalar_cov(1.0))};
    cfg.y_min = 0.4;
    cfg.y_max = 0.6;
  } else if (name == "elliptic-fd") {
    cfg.model.m = 2;
    cfg.model.grid_n = 17;
    CovarianceSpec c;
    c.kind = CovarianceSpec::Kind::PrecisionOperator;
    c.gamma = 0.1;
    c.delta = 0.5;
    c.grid_n = 17;
    cfg.nominal.components = {gaussian({0.0}, c)};
    cfg.y_min = 0.565;
    cfg.y_max = 0.585;
  } else {
    throw InvalidArgument("unknown model '" + name + "'");
  }
  return cfg;
}

}  // namespace bimc
