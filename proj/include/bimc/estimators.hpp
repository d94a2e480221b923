#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "bimc/gaussian.hpp"
#include "bimc/inverse.hpp"
#include "bimc/models.hpp"
#include "bimc/tuning.hpp"

namespace bimc {

using Nominal = std::variant<GaussianDensity, GaussianMixture>;

enum class Method { MC, IS, BIMC };

std::string to_string(Method m);
Method method_from_string(const std::string& s);

/// Sampling is split into fixed-size blocks; block b draws from
/// RandomStream::substream(seed, b) and block results are merged in block
/// order, so the estimate does not depend on the number of threads.
struct SamplingOptions {
  std::uint64_t seed = 0;
  unsigned threads = 1;
  std::size_t block_size = 1024;
};

/// Tuning summary attached to BIMC reports, one per nominal component.
struct TuningRecord {
  TunedParams tuned;
  std::vector<double> pseudo_data;
  double sigma_sq = 0.0;
  double weight = 1.0;
};

struct EstimateReport {
  Method method = Method::MC;
  double mu_hat = 0.0;
  /// Single-run estimate of the relative RMSE; empty when undefined (no hits).
  std::optional<double> rel_rmse_hat;
  double std_error = 0.0;
  double acceptance_ratio = 0.0;
  std::uint64_t hits = 0;
  double ess = 0.0;
  std::uint64_t n_samples = 0;
  std::uint64_t n_model_evals = 0;
  /// Samples outside the model's input domain; counted as misses unevaluated.
  std::uint64_t n_domain_rejections = 0;
  std::uint64_t seed = 0;
  int n_pseudo = 0;
  std::vector<TuningRecord> tuning;
  std::vector<std::string> diagnostics;

  bool zero_hits() const noexcept { return hits == 0; }
};

/// Plain Monte Carlo: fraction of nominal samples whose output lands in Y.
EstimateReport mc_estimate(const ForwardModel& model, const Nominal& nominal, const TargetInterval& interval,
                           std::uint64_t n_samples, const SamplingOptions& options);

/// Importance sampling with density q; weights 1_Y(f) p/q computed in log space.
EstimateReport is_estimate(const ForwardModel& model, const Nominal& nominal, const Nominal& q,
                           const TargetInterval& interval, std::uint64_t n_samples, const SamplingOptions& options);

struct BimcOptions {
  int n_pseudo = 1;
  /// Fixed pseudo-data (n_pseudo == 1 only); bypasses the tuned y*.
  std::optional<double> y_override;
  /// Fixed pseudo-likelihood variance; bypasses the tuned sigma*^2.
  std::optional<double> sigma_sq_override;
  MapOptions map;
  SamplingOptions sampling;
};

struct BimcDensity {
  GaussianMixture q;
  TunedParams tuned;
  std::vector<double> pseudo_data;
  double sigma_sq;
  std::vector<LaplaceApprox> components;
};

/// Tuning plus one Laplace approximation per pseudo-data point, collected
/// into an equal-weight mixture.
BimcDensity build_bimc_density(const ForwardModel& model, const GaussianDensity& prior,
                               const TargetInterval& interval, const BimcOptions& options);

/// Full BIMC run. A mixture nominal is handled component by component with the
/// sample budget split in proportion to the weights (at least 100 per
/// component with positive weight); mu = sum w_i mu_i.
EstimateReport bimc_estimate(const ForwardModel& model, const Nominal& nominal, const TargetInterval& interval,
                             std::uint64_t n_samples, const BimcOptions& options);

}  // namespace bimc
