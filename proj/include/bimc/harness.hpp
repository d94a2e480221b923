#pragma once

#include <atomic>
#include <exception>
#include <optional>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

#include "bimc/config.hpp"
#include "bimc/estimators.hpp"

namespace bimc {

/// Runs f(0), ..., f(n-1) on up to `threads` workers. If any call throws, the
/// exception from the lowest failing index is rethrown after all workers stop.
template <typename F>
void parallel_for(std::size_t n, unsigned threads, F&& f) {
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (std::size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) {
      try {
        f(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const unsigned t = static_cast<unsigned>(std::min<std::size_t>(std::max(1u, threads), n));
  if (t <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned k = 0; k < t; ++k) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

/// Number of hardware threads, at least one.
unsigned hardware_threads();

EstimateReport run_estimate(const RunConfig& cfg);

/// Runs the configured method with an already constructed model and nominal.
EstimateReport run_estimate(const RunConfig& cfg, const ForwardModel& model, const Nominal& nominal);

/// Replicate r uses seed mix_seed(cfg.seed, r); results are ordered by r.
std::vector<EstimateReport> run_ensemble(const RunConfig& cfg, int replicates, unsigned threads);
std::vector<EstimateReport> run_ensemble(const RunConfig& cfg, const ForwardModel& model, const Nominal& nominal,
                                         int replicates, unsigned threads);

/// Exact probability when the model is affine and the nominal a single Gaussian.
std::optional<double> analytic_reference(const RunConfig& cfg);

struct EnsembleSummary {
  std::size_t runs = 0;
  double mean_mu_hat = 0.0;
  double ensemble_rel_rmse = 0.0;
  double mean_rel_rmse_hat = 0.0;
  double mean_acceptance_ratio = 0.0;
  double reference_mu = 0.0;
  std::string reference_source;
};

/// Ensemble statistics. Without a reference the ensemble mean is used, so the
/// relative RMSE becomes the relative standard deviation.
/// Reference probability for ensemble errors: `reference_mu` from the config when
/// set ("config"), otherwise the exact value for affine models ("analytic").
struct Reference {
  double mu;
  std::string source;
};

std::optional<Reference> resolve_reference(const RunConfig& cfg, const ForwardModel& model, const Nominal& nominal);

/// Without a reference the ensemble mean stands in ("ensemble_mean").
EnsembleSummary summarize(const std::vector<EstimateReport>& runs, const std::optional<Reference>& reference);

struct SweepRow {
  std::size_t grid_index = 0;
  SweepAxis axis = SweepAxis::SigmaSq;
  double value = 0.0;
  bool ok = false;
  std::string error;
  EnsembleSummary summary;
};

/// One row per grid value, in grid order. Failing cells become error rows.
std::vector<SweepRow> run_sweep(const SweepSpec& spec, unsigned threads);

void write_sweep_csv(std::ostream& os, const std::vector<SweepRow>& rows);

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

/// Gradient and oracle self-tests run by `bimc check`.
std::vector<CheckResult> run_self_checks();

}  // namespace bimc
