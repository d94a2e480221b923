#pragma once

#include <string>
#include <vector>

#include "bimc/gaussian.hpp"
#include "bimc/inverse.hpp"
#include "bimc/models.hpp"

namespace bimc {

/// Mean and variance of f(x) = v'x + beta under the nominal Gaussian.
struct PushforwardMoments {
  double nu;
  double gamma_sq;
};

struct OptimalParams {
  double y_star;
  double sigma_star_sq;
  /// Set when gamma^2 - gamma_T^2 was too small for the closed form and the
  /// grid + golden-section minimizer was used instead.
  bool used_fallback = false;
};

/// Everything selected by the linearize-and-minimize-KL step.
struct TunedParams {
  double y_star = 0.0;
  double sigma_star_sq = 0.0;
  double mu_lin = 0.0;
  Vector v;
  double beta = 0.0;
  Vector x_map_mid;
  PushforwardMoments pushforward{0.0, 0.0};
  TruncatedMoments truncated{0.0, 0.0};
  double kl_at_optimum = 0.0;
  bool used_fallback = false;
  SolverReport mid_report;
};

PushforwardMoments pushforward_moments(const Vector& v, double beta, const GaussianDensity& prior);

/// Phi((y_max - nu)/gamma) - Phi((y_min - nu)/gamma), evaluated with erfc in
/// the stable tail direction. Throws TailOverflow if the result underflows.
double linearized_probability(const PushforwardMoments& pm, const TargetInterval& interval);

/// KL(q* || q) for the affine-Gaussian problem with pseudo-data y and
/// pseudo-likelihood variance sigma_sq.
double kl_divergence(double y, double sigma_sq, const PushforwardMoments& pm, const TruncatedMoments& tm,
                     double mu);

/// Closed-form minimizer of kl_divergence; falls back to a bounded numerical
/// search when gamma^2 - gamma_T^2 < 1e-12 gamma^2.
OptimalParams optimal_params(const PushforwardMoments& pm, const TruncatedMoments& tm,
                             const TargetInterval& interval);

/// Numerical minimizer used by the fallback path: a 200 x 200 grid over
/// y in `interval` and log sigma^2 in [log gamma^2 - 30, log gamma^2 + 10],
/// followed by alternating golden-section refinement.
OptimalParams grid_minimize_kl(const PushforwardMoments& pm, const TruncatedMoments& tm,
                               const TargetInterval& interval);

/// Linearizes f at the MAP point for (mid Y, (0.1 |Y|)^2), starting from the
/// prior mean, and selects (y*, sigma*^2) for the linearized problem.
TunedParams linearize_at_midpoint(const ForwardModel& model, const GaussianDensity& prior,
                                  const TargetInterval& interval, const MapOptions& options = {});

/// Tuning for a known affine map (no linearization needed).
TunedParams tune_affine(const Vector& v, double beta, const GaussianDensity& prior, const TargetInterval& interval);

/// n evenly spaced pseudo-data points in Y, endpoints included when n >= 2;
/// the midpoint when n == 1.
std::vector<double> pseudo_data_points(const TargetInterval& interval, int n);

enum class Tail { Upper, Lower };

std::string to_string(Tail t);
Tail tail_from_string(const std::string& s);

/// Places an interval of the given width in one tail of the pushforward
/// so that the linearized probability equals `target_mu`. The linearization
/// is refreshed at each new placement for `refinements` rounds.
TargetInterval place_target_interval(const ForwardModel& model, const GaussianDensity& prior, double width,
                                     double target_mu, Tail tail = Tail::Upper, int refinements = 4,
                                     const MapOptions& options = {});

}  // namespace bimc
