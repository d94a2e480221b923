#pragma once

#include <functional>
#include <optional>
#include <string>

#include "bimc/gaussian.hpp"
#include "bimc/models.hpp"

namespace bimc {

/// Pseudo-likelihood N(f(x), sigma_sq) centred on the pseudo-data y.
struct PseudoLikelihood {
  double y;
  double sigma_sq;

  PseudoLikelihood(double y_, double sigma_sq_);
};

struct SolverReport {
  int iterations = 0;
  double grad_norm = 0.0;
  double initial_grad_norm = 0.0;
  double tolerance = 0.0;
  double objective = 0.0;
  bool converged = false;
  std::string message;
};

struct MapOptions {
  double relative_tolerance = 1e-8;
  /// When the line search can make no further progress, the iterate is still
  /// accepted as converged if the gradient is below this relative tolerance.
  double stall_tolerance = 1e-5;
  int max_iterations = 500;
  double armijo_c = 1e-4;
  int max_backtracks = 60;
  /// Box to project iterates onto; defaults to the model's domain.
  std::optional<Box> bounds;
  /// Called with every accepted objective value (diagnostics and tests).
  std::function<void(double)> on_accept;
};

struct MapResult {
  Vector map_point;
  SolverReport report;
};

/// Gaussian approximation N(x_MAP, H_GN^{-1}) of the pseudo-posterior.
struct LaplaceApprox {
  Vector map_point;
  Matrix gn_hessian;
  GaussianDensity density;
  SolverReport report;
};

/// (y - f(x))^2 / (2 sigma^2) + |x - x0|^2_{Sigma0^{-1}} / 2; the prior's
/// normalising constant is dropped.
double neg_log_posterior(const ForwardModel& model, const GaussianDensity& prior, const PseudoLikelihood& lik,
                         const Vector& x);

/// -(y - f(x)) / sigma^2 grad f(x) + Sigma0^{-1} (x - x0).
Vector nlp_gradient(const ForwardModel& model, const GaussianDensity& prior, const PseudoLikelihood& lik,
                    const Vector& x);

/// Dense BFGS with Armijo backtracking (halving). Stops when the (projected)
/// gradient norm falls below tol * max(1, |grad at x_init|), or after
/// max_iterations, in which case the report is flagged not converged.
MapResult find_map(const ForwardModel& model, const GaussianDensity& prior, const PseudoLikelihood& lik,
                   const Vector& x_init, const MapOptions& options = {});

/// (1/sigma^2) grad f grad f' + Sigma0^{-1}.
Matrix gauss_newton_hessian(const ForwardModel& model, const GaussianDensity& prior, const PseudoLikelihood& lik,
                            const Vector& x_map);

/// Same, for a gradient already in hand.
Matrix gauss_newton_hessian(const Vector& model_gradient, const GaussianDensity& prior, double sigma_sq);

/// find_map followed by the Gauss-Newton Hessian and its inverse. Throws
/// SolverError (carrying the report text) if the optimizer did not converge.
LaplaceApprox laplace_approximation(const ForwardModel& model, const GaussianDensity& prior,
                                    const PseudoLikelihood& lik, const Vector& x_init,
                                    const MapOptions& options = {});

/// Exact posterior for f(x) = v'x + beta: no optimizer involved.
LaplaceApprox affine_laplace_closed_form(const Vector& v, double beta, const GaussianDensity& prior,
                                         const PseudoLikelihood& lik);

std::string describe(const SolverReport& report);

}  // namespace bimc
