#pragma once

#include <vector>

#include "bimc/random.hpp"
#include "bimc/types.hpp"

namespace bimc {

/// Multivariate normal N(mean, cov) with a cached lower Cholesky factor.
///
/// Immutable after construction; safe to share between threads. The
/// covariance must be symmetric to 1e-12 relative. If the first factorization
/// fails a jitter of 1e-12 * trace / m is added to the diagonal once; a second
/// failure raises InvalidArgument.
class GaussianDensity {
 public:
  GaussianDensity(Vector mean, Matrix cov);

  /// N(mean, scale * I).
  static GaussianDensity isotropic(Vector mean, double variance);

  Eigen::Index dim() const noexcept { return mean_.size(); }
  const Vector& mean() const noexcept { return mean_; }
  const Matrix& cov() const noexcept { return cov_; }
  const Matrix& chol() const noexcept { return chol_; }
  bool jittered() const noexcept { return jittered_; }

  double logpdf(const Vector& x) const;
  Vector sample(RandomStream& rng) const;

  /// cov^{-1} * d
  Vector precision_times(const Vector& d) const;
  /// Dense precision matrix cov^{-1}.
  Matrix precision() const;
  /// v' cov v, computed as |chol' v|^2.
  double quadratic_form(const Vector& v) const;
  /// |chol^{-1} d|^2 = d' cov^{-1} d.
  double mahalanobis_sq(const Vector& d) const;
  double log_det() const noexcept { return log_det_; }

 private:
  void check_dim(const Vector& x) const;

  Vector mean_;
  Matrix cov_;
  Matrix chol_;
  double log_det_ = 0.0;
  bool jittered_ = false;
};

/// Finite mixture sum_i w_i N(mean_i, cov_i). Weights are nonnegative and sum
/// to one within 1e-12 (inputs within 1e-9 of unit sum are renormalized).
class GaussianMixture {
 public:
  GaussianMixture(std::vector<GaussianDensity> components, std::vector<double> weights);

  /// Single-component mixture.
  explicit GaussianMixture(GaussianDensity single);

  /// Equal-weight mixture.
  static GaussianMixture uniform(std::vector<GaussianDensity> components);

  std::size_t size() const noexcept { return components_.size(); }
  Eigen::Index dim() const noexcept { return components_.front().dim(); }
  const std::vector<GaussianDensity>& components() const noexcept { return components_; }
  const std::vector<double>& weights() const noexcept { return weights_; }
  const GaussianDensity& component(std::size_t i) const { return components_.at(i); }

  /// log sum_i w_i exp(logpdf_i(x)), max-shifted.
  double logpdf(const Vector& x) const;

  /// Draws a component index by weight, then samples it. A single-component
  /// mixture skips the index draw so it consumes the stream exactly like the
  /// component itself.
  Vector sample(RandomStream& rng) const;

 private:
  std::vector<GaussianDensity> components_;
  std::vector<double> weights_;
  std::vector<double> cumulative_;
};

// ---------------------------------------------------------------------------
// Scalar special functions

/// Scaled complementary error function exp(t^2) erfc(t).
double erfcx(double t);

/// Standard normal CDF.
double normal_cdf(double z);

/// Mean and variance of N(nu, gamma_sq) conditioned on an interval.
struct TruncatedMoments {
  double nu_T;
  double gamma_T_sq;
};

/// Moments of N(nu, gamma_sq) restricted to `interval`, via erfcx so that
/// truncation tens of standard deviations into the tail stays accurate.
/// Throws TailOverflow when the truncated mass underflows double precision.
TruncatedMoments truncated_normal_moments(double nu, double gamma_sq, const TargetInterval& interval);

/// P(a <= Z <= b) for standard normal Z, evaluated in the stable tail direction.
double standard_normal_mass(double a, double b);

}  // namespace bimc
