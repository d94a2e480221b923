#include "bimc/gaussian.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

namespace bimc {

namespace {

constexpr double kLogTwoPi = 1.8378770664093454835606594728112;

bool try_cholesky(const Matrix& cov, Matrix& out) {
  Eigen::LLT<Matrix> llt(cov);
  if (llt.info() != Eigen::Success) return false;
  out = llt.matrixL();
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    if (!(out(i, i) > 0.0) || !std::isfinite(out(i, i))) return false;
  }
  return true;
}

}  // namespace

GaussianDensity::GaussianDensity(Vector mean, Matrix cov) : mean_(std::move(mean)), cov_(std::move(cov)) {
  const Eigen::Index m = mean_.size();
  if (m == 0) throw InvalidArgument("gaussian: empty mean");
  if (cov_.rows() != m || cov_.cols() != m) {
    throw InvalidArgument("gaussian: covariance is " + std::to_string(cov_.rows()) + "x" +
                          std::to_string(cov_.cols()) + ", mean has length " + std::to_string(m));
  }
  if (!mean_.allFinite() || !cov_.allFinite()) throw InvalidArgument("gaussian: non-finite parameters");
  const double scale = cov_.cwiseAbs().maxCoeff();
  const double asym = (cov_ - cov_.transpose()).cwiseAbs().maxCoeff();
  if (asym > 1e-12 * scale) throw InvalidArgument("gaussian: covariance not symmetric");
  cov_ = 0.5 * (cov_ + cov_.transpose());

  if (!try_cholesky(cov_, chol_)) {
    const double jitter = 1e-12 * cov_.trace() / static_cast<double>(m);
    Matrix shifted = cov_;
    shifted.diagonal().array() += jitter;
    if (!(jitter > 0.0) || !try_cholesky(shifted, chol_)) {
      throw InvalidArgument("gaussian: covariance is not positive definite");
    }
    cov_ = std::move(shifted);
    jittered_ = true;
  }
  log_det_ = 2.0 * chol_.diagonal().array().log().sum();
}

GaussianDensity GaussianDensity::isotropic(Vector mean, double variance) {
  const auto m = mean.size();
  return GaussianDensity(std::move(mean), variance * Matrix::Identity(m, m));
}

void GaussianDensity::check_dim(const Vector& x) const {
  if (x.size() != mean_.size()) {
    throw InvalidArgument("gaussian: point has dimension " + std::to_string(x.size()) + ", density has " +
                          std::to_string(mean_.size()));
  }
}

double GaussianDensity::logpdf(const Vector& x) const {
  check_dim(x);
  return -0.5 * static_cast<double>(dim()) * kLogTwoPi - 0.5 * log_det_ - 0.5 * mahalanobis_sq(x - mean_);
}

Vector GaussianDensity::sample(RandomStream& rng) const {
  Vector z(dim());
  for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = rng.normal();
  return mean_ + chol_.triangularView<Eigen::Lower>() * z;
}

Vector GaussianDensity::precision_times(const Vector& d) const {
  check_dim(d);
  Vector w = chol_.triangularView<Eigen::Lower>().solve(d);
  return chol_.transpose().triangularView<Eigen::Upper>().solve(w);
}

Matrix GaussianDensity::precision() const {
  Matrix linv = chol_.triangularView<Eigen::Lower>().solve(Matrix::Identity(dim(), dim()));
  Matrix p = linv.transpose() * linv;
  return 0.5 * (p + p.transpose());
}

double GaussianDensity::quadratic_form(const Vector& v) const {
  check_dim(v);
  return (chol_.transpose() * v).squaredNorm();
}

double GaussianDensity::mahalanobis_sq(const Vector& d) const {
  check_dim(d);
  return chol_.triangularView<Eigen::Lower>().solve(d).squaredNorm();
}

// ---------------------------------------------------------------------------

GaussianMixture::GaussianMixture(std::vector<GaussianDensity> components, std::vector<double> weights)
    : components_(std::move(components)), weights_(std::move(weights)) {
  if (components_.empty()) throw InvalidArgument("mixture: no components");
  if (weights_.size() != components_.size()) throw InvalidArgument("mixture: weight count mismatch");
  for (const auto& c : components_) {
    if (c.dim() != components_.front().dim()) throw InvalidArgument("mixture: component dimensions differ");
  }
  double total = 0.0;
  for (double w : weights_) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw InvalidArgument("mixture: weights must be finite and nonnegative");
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-9) throw InvalidArgument("mixture: weights sum to " + std::to_string(total));
  for (double& w : weights_) w /= total;
  cumulative_.resize(weights_.size());
  std::partial_sum(weights_.begin(), weights_.end(), cumulative_.begin());
}

GaussianMixture::GaussianMixture(GaussianDensity single)
    : GaussianMixture(std::vector<GaussianDensity>{std::move(single)}, std::vector<double>{1.0}) {}

GaussianMixture GaussianMixture::uniform(std::vector<GaussianDensity> components) {
  const std::size_t n = components.size();
  if (n == 0) throw InvalidArgument("mixture: no components");
  return GaussianMixture(std::move(components), std::vector<double>(n, 1.0 / static_cast<double>(n)));
}

double GaussianMixture::logpdf(const Vector& x) const {
  if (components_.size() == 1) return components_.front().logpdf(x);
  std::vector<double> terms;
  terms.reserve(components_.size());
  double peak = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < components_.size(); ++i) {
    if (weights_[i] == 0.0) continue;
    terms.push_back(std::log(weights_[i]) + components_[i].logpdf(x));
    peak = std::max(peak, terms.back());
  }
  if (!std::isfinite(peak)) return peak;
  double acc = 0.0;
  for (double t : terms) acc += std::exp(t - peak);
  return peak + std::log(acc);
}

Vector GaussianMixture::sample(RandomStream& rng) const {
  if (components_.size() == 1) return components_.front().sample(rng);
  const double u = rng.uniform();
  std::size_t idx = 0;
  while (idx + 1 < cumulative_.size() && (u >= cumulative_[idx] || weights_[idx] == 0.0)) ++idx;
  while (weights_[idx] == 0.0 && idx > 0) --idx;
  return components_[idx].sample(rng);
}

}  // namespace bimc
