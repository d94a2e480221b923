#include <cmath>
#include <numbers>
#include <vector>

#include "bimc/gaussian.hpp"
#include "bimc/random.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace bimc;

TEST_CASE("random stream is reproducible and substreams differ") {
  RandomStream a(42), b(42), c = RandomStream::substream(42, 1);
  bool differs = false;
  for (int i = 0; i < 100; ++i) {
    const double x = a.normal();
    CHECK(x == b.normal());
    differs = differs || x != c.normal();
  }
  CHECK(differs);
  CHECK(mix_seed(1, 2) != mix_seed(2, 1));
}

TEST_CASE("uniform variates lie in the open unit interval with the right moments") {
  RandomStream rng(7);
  const int n = 200000;
  double s = 0.0, s2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform();
    REQUIRE(u > 0.0);
    REQUIRE(u < 1.0);
    s += u;
    s2 += u * u;
  }
  CHECK(s / n == doctest::Approx(0.5).epsilon(0.01));
  CHECK(s2 / n - (s / n) * (s / n) == doctest::Approx(1.0 / 12).epsilon(0.02));
}

TEST_CASE("normal variates have zero mean, unit variance and zero skew") {
  RandomStream rng(11);
  const int n = 400000;
  double s = 0.0, s2 = 0.0, s3 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double z = rng.normal();
    s += z;
    s2 += z * z;
    s3 += z * z * z;
  }
  CHECK(std::abs(s / n) < 5.0 / std::sqrt(n));
  CHECK(s2 / n == doctest::Approx(1.0).epsilon(0.01));
  CHECK(std::abs(s3 / n) < 0.02);
}

namespace {

Matrix random_spd(int m, RandomStream& rng) {
  Matrix g(m, m);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) g(i, j) = rng.normal();
  return g * g.transpose() / m + 0.5 * Matrix::Identity(m, m);
}

// Density evaluated through an LU inverse and determinant, independent of the
// Cholesky path under test.
double dense_logpdf(const Vector& mean, const Matrix& cov, const Vector& x) {
  const Eigen::FullPivLU<Matrix> lu(cov);
  const Vector d = x - mean;
  return -0.5 * d.dot(lu.inverse() * d) - 0.5 * std::log(lu.determinant()) -
         0.5 * mean.size() * std::log(2 * std::numbers::pi);
}

}  // namespace

TEST_CASE("GaussianDensity logpdf matches a dense-inverse evaluation") {
  RandomStream rng(3);
  for (int m : {1, 2, 5, 12}) {
    const Matrix cov = random_spd(m, rng);
    Vector mean(m);
    for (int i = 0; i < m; ++i) mean(i) = rng.normal();
    const GaussianDensity p(mean, cov);
    CHECK_FALSE(p.jittered());
    for (int k = 0; k < 5; ++k) {
      Vector x(m);
      for (int i = 0; i < m; ++i) x(i) = mean(i) + 2 * rng.normal();
      CHECK(p.logpdf(x) == doctest::Approx(dense_logpdf(mean, cov, x)).epsilon(1e-11));
    }
    const Vector v = Vector::LinSpaced(m, 1.0, 2.0);
    CHECK(p.quadratic_form(v) == doctest::Approx(v.dot(cov * v)).epsilon(1e-12));
    CHECK((p.precision() * cov - Matrix::Identity(m, m)).norm() < 1e-10);
  }
}

TEST_CASE("GaussianDensity samples reproduce the mean and covariance") {
  RandomStream rng(5);
  const Matrix cov = random_spd(3, rng);
  const Vector mean = Vector::LinSpaced(3, -1.0, 1.0);
  const GaussianDensity p(mean, cov);
  const int n = 200000;
  Vector s = Vector::Zero(3);
  Matrix s2 = Matrix::Zero(3, 3);
  for (int i = 0; i < n; ++i) {
    const Vector x = p.sample(rng);
    s += x;
    s2 += x * x.transpose();
  }
  const Vector m_hat = s / n;
  const Matrix c_hat = s2 / n - m_hat * m_hat.transpose();
  CHECK((m_hat - mean).norm() < 0.02);
  CHECK((c_hat - cov).norm() / cov.norm() < 0.02);
}

TEST_CASE("GaussianDensity rejects bad covariances and jitters semi-definite ones") {
  Matrix asym(2, 2);
  asym << 1.0, 0.5, 0.0, 1.0;
  CHECK_THROWS_AS(GaussianDensity(Vector::Zero(2), asym), InvalidArgument);
  CHECK_THROWS_AS(GaussianDensity(Vector::Zero(3), Matrix::Identity(2, 2)), InvalidArgument);
  Matrix singular(2, 2);
  singular << 1.0, 1.0, 1.0, 1.0;
  const GaussianDensity p(Vector::Zero(2), singular);
  CHECK(p.jittered());
  Matrix indefinite(2, 2);
  indefinite << 1.0, 0.0, 0.0, -1.0;
  CHECK_THROWS_AS(GaussianDensity(Vector::Zero(2), indefinite), InvalidArgument);
  CHECK_THROWS_AS(p.logpdf(Vector::Zero(3)), InvalidArgument);
}

TEST_CASE("mixture logpdf is the log of the weighted sum of component densities") {
  const GaussianDensity a = GaussianDensity::isotropic(Vector::Constant(2, -1.0), 0.5);
  const GaussianDensity b = GaussianDensity::isotropic(Vector::Constant(2, 2.0), 2.0);
  const GaussianMixture mix({a, b}, {0.3, 0.7});
  for (double t : {-3.0, -1.0, 0.0, 1.5, 40.0}) {
    const Vector x = Vector::Constant(2, t);
    const double expected = std::log(0.3 * std::exp(a.logpdf(x)) + 0.7 * std::exp(b.logpdf(x)));
    if (expected > -600.0) CHECK(mix.logpdf(x) == doctest::Approx(expected).epsilon(1e-12));
    CHECK(std::isfinite(mix.logpdf(x)));
  }
  const GaussianMixture single(a);
  CHECK(single.logpdf(Vector::Ones(2)) == a.logpdf(Vector::Ones(2)));
}

TEST_CASE("mixture validation and sampling") {
  const GaussianDensity a = GaussianDensity::isotropic(Vector::Zero(1), 1.0);
  const GaussianDensity far = GaussianDensity::isotropic(Vector::Constant(1, 100.0), 1.0);
  CHECK_THROWS_AS(GaussianMixture({}, {}), InvalidArgument);
  CHECK_THROWS_AS(GaussianMixture({a, far}, {0.5}), InvalidArgument);
  CHECK_THROWS_AS(GaussianMixture({a, far}, {1.5, -0.5}), InvalidArgument);
  CHECK_THROWS_AS(GaussianMixture({a, far}, {0.5, 0.4}), InvalidArgument);
  CHECK_THROWS_AS(GaussianMixture({a, GaussianDensity::isotropic(Vector::Zero(2), 1.0)}, {0.5, 0.5}),
                  InvalidArgument);

  const GaussianMixture zero_weight({a, far}, {1.0, 0.0});
  RandomStream rng(9);
  for (int i = 0; i < 10000; ++i) REQUIRE(zero_weight.sample(rng)(0) < 50.0);

  const GaussianMixture mix({a, far}, {0.25, 0.75});
  int high = 0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) high += mix.sample(rng)(0) > 50.0;
  CHECK(static_cast<double>(high) / n == doctest::Approx(0.75).epsilon(0.01));
}

TEST_CASE("erfcx matches a long-double oracle") {
  double worst = 0.0;
  for (int i = 0; i <= 3000; ++i) {
    const double t = 0.01 * i;
    worst = std::max(worst, oracle::rel_err(erfcx(t), oracle::erfcx(t)));
  }
  CHECK(worst <= 1e-13);
  for (double t : {-0.5, -2.0, -5.0, -20.0}) CHECK(oracle::rel_err(erfcx(t), oracle::erfcx(t)) <= 1e-13);
  CHECK(std::isinf(erfcx(-30.0)));
  CHECK(erfcx(1e300) > 0.0);
}

TEST_CASE("standard normal mass is accurate in both tails and across zero") {
  const double cases[][2] = {{3.0, 4.0}, {-4.0, -3.0}, {-1.0, 2.0}, {10.0, 10.5}, {-30.0, -29.0}, {0.0, 0.1}};
  for (const auto& c : cases) {
    CHECK(oracle::rel_err(standard_normal_mass(c[0], c[1]), oracle::normal_mass(c[0], c[1])) <= 1e-13);
  }
  CHECK(normal_cdf(0.0) == 0.5);
}

TEST_CASE("truncated moments agree with quadrature in the interior") {
  const double cases[][4] = {{0.0, 1.0, -1.0, 1.0}, {0.75, 0.03125, 1.2803, 1.4571}, {2.0, 4.0, -3.0, 0.5},
                             {-1.0, 0.25, -1.1, -0.2}, {0.0, 1.0, 2.0, 5.0}};
  for (const auto& c : cases) {
    const TruncatedMoments tm = truncated_normal_moments(c[0], c[1], TargetInterval(c[2], c[3]));
    const oracle::Moments ref = oracle::truncated_moments(c[0], c[1], c[2], c[3]);
    CHECK(oracle::rel_err(tm.nu_T, ref.mean, std::sqrt(c[1])) <= 1e-10);
    CHECK(oracle::rel_err(tm.gamma_T_sq, ref.var) <= 1e-10);
  }
}

TEST_CASE("truncated moments agree with quadrature 8 to 30 standard deviations out") {
  for (double a : {8.0, 12.0, 20.0, 30.0}) {
    for (double width : {0.01, 0.5, 3.0}) {
      for (double sign : {1.0, -1.0}) {
        const double lo = sign > 0 ? a : -a - width;
        const double hi = sign > 0 ? a + width : -a;
        const TruncatedMoments tm = truncated_normal_moments(0.0, 1.0, TargetInterval(lo, hi));
        const oracle::Moments ref = oracle::truncated_moments(0.0, 1.0, lo, hi);
        CHECK(oracle::rel_err(tm.nu_T, ref.mean) <= 1e-6);
        CHECK(oracle::rel_err(tm.gamma_T_sq, ref.var) <= 1e-6);
      }
    }
  }
}

TEST_CASE("truncated moments beyond double range raise TailOverflow") {
  CHECK_THROWS_AS(truncated_normal_moments(0.0, 1.0, TargetInterval(40.0, 41.0)), TailOverflow);
  CHECK_THROWS_AS(truncated_normal_moments(0.0, -1.0, TargetInterval(0.0, 1.0)), InvalidArgument);
}
