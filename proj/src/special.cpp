#include <cmath>
#include <limits>
#include <numbers>

#include "bimc/gaussian.hpp"

namespace bimc {

namespace {

constexpr double kInvSqrtPi = 0.56418958354775628694807945156077;   // 1/sqrt(pi)
constexpr double kSqrtTwoOverPi = 0.79788456080286535587989211986876;  // sqrt(2/pi)
constexpr double kInvSqrtTwo = 0.70710678118654752440084436210485;

// Laplace continued fraction for erfc, evaluated bottom-up:
//   sqrt(pi) exp(t^2) erfc(t) = 1/(t + (1/2)/(t + 1/(t + (3/2)/(t + ...))))
// 60 levels reach full double precision for t >= 2.
double erfcx_continued_fraction(double t) {
  double acc = t;
  for (int k = 60; k >= 1; --k) acc = t + (0.5 * k) / acc;
  return kInvSqrtPi / acc;
}

// exp(t^2) with the rounding error of t*t folded back in.
double exp_square(double t) {
  const double hi = t * t;
  const double lo = std::fma(t, t, -hi);
  return std::exp(hi) * (1.0 + lo);
}

// Standardized moments of N(0,1) restricted to [a, b] with 0 <= a < b.
struct StdMoments {
  double mean;
  double var;
  double log_mass;
};

StdMoments upper_tail_moments(double a, double b) {
  const double ea = erfcx(a * kInvSqrtTwo);
  const double eb = erfcx(b * kInvSqrtTwo);
  // D = phi(b)/phi(a)
  const double expo = -0.5 * (b - a) * (b + a);
  const double d = std::exp(expo);
  const double one_minus_d = -std::expm1(expo);
  // erfcx(a') - D erfcx(b') as a sum of two nonnegative parts.
  const double den = (ea - eb) + one_minus_d * eb;
  const double log_mass = -0.5 * a * a + std::log(0.5 * den);
  if (!(den > 0.0) || !std::isfinite(den)) {
    throw TailOverflow("truncated normal: interval mass lost to cancellation");
  }
  const double mean = kSqrtTwoOverPi * one_minus_d / den;
  const double pdf_b_over_mass = kSqrtTwoOverPi * d / den;
  const double var = 1.0 - mean * (mean - a) - (b - a) * pdf_b_over_mass;
  return {mean, var, log_mass};
}

StdMoments straddling_moments(double a, double b) {
  const double mass = 0.5 * (std::erf(b * kInvSqrtTwo) + std::erf(-a * kInvSqrtTwo));
  const double pa = std::exp(-0.5 * a * a) * kInvSqrtPi * kInvSqrtTwo;
  const double pb = std::exp(-0.5 * b * b) * kInvSqrtPi * kInvSqrtTwo;
  const double mean = (pa - pb) / mass;
  const double var = 1.0 + (a * pa - b * pb) / mass - mean * mean;
  return {mean, var, std::log(mass)};
}

StdMoments standardized_moments(double a, double b) {
  if (a >= 0.0) return upper_tail_moments(a, b);
  if (b <= 0.0) {
    StdMoments mirrored = upper_tail_moments(-b, -a);
    mirrored.mean = -mirrored.mean;
    return mirrored;
  }
  return straddling_moments(a, b);
}

}  // namespace

double erfcx(double t) {
  if (std::isnan(t)) return t;
  if (t < 0.0) {
    if (t < -26.7) return std::numeric_limits<double>::infinity();
    return 2.0 * exp_square(t) - erfcx(-t);
  }
  if (t < 2.0) return exp_square(t) * std::erfc(t);
  return erfcx_continued_fraction(t);
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z * kInvSqrtTwo); }

double standard_normal_mass(double a, double b) {
  if (!(a < b)) throw InvalidArgument("standard_normal_mass: requires a < b");
  if (a >= 0.0) return 0.5 * (std::erfc(a * kInvSqrtTwo) - std::erfc(b * kInvSqrtTwo));
  if (b <= 0.0) return 0.5 * (std::erfc(-b * kInvSqrtTwo) - std::erfc(-a * kInvSqrtTwo));
  return 0.5 * (std::erf(b * kInvSqrtTwo) + std::erf(-a * kInvSqrtTwo));
}

TruncatedMoments truncated_normal_moments(double nu, double gamma_sq, const TargetInterval& interval) {
  if (!(gamma_sq > 0.0) || !std::isfinite(gamma_sq)) {
    throw InvalidArgument("truncated_normal_moments: variance must be positive and finite");
  }
  if (!std::isfinite(nu)) throw InvalidArgument("truncated_normal_moments: non-finite mean");
  const double gamma = std::sqrt(gamma_sq);
  const double a = (interval.lower() - nu) / gamma;
  const double b = (interval.upper() - nu) / gamma;
  if (!(a < b)) throw InvalidArgument("truncated_normal_moments: interval has zero standardized width");

  const StdMoments s = standardized_moments(a, b);
  if (s.log_mass < std::log(std::numeric_limits<double>::min())) {
    throw TailOverflow("truncated normal: interval lies " + std::to_string(std::min(std::abs(a), std::abs(b))) +
                       " standard deviations into the tail; its mass underflows double precision");
  }
  if (!std::isfinite(s.mean) || !(s.var > 0.0) || !(s.var <= 1.0)) {
    throw TailOverflow("truncated normal: moments lost to round-off");
  }
  return {nu + gamma * s.mean, gamma_sq * s.var};
}

}  // namespace bimc
