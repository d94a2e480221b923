#include "bimc/tuning.hpp"

#include <cmath>
#include <limits>

namespace bimc {

PushforwardMoments pushforward_moments(const Vector& v, double beta, const GaussianDensity& prior) {
  if (v.size() != prior.dim()) throw InvalidArgument("pushforward_moments: dimension mismatch");
  if (v.isZero(0.0)) throw InvalidArgument("pushforward_moments: v = 0, observation uninformative");
  const double gamma_sq = prior.quadratic_form(v);
  if (!(gamma_sq > 0.0)) throw InvalidArgument("pushforward_moments: degenerate pushforward variance");
  return {v.dot(prior.mean()) + beta, gamma_sq};
}

double linearized_probability(const PushforwardMoments& pm, const TargetInterval& interval) {
  if (!(pm.gamma_sq > 0.0)) throw InvalidArgument("linearized_probability: gamma^2 must be positive");
  const double gamma = std::sqrt(pm.gamma_sq);
  const double mu = standard_normal_mass((interval.lower() - pm.nu) / gamma, (interval.upper() - pm.nu) / gamma);
  if (!(mu > 0.0)) throw TailOverflow("linearized probability underflows double precision");
  return mu;
}

double kl_divergence(double y, double sigma_sq, const PushforwardMoments& pm, const TruncatedMoments& tm,
                     double mu) {
  const double dy_t = y - tm.nu_T;
  const double dy = y - pm.nu;
  const double log_rho = -0.5 * std::log1p(pm.gamma_sq / sigma_sq);
  return (dy_t * dy_t + tm.gamma_T_sq) / (2.0 * sigma_sq) - dy * dy / (2.0 * (sigma_sq + pm.gamma_sq)) + log_rho -
         std::log(mu);
}

namespace {

template <typename F>
double golden_section(F&& f, double lo, double hi, int iterations = 80) {
  constexpr double kInvPhi = 0.6180339887498948482;
  double a = lo, b = hi;
  double c = b - kInvPhi * (b - a);
  double d = a + kInvPhi * (b - a);
  double fc = f(c), fd = f(d);
  for (int i = 0; i < iterations; ++i) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - kInvPhi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + kInvPhi * (b - a);
      fd = f(d);
    }
  }
  return 0.5 * (a + b);
}

}  // namespace

OptimalParams grid_minimize_kl(const PushforwardMoments& pm, const TruncatedMoments& tm,
                               const TargetInterval& interval) {
  constexpr int kGrid = 200;
  const double ls_lo = std::log(pm.gamma_sq) - 30.0;
  const double ls_hi = std::log(pm.gamma_sq) + 10.0;
  const double dy = interval.width() / (kGrid - 1);
  const double dls = (ls_hi - ls_lo) / (kGrid - 1);
  const auto objective = [&](double y, double ls) { return kl_divergence(y, std::exp(ls), pm, tm, 1.0); };

  double best = std::numeric_limits<double>::infinity();
  double best_y = interval.midpoint(), best_ls = 0.5 * (ls_lo + ls_hi);
  for (int i = 0; i < kGrid; ++i) {
    const double y = interval.lower() + i * dy;
    for (int j = 0; j < kGrid; ++j) {
      const double ls = ls_lo + j * dls;
      const double v = objective(y, ls);
      if (v < best) {
        best = v;
        best_y = y;
        best_ls = ls;
      }
    }
  }
  for (int round = 0; round < 6; ++round) {
    best_y = golden_section([&](double y) { return objective(y, best_ls); }, std::max(interval.lower(), best_y - dy),
                            std::min(interval.upper(), best_y + dy));
    best_ls = golden_section([&](double ls) { return objective(best_y, ls); }, std::max(ls_lo, best_ls - dls),
                             std::min(ls_hi, best_ls + dls));
  }
  return {best_y, std::exp(best_ls), true};
}

OptimalParams optimal_params(const PushforwardMoments& pm, const TruncatedMoments& tm,
                             const TargetInterval& interval) {
  const double gap = pm.gamma_sq - tm.gamma_T_sq;
  if (!(gap >= 1e-12 * pm.gamma_sq)) return grid_minimize_kl(pm, tm, interval);
  const double y_star = tm.nu_T + (tm.nu_T - pm.nu) * tm.gamma_T_sq / gap;
  const double sigma_star_sq = tm.gamma_T_sq * pm.gamma_sq / gap;
  return {y_star, sigma_star_sq, false};
}

TunedParams tune_affine(const Vector& v, double beta, const GaussianDensity& prior, const TargetInterval& interval) {
  TunedParams t;
  t.v = v;
  t.beta = beta;
  t.pushforward = pushforward_moments(v, beta, prior);
  t.truncated = truncated_normal_moments(t.pushforward.nu, t.pushforward.gamma_sq, interval);
  const OptimalParams opt = optimal_params(t.pushforward, t.truncated, interval);
  t.y_star = opt.y_star;
  t.sigma_star_sq = opt.sigma_star_sq;
  t.used_fallback = opt.used_fallback;
  t.mu_lin = linearized_probability(t.pushforward, interval);
  t.kl_at_optimum = kl_divergence(t.y_star, t.sigma_star_sq, t.pushforward, t.truncated, t.mu_lin);
  t.x_map_mid = prior.mean();
  return t;
}

TunedParams linearize_at_midpoint(const ForwardModel& model, const GaussianDensity& prior,
                                  const TargetInterval& interval, const MapOptions& options) {
  const double sigma0 = 0.1 * interval.width();
  const PseudoLikelihood lik(interval.midpoint(), sigma0 * sigma0);
  MapResult mid = find_map(model, prior, lik, prior.mean(), options);
  if (!mid.report.converged) {
    throw SolverError("linearization MAP search did not converge: " + describe(mid.report));
  }
  const Vector v = model.grad(mid.map_point);
  const double f_mid = model.eval(mid.map_point);
  TunedParams t = tune_affine(v, f_mid - v.dot(mid.map_point), prior, interval);
  t.x_map_mid = std::move(mid.map_point);
  t.mid_report = std::move(mid.report);
  return t;
}

std::vector<double> pseudo_data_points(const TargetInterval& interval, int n) {
  if (n < 1) throw InvalidArgument("number of pseudo-data points must be >= 1");
  if (n == 1) return {interval.midpoint()};
  std::vector<double> ys(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    ys[static_cast<std::size_t>(i)] = interval.lower() + interval.width() * static_cast<double>(i) / (n - 1);
  }
  ys.back() = interval.upper();
  return ys;
}

namespace {

// Lower edge c with mass of N(nu, gamma^2) on [c, c + width] equal to target.
double solve_lower_edge(const PushforwardMoments& pm, double width, double target_mu) {
  const double gamma = std::sqrt(pm.gamma_sq);
  const double log_target = std::log(target_mu);
  const auto log_mass = [&](double c) {
    const double m = standard_normal_mass((c - pm.nu) / gamma, (c + width - pm.nu) / gamma);
    return m > 0.0 ? std::log(m) : -std::numeric_limits<double>::infinity();
  };
  double lo = pm.nu - 0.5 * width;
  double hi = pm.nu + 40.0 * gamma;
  if (log_mass(lo) < log_target) {
    throw InvalidArgument("place_target_interval: an interval of this width cannot reach the requested probability");
  }
  for (int i = 0; i < 200 && hi - lo > 1e-15 * (std::abs(lo) + std::abs(hi)); ++i) {
    const double mid = 0.5 * (lo + hi);
    if (log_mass(mid) > log_target) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

double solve_edge(const PushforwardMoments& pm, double width, double target_mu, Tail tail) {
  if (tail == Tail::Upper) return solve_lower_edge(pm, width, target_mu);
  return -solve_lower_edge({-pm.nu, pm.gamma_sq}, width, target_mu) - width;
}

}  // namespace

std::string to_string(Tail t) { return t == Tail::Upper ? "upper" : "lower"; }

Tail tail_from_string(const std::string& s) {
  if (s == "upper") return Tail::Upper;
  if (s == "lower") return Tail::Lower;
  throw InvalidArgument("unknown tail '" + s + "' (expected upper or lower)");
}

TargetInterval place_target_interval(const ForwardModel& model, const GaussianDensity& prior, double width,
                                     double target_mu, Tail tail, int refinements, const MapOptions& options) {
  if (!(width > 0.0)) throw InvalidArgument("place_target_interval: width must be positive");
  if (!(target_mu > 0.0 && target_mu < 1.0)) throw InvalidArgument("place_target_interval: target must be in (0,1)");
  const Vector v0 = model.grad(prior.mean());
  PushforwardMoments pm = pushforward_moments(v0, model.eval(prior.mean()) - v0.dot(prior.mean()), prior);
  double lower = solve_edge(pm, width, target_mu, tail);
  for (int r = 0; r < refinements; ++r) {
    const TunedParams t = linearize_at_midpoint(model, prior, TargetInterval(lower, lower + width), options);
    pm = t.pushforward;
    lower = solve_edge(pm, width, target_mu, tail);
  }
  return TargetInterval(lower, lower + width);
}

}  // namespace bimc
