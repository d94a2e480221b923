#include "bimc/inverse.hpp"

#include <cmath>
#include <sstream>

namespace bimc {

PseudoLikelihood::PseudoLikelihood(double y_, double sigma_sq_) : y(y_), sigma_sq(sigma_sq_) {
  if (!(sigma_sq > 0.0) || !std::isfinite(sigma_sq)) {
    throw InvalidArgument("pseudo-likelihood variance must be positive and finite");
  }
  if (!std::isfinite(y)) throw InvalidArgument("pseudo-data must be finite");
}

namespace {

void check_dims(const ForwardModel& model, const GaussianDensity& prior, const Vector& x) {
  if (model.dim() != prior.dim() || x.size() != model.dim()) {
    throw InvalidArgument("inverse problem: model, prior and point dimensions disagree (" +
                          std::to_string(model.dim()) + ", " + std::to_string(prior.dim()) + ", " +
                          std::to_string(x.size()) + ")");
  }
}

double objective_from(double fx, const GaussianDensity& prior, const PseudoLikelihood& lik, const Vector& x) {
  const double r = lik.y - fx;
  return r * r / (2.0 * lik.sigma_sq) + 0.5 * prior.mahalanobis_sq(x - prior.mean());
}

Vector gradient_from(double fx, const Vector& model_grad, const GaussianDensity& prior,
                     const PseudoLikelihood& lik, const Vector& x) {
  return -(lik.y - fx) / lik.sigma_sq * model_grad + prior.precision_times(x - prior.mean());
}

Vector projected_gradient(const Vector& g, const Vector& x, const std::optional<Box>& box) {
  if (!box) return g;
  Vector pg = g;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    if ((x(i) <= box->lower(i) && g(i) > 0.0) || (x(i) >= box->upper(i) && g(i) < 0.0)) pg(i) = 0.0;
  }
  return pg;
}

}  // namespace

double neg_log_posterior(const ForwardModel& model, const GaussianDensity& prior, const PseudoLikelihood& lik,
                         const Vector& x) {
  check_dims(model, prior, x);
  return objective_from(model.eval(x), prior, lik, x);
}

Vector nlp_gradient(const ForwardModel& model, const GaussianDensity& prior, const PseudoLikelihood& lik,
                    const Vector& x) {
  check_dims(model, prior, x);
  const double fx = model.eval(x);
  return gradient_from(fx, model.grad(x), prior, lik, x);
}

MapResult find_map(const ForwardModel& model, const GaussianDensity& prior, const PseudoLikelihood& lik,
                   const Vector& x_init, const MapOptions& options) {
  check_dims(model, prior, x_init);
  if (!x_init.allFinite()) throw InvalidArgument("find_map: non-finite initial point");
  const std::optional<Box> box = options.bounds ? options.bounds : model.domain();

  Vector x = box ? box->project(x_init) : x_init;
  double fx_model = model.eval(x);
  double obj = objective_from(fx_model, prior, lik, x);
  Vector g = gradient_from(fx_model, model.grad(x), prior, lik, x);
  if (!std::isfinite(obj) || !g.allFinite()) throw SolverError("find_map: objective not finite at initial point");

  MapResult result;
  SolverReport& rep = result.report;
  rep.initial_grad_norm = projected_gradient(g, x, box).norm();
  rep.tolerance = options.relative_tolerance * std::max(1.0, rep.initial_grad_norm);

  // The prior covariance is the exact inverse Hessian of the prior term.
  const Matrix& h_inv0 = prior.cov();
  Matrix h_inv = h_inv0;
  bool fresh = true;

  int iter = 0;
  for (;; ++iter) {
    const Vector pg = projected_gradient(g, x, box);
    rep.grad_norm = pg.norm();
    rep.objective = obj;
    rep.iterations = iter;
    if (rep.grad_norm <= rep.tolerance) {
      rep.converged = true;
      rep.message = "gradient tolerance reached";
      break;
    }
    if (iter >= options.max_iterations) {
      rep.message = "iteration budget exhausted";
      break;
    }

    Vector p = -(h_inv * pg);
    if (!(g.dot(p) < 0.0)) {
      h_inv = h_inv0;
      fresh = true;
      p = -(h_inv * pg);
    }

    bool accepted = false;
    Vector x_new;
    double obj_new = 0.0, f_new = 0.0;
    for (int attempt = 0; attempt < 2 && !accepted; ++attempt) {
      double alpha = 1.0;
      for (int bt = 0; bt <= options.max_backtracks; ++bt, alpha *= 0.5) {
        x_new = x + alpha * p;
        if (box) x_new = box->project(x_new);
        const double decrease = g.dot(x_new - x);
        if (!(decrease < 0.0)) continue;
        try {
          f_new = model.eval(x_new);
        } catch (const ModelError&) {
          continue;
        }
        obj_new = objective_from(f_new, prior, lik, x_new);
        if (std::isfinite(obj_new) && obj_new < obj && obj_new <= obj + options.armijo_c * decrease) {
          accepted = true;
          break;
        }
      }
      if (!accepted && !fresh) {
        h_inv = h_inv0;
        fresh = true;
        p = -(h_inv * pg);
      } else {
        break;
      }
    }
    if (!accepted) {
      if (rep.grad_norm <= options.stall_tolerance * std::max(1.0, rep.initial_grad_norm)) {
        rep.converged = true;
        rep.message = "line search stalled at working precision";
      } else {
        rep.message = "failed to identify a descent direction";
      }
      break;
    }

    const Vector g_new = gradient_from(f_new, model.grad(x_new), prior, lik, x_new);
    const Vector s = x_new - x;
    const Vector yv = g_new - g;
    x = x_new;
    obj = obj_new;
    g = g_new;
    if (options.on_accept) options.on_accept(obj);

    const double sy = s.dot(yv);
    if (sy > 1e-12 * s.norm() * yv.norm() && sy > 0.0) {
      const double rho = 1.0 / sy;
      const Vector hy = h_inv * yv;
      // (I - rho s y') H (I - rho y s') + rho s s'
      h_inv += (rho * rho * yv.dot(hy) + rho) * (s * s.transpose()) - rho * (hy * s.transpose() + s * hy.transpose());
      h_inv = 0.5 * (h_inv + h_inv.transpose());
      fresh = false;
    }
  }
  result.map_point = x;
  return result;
}

Matrix gauss_newton_hessian(const Vector& model_gradient, const GaussianDensity& prior, double sigma_sq) {
  if (model_gradient.size() != prior.dim()) throw InvalidArgument("gauss_newton_hessian: dimension mismatch");
  if (!(sigma_sq > 0.0)) throw InvalidArgument("gauss_newton_hessian: sigma_sq must be positive");
  Matrix h = prior.precision();
  h.noalias() += (model_gradient * model_gradient.transpose()) / sigma_sq;
  return 0.5 * (h + h.transpose());
}

Matrix gauss_newton_hessian(const ForwardModel& model, const GaussianDensity& prior, const PseudoLikelihood& lik,
                            const Vector& x_map) {
  check_dims(model, prior, x_map);
  return gauss_newton_hessian(model.grad(x_map), prior, lik.sigma_sq);
}

namespace {

Matrix spd_inverse(const Matrix& h) {
  Eigen::LLT<Matrix> llt(h);
  if (llt.info() != Eigen::Success) throw SolverError("Gauss-Newton Hessian is not positive definite");
  Matrix inv = llt.solve(Matrix::Identity(h.rows(), h.cols()));
  return 0.5 * (inv + inv.transpose());
}

}  // namespace

LaplaceApprox laplace_approximation(const ForwardModel& model, const GaussianDensity& prior,
                                    const PseudoLikelihood& lik, const Vector& x_init, const MapOptions& options) {
  MapResult map = find_map(model, prior, lik, x_init, options);
  if (!map.report.converged) {
    throw SolverError("MAP search did not converge (y = " + std::to_string(lik.y) +
                      ", sigma^2 = " + std::to_string(lik.sigma_sq) + "): " + describe(map.report));
  }
  Matrix h = gauss_newton_hessian(model, prior, lik, map.map_point);
  Matrix cov = spd_inverse(h);
  GaussianDensity density(map.map_point, std::move(cov));
  return LaplaceApprox{std::move(map.map_point), std::move(h), std::move(density), std::move(map.report)};
}

LaplaceApprox affine_laplace_closed_form(const Vector& v, double beta, const GaussianDensity& prior,
                                         const PseudoLikelihood& lik) {
  if (v.size() != prior.dim()) throw InvalidArgument("affine closed form: dimension mismatch");
  if (v.isZero(0.0)) throw InvalidArgument("observation uninformative: v = 0");
  const Vector s = prior.cov() * v;
  const double gamma_sq = v.dot(s);
  if (!(gamma_sq > 0.0)) throw InvalidArgument("observation uninformative: v' Sigma0 v = 0");
  const double c = lik.sigma_sq + gamma_sq;
  const double f0 = v.dot(prior.mean()) + beta;
  Vector x_map = prior.mean() + ((lik.y - f0) / c) * s;
  Matrix cov = prior.cov() - (s * s.transpose()) / c;
  cov = 0.5 * (cov + cov.transpose());
  Matrix h = gauss_newton_hessian(v, prior, lik.sigma_sq);
  SolverReport rep;
  rep.converged = true;
  rep.message = "closed form";
  const double r = lik.y - (v.dot(x_map) + beta);
  rep.objective = r * r / (2.0 * lik.sigma_sq) + 0.5 * prior.mahalanobis_sq(x_map - prior.mean());
  GaussianDensity density(x_map, std::move(cov));
  return LaplaceApprox{std::move(x_map), std::move(h), std::move(density), std::move(rep)};
}

std::string describe(const SolverReport& report) {
  std::ostringstream os;
  os << report.message << " after " << report.iterations << " iterations, |grad| = " << report.grad_norm
     << " (tolerance " << report.tolerance << ", initial " << report.initial_grad_norm << ")";
  return os.str();
}

}  // namespace bimc
