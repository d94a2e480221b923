#include "bimc/models.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <cmath>
#include <limits>

#include "bimc/random.hpp"

namespace bimc {

bool Box::contains(const Vector& x) const {
  return (x.array() >= lower.array()).all() && (x.array() <= upper.array()).all();
}

Vector Box::project(const Vector& x) const { return x.cwiseMax(lower).cwiseMin(upper); }

ForwardModel::ForwardModel(std::string name, Eigen::Index dim) : name_(std::move(name)), dim_(dim) {
  if (dim_ < 1) throw InvalidArgument("model '" + name_ + "': dimension must be positive");
}

double ForwardModel::eval(const Vector& x) const {
  if (x.size() != dim_) {
    throw InvalidArgument("model '" + name_ + "': expected input of dimension " + std::to_string(dim_) + ", got " +
                          std::to_string(x.size()));
  }
  evals_.fetch_add(1, std::memory_order_relaxed);
  return do_eval(x);
}

Vector ForwardModel::grad(const Vector& x) const {
  if (x.size() != dim_) {
    throw InvalidArgument("model '" + name_ + "': expected input of dimension " + std::to_string(dim_) + ", got " +
                          std::to_string(x.size()));
  }
  grads_.fetch_add(1, std::memory_order_relaxed);
  if (has_analytic_gradient()) return do_grad(x);
  return fd_gradient(*this, x);
}

Vector ForwardModel::do_grad(const Vector& x) const { return fd_gradient(*this, x); }

bool ForwardModel::in_domain(const Vector& x) const {
  const auto box = domain();
  return !box || box->contains(x);
}

Vector fd_gradient(const ForwardModel& model, const Vector& x) {
  static const double base_step = std::cbrt(std::numeric_limits<double>::epsilon());
  Vector g(x.size());
  Vector probe = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double h = base_step * (1.0 + std::abs(x(i)));
    probe(i) = x(i) + h;
    const double x_plus = probe(i);
    const double f_plus = model.eval(probe);
    probe(i) = x(i) - h;
    const double x_minus = probe(i);
    const double f_minus = model.eval(probe);
    probe(i) = x(i);
    if (!std::isfinite(f_plus) || !std::isfinite(f_minus)) {
      throw ModelError("fd_gradient: model '" + model.name() + "' returned a non-finite value perturbing coordinate " +
                       std::to_string(i));
    }
    g(i) = (f_plus - f_minus) / (x_plus - x_minus);
  }
  return g;
}

CountedModel::CountedModel(const ForwardModel& inner) : ForwardModel(inner.name(), inner.dim()), inner_(inner) {}

// ---------------------------------------------------------------------------

AffineModel::AffineModel(Vector v, double beta, std::string name)
    : ForwardModel(std::move(name), v.size()), v_(std::move(v)), beta_(beta) {}

double AffineModel::do_eval(const Vector& x) const { return v_.dot(x) + beta_; }

Vector AffineModel::do_grad(const Vector&) const { return v_; }

std::shared_ptr<AffineModel> affine_model(Eigen::Index m) {
  if (m < 1) throw InvalidArgument("affine_model: m must be >= 1");
  Vector v(m);
  for (Eigen::Index i = 0; i < m; ++i) v(i) = 1.0 / (static_cast<double>(m) * static_cast<double>(i + 1));
  return std::make_shared<AffineModel>(std::move(v), 0.0, "affine");
}

// ---------------------------------------------------------------------------

Rank1Model::Rank1Model(Eigen::Index m, std::uint64_t seed, std::optional<double> epsilon_override,
                       bool analytic_gradient)
    : ForwardModel("rank1", m), analytic_(analytic_gradient) {
  RandomStream rng(seed);
  Matrix g(m, m);
  for (Eigen::Index r = 0; r < m; ++r)
    for (Eigen::Index c = 0; c < m; ++c) g(r, c) = rng.normal();
  b_.resize(m);
  for (Eigen::Index i = 0; i < m; ++i) b_(i) = rng.normal();
  s_ = g * g.transpose() / static_cast<double>(m) + Matrix::Identity(m, m);
  s_ = 0.5 * (s_ + s_.transpose());
  if (epsilon_override) {
    epsilon_ = *epsilon_override;
  } else {
    Eigen::SelfAdjointEigenSolver<Matrix> eig(s_, Eigen::EigenvaluesOnly);
    epsilon_ = 0.01 * eig.eigenvalues().maxCoeff();
  }
}

Vector Rank1Model::solve(const Vector& x, const Vector& rhs) const {
  Matrix a = s_ + epsilon_ * x * x.transpose();
  Eigen::LDLT<Matrix> ldlt(a);
  if (ldlt.info() != Eigen::Success || !(ldlt.rcond() > 1e-14)) {
    std::string where;
    for (Eigen::Index i = 0; i < x.size(); ++i) where += (i ? ", " : "") + std::to_string(x(i));
    throw ModelError("rank1: singular system at x = (" + where + ")");
  }
  return ldlt.solve(rhs);
}

double Rank1Model::do_eval(const Vector& x) const { return solve(x, b_)(0); }

Vector Rank1Model::analytic_gradient(const Vector& x) const {
  // d u / d x_k = -A^{-1} eps (e_k x' + x e_k') u, and A is symmetric, so with
  // lambda = A^{-1} e_1:  df/dx = -eps ((x'u) lambda + (lambda'x) u).
  const Eigen::Index m = dim();
  Matrix rhs(m, 2);
  rhs.col(0) = b_;
  rhs.col(1) = Vector::Unit(m, 0);
  Matrix a = s_ + epsilon_ * x * x.transpose();
  Eigen::LDLT<Matrix> ldlt(a);
  if (ldlt.info() != Eigen::Success) throw ModelError("rank1: singular system in gradient");
  Matrix sol = ldlt.solve(rhs);
  const Vector u = sol.col(0);
  const Vector lambda = sol.col(1);
  return -epsilon_ * (x.dot(u) * lambda + lambda.dot(x) * u);
}

// ---------------------------------------------------------------------------

namespace {

void check_ode_config(const OdeConfig& cfg, const char* who) {
  if (!(cfg.t_final >= 0.0) || !std::isfinite(cfg.t_final)) {
    throw InvalidArgument(std::string(who) + ": t_final must be finite and >= 0");
  }
  if (cfg.step_count < 1) throw InvalidArgument(std::string(who) + ": step_count must be >= 1");
}

}  // namespace

ReactionModel::ReactionModel(OdeConfig cfg) : ForwardModel("reaction", 1), cfg_(cfg) {
  check_ode_config(cfg_, "reaction");
}

std::optional<Box> ReactionModel::domain() const { return Box{Vector::Zero(1), Vector::Ones(1)}; }

double ReactionModel::source(double u) {
  return kB * u * (1.0 - u) * std::exp(-kTAct / (kTu + (kTb - kTu) * u));
}

double ReactionModel::source_derivative(double u) {
  const double denom = kTu + (kTb - kTu) * u;
  const double arrhenius = std::exp(-kTAct / denom);
  const double dlog = kTAct * (kTb - kTu) / (denom * denom);
  return kB * arrhenius * ((1.0 - 2.0 * u) + u * (1.0 - u) * dlog);
}

double ReactionModel::do_eval(const Vector& x) const {
  double u = x(0);
  if (!(u >= 0.0 && u <= 1.0)) {
    throw ModelError("reaction: progress variable out of range: u(0) = " + std::to_string(u));
  }
  const double dt = cfg_.t_final / cfg_.step_count;
  for (int s = 0; s < cfg_.step_count; ++s) {
    const double k1 = source(u) / kTau;
    const double k2 = source(u + 0.5 * dt * k1) / kTau;
    const double k3 = source(u + 0.5 * dt * k2) / kTau;
    const double k4 = source(u + dt * k3) / kTau;
    u += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  if (!std::isfinite(u)) throw ModelError("reaction: non-finite state");
  return u;
}

Vector ReactionModel::do_grad(const Vector& x) const {
  double u = x(0);
  if (!(u >= 0.0 && u <= 1.0)) {
    throw ModelError("reaction: progress variable out of range: u(0) = " + std::to_string(u));
  }
  double du = 1.0;
  const double dt = cfg_.t_final / cfg_.step_count;
  for (int s = 0; s < cfg_.step_count; ++s) {
    const double u1 = u;
    const double k1 = source(u1) / kTau;
    const double d1 = source_derivative(u1) * du / kTau;
    const double u2 = u + 0.5 * dt * k1;
    const double k2 = source(u2) / kTau;
    const double d2 = source_derivative(u2) * (du + 0.5 * dt * d1) / kTau;
    const double u3 = u + 0.5 * dt * k2;
    const double k3 = source(u3) / kTau;
    const double d3 = source_derivative(u3) * (du + 0.5 * dt * d2) / kTau;
    const double u4 = u + dt * k3;
    const double k4 = source(u4) / kTau;
    const double d4 = source_derivative(u4) * (du + dt * d3) / kTau;
    u += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    du += dt / 6.0 * (d1 + 2.0 * d2 + 2.0 * d3 + d4);
  }
  Vector g(1);
  g(0) = du;
  return g;
}

// ---------------------------------------------------------------------------

LorenzModel::LorenzModel(OdeConfig cfg) : ForwardModel("lorenz", 3), cfg_(cfg) { check_ode_config(cfg_, "lorenz"); }

Eigen::Vector3d LorenzModel::integrate(const Eigen::Vector3d& initial) const {
  constexpr double s = 10.0, r = 28.0, b = 8.0 / 3.0;
  const auto rhs = [](const Eigen::Vector3d& u) {
    return Eigen::Vector3d(s * (u(1) - u(0)), u(0) * (r - u(2)) - u(1), u(0) * u(1) - b * u(2));
  };
  Eigen::Vector3d u = initial;
  const double dt = cfg_.t_final / cfg_.step_count;
  if (dt == 0.0) return u;
  for (int step = 0; step < cfg_.step_count; ++step) {
    const Eigen::Vector3d k1 = rhs(u);
    const Eigen::Vector3d k2 = rhs(u + 0.5 * dt * k1);
    const Eigen::Vector3d k3 = rhs(u + 0.5 * dt * k2);
    const Eigen::Vector3d k4 = rhs(u + dt * k3);
    u += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    if (!u.allFinite()) throw ModelError("lorenz: non-finite state at step " + std::to_string(step));
  }
  return u;
}

double LorenzModel::do_eval(const Vector& x) const { return integrate(Eigen::Vector3d(x(0), x(1), x(2)))(0); }

// ---------------------------------------------------------------------------

PeriodicModel::PeriodicModel() : ForwardModel("periodic", 2) {}

double PeriodicModel::do_eval(const Vector& x) const { return std::sin(x(0)) * std::cos(x(1)); }

Vector PeriodicModel::do_grad(const Vector& x) const {
  Vector g(2);
  g(0) = std::cos(x(0)) * std::cos(x(1));
  g(1) = -std::sin(x(0)) * std::sin(x(1));
  return g;
}

// ---------------------------------------------------------------------------

struct EllipticFdModel::Solution {
  Vector pressure;
  Vector permeability;
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> factor;
};

EllipticFdModel::EllipticFdModel(int grid_n) : ForwardModel("elliptic-fd", static_cast<Eigen::Index>(grid_n) * grid_n), n_(grid_n) {
  if (grid_n < 5) throw InvalidArgument("elliptic-fd: grid_n must be >= 5");
  // Cell centres sit at ((i + 1/2) h, (j + 1/2) h).
  const double h = 1.0 / n_;
  const double cx = 0.1 / h - 0.5;
  const double cy = 0.5 / h - 0.5;
  const int i0 = static_cast<int>(std::floor(cx));
  const int j0 = static_cast<int>(std::floor(cy));
  const double tx = cx - i0;
  const double ty = cy - j0;
  observation_ = Vector::Zero(dim());
  const auto add = [&](int i, int j, double w) {
    if (w == 0.0) return;
    observation_(static_cast<Eigen::Index>(j) * n_ + i) += w;
  };
  add(i0, j0, (1 - tx) * (1 - ty));
  add(i0 + 1, j0, tx * (1 - ty));
  add(i0, j0 + 1, (1 - tx) * ty);
  add(i0 + 1, j0 + 1, tx * ty);
}

void EllipticFdModel::solve(const Vector& x, Solution& sol) const {
  const int n = n_;
  const Eigen::Index m = dim();
  sol.permeability = x.array().exp().matrix();
  if (!sol.permeability.allFinite()) throw ModelError("elliptic-fd: permeability overflow");
  const Vector& k = sol.permeability;
  const auto idx = [n](int i, int j) { return static_cast<Eigen::Index>(j) * n + i; };

  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(static_cast<std::size_t>(5 * m));
  Vector rhs = Vector::Zero(m);
  Vector diag = Vector::Zero(m);
  const auto couple = [&](Eigen::Index p, Eigen::Index q) {
    const double t = 2.0 * k(p) * k(q) / (k(p) + k(q));
    diag(p) += t;
    diag(q) += t;
    triplets.emplace_back(p, q, -t);
    triplets.emplace_back(q, p, -t);
  };
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      if (i + 1 < n) couple(idx(i, j), idx(i + 1, j));
      if (j + 1 < n) couple(idx(i, j), idx(i, j + 1));
    }
  }
  for (int i = 0; i < n; ++i) {
    diag(idx(i, 0)) += 2.0 * k(idx(i, 0));
    const Eigen::Index top = idx(i, n - 1);
    diag(top) += 2.0 * k(top);
    rhs(top) += 2.0 * k(top);
  }
  for (Eigen::Index p = 0; p < m; ++p) triplets.emplace_back(p, p, diag(p));
  Eigen::SparseMatrix<double> a(m, m);
  a.setFromTriplets(triplets.begin(), triplets.end());
  sol.factor.compute(a);
  if (sol.factor.info() != Eigen::Success) throw ModelError("elliptic-fd: factorization failed");
  sol.pressure = sol.factor.solve(rhs);
  if (sol.factor.info() != Eigen::Success || !sol.pressure.allFinite()) {
    throw ModelError("elliptic-fd: solve failed");
  }
}

Vector EllipticFdModel::solve_pressure(const Vector& x) const {
  Solution sol;
  solve(x, sol);
  return sol.pressure;
}

double EllipticFdModel::do_eval(const Vector& x) const { return observation_.dot(solve_pressure(x)); }

Vector EllipticFdModel::do_grad(const Vector& x) const {
  Solution sol;
  solve(x, sol);
  const Vector lambda = sol.factor.solve(observation_);
  const Vector& u = sol.pressure;
  const Vector& k = sol.permeability;
  const int n = n_;
  const auto idx = [n](int i, int j) { return static_cast<Eigen::Index>(j) * n + i; };
  Vector g = Vector::Zero(dim());
  // df/dg = -lambda' dR/dg, R the flux-balance residual.
  const auto face = [&](Eigen::Index p, Eigen::Index q) {
    const double s = k(p) + k(q);
    const double dt_dgp = 2.0 * k(q) * k(q) * k(p) / (s * s);
    const double dt_dgq = 2.0 * k(p) * k(p) * k(q) / (s * s);
    const double jump = (u(p) - u(q)) * (lambda(p) - lambda(q));
    g(p) -= dt_dgp * jump;
    g(q) -= dt_dgq * jump;
  };
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      if (i + 1 < n) face(idx(i, j), idx(i + 1, j));
      if (j + 1 < n) face(idx(i, j), idx(i, j + 1));
    }
  }
  for (int i = 0; i < n; ++i) {
    const Eigen::Index bottom = idx(i, 0);
    g(bottom) -= 2.0 * k(bottom) * u(bottom) * lambda(bottom);
    const Eigen::Index top = idx(i, n - 1);
    g(top) -= 2.0 * k(top) * (u(top) - 1.0) * lambda(top);
  }
  return g;
}

Matrix grid_laplacian(int grid_n) {
  if (grid_n < 2) throw InvalidArgument("grid_laplacian: grid_n must be >= 2");
  const int n = grid_n;
  const Eigen::Index m = static_cast<Eigen::Index>(n) * n;
  const double inv_h2 = static_cast<double>(n) * n;
  Matrix l = Matrix::Zero(m, m);
  const auto idx = [n](int i, int j) { return static_cast<Eigen::Index>(j) * n + i; };
  const auto link = [&](Eigen::Index p, Eigen::Index q) {
    l(p, p) += inv_h2;
    l(q, q) += inv_h2;
    l(p, q) -= inv_h2;
    l(q, p) -= inv_h2;
  };
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      if (i + 1 < n) link(idx(i, j), idx(i + 1, j));
      if (j + 1 < n) link(idx(i, j), idx(i, j + 1));
    }
  }
  return l;
}

Matrix smoothness_prior_covariance(int grid_n, double gamma, double delta) {
  if (!(gamma >= 0.0) || !(delta > 0.0)) throw InvalidArgument("smoothness prior: need gamma >= 0, delta > 0");
  Matrix a = gamma * grid_laplacian(grid_n);
  a.diagonal().array() += delta;
  Eigen::LLT<Matrix> llt(a);
  if (llt.info() != Eigen::Success) throw InvalidArgument("smoothness prior: operator not positive definite");
  const Matrix a_inv = llt.solve(Matrix::Identity(a.rows(), a.cols()));
  Matrix cov = a_inv * a_inv;
  return 0.5 * (cov + cov.transpose());
}

// ---------------------------------------------------------------------------

const std::vector<std::string>& catalog_names() {
  static const std::vector<std::string> names{"affine", "rank1", "reaction", "lorenz", "periodic", "elliptic-fd"};
  return names;
}

ModelPtr make_model(const ModelSpec& spec) {
  if (spec.name == "affine") return affine_model(spec.m);
  if (spec.name == "rank1") {
    return std::make_shared<Rank1Model>(spec.m, spec.seed, spec.epsilon, spec.analytic_gradient);
  }
  if (spec.name == "reaction") return std::make_shared<ReactionModel>(OdeConfig{spec.t_final, spec.step_count});
  if (spec.name == "lorenz") return std::make_shared<LorenzModel>(OdeConfig{spec.t_final, spec.step_count});
  if (spec.name == "periodic") return std::make_shared<PeriodicModel>();
  if (spec.name == "elliptic-fd") return std::make_shared<EllipticFdModel>(spec.grid_n);
  throw InvalidArgument("unknown model '" + spec.name + "'");
}

}  // namespace bimc
