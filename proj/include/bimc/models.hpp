#pragma once

#include <atomic>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "bimc/types.hpp"

namespace bimc {

/// Axis-aligned box; used for models whose inputs are physically bounded.
struct Box {
  Vector lower;
  Vector upper;
  bool contains(const Vector& x) const;
  Vector project(const Vector& x) const;
};

/// Scalar-valued forward map f: R^m -> R.
///
/// `eval` and `grad` are pure and may be called concurrently. Every call to
/// `eval` increments an atomic counter, including the calls made by the
/// finite-difference gradient fallback.
class ForwardModel {
 public:
  ForwardModel(std::string name, Eigen::Index dim);
  virtual ~ForwardModel() = default;

  ForwardModel(const ForwardModel&) = delete;
  ForwardModel& operator=(const ForwardModel&) = delete;

  const std::string& name() const noexcept { return name_; }
  Eigen::Index dim() const noexcept { return dim_; }

  double eval(const Vector& x) const;
  Vector grad(const Vector& x) const;

  virtual bool has_analytic_gradient() const { return false; }

  /// Input domain, when the model is only defined on a box.
  virtual std::optional<Box> domain() const { return std::nullopt; }
  bool in_domain(const Vector& x) const;

  std::uint64_t eval_count() const noexcept { return evals_.load(std::memory_order_relaxed); }
  std::uint64_t grad_count() const noexcept { return grads_.load(std::memory_order_relaxed); }

 protected:
  virtual double do_eval(const Vector& x) const = 0;
  /// Analytic gradient; only called when has_analytic_gradient() is true.
  virtual Vector do_grad(const Vector& x) const;

 private:
  std::string name_;
  Eigen::Index dim_;
  mutable std::atomic<std::uint64_t> evals_{0};
  mutable std::atomic<std::uint64_t> grads_{0};
};

using ModelPtr = std::shared_ptr<const ForwardModel>;

/// Central differences with h_i = cbrt(eps) (1 + |x_i|); exactly 2m evals.
Vector fd_gradient(const ForwardModel& model, const Vector& x);

/// Forwards to another model while keeping a private evaluation count, so a
/// single estimator run can audit its own cost while the underlying model is
/// shared with other runs.
class CountedModel final : public ForwardModel {
 public:
  explicit CountedModel(const ForwardModel& inner);
  bool has_analytic_gradient() const override { return inner_.has_analytic_gradient(); }
  std::optional<Box> domain() const override { return inner_.domain(); }

 protected:
  double do_eval(const Vector& x) const override { return inner_.eval(x); }
  Vector do_grad(const Vector& x) const override { return inner_.grad(x); }

 private:
  const ForwardModel& inner_;
};

// ---------------------------------------------------------------------------
// Catalog

/// f(x) = v'x + beta.
class AffineModel final : public ForwardModel {
 public:
  AffineModel(Vector v, double beta, std::string name = "affine");
  const Vector& v() const noexcept { return v_; }
  double beta() const noexcept { return beta_; }
  bool has_analytic_gradient() const override { return true; }

 protected:
  double do_eval(const Vector& x) const override;
  Vector do_grad(const Vector& x) const override;

 private:
  Vector v_;
  double beta_;
};

/// f(x) = o'Ax with o = (1/m, ..., 1/m), A = diag(1, 1/2, ..., 1/m).
std::shared_ptr<AffineModel> affine_model(Eigen::Index m);

/// f(x) = u_1 where (S + eps x x') u = b.
///
/// S and b are generated from `seed` as follows, using RandomStream(seed):
/// G is m x m with row-major standard-normal entries, then b with m
/// standard-normal entries; S = G G' / m + I. eps = 0.01 ||S||_2 unless
/// overridden.
class Rank1Model final : public ForwardModel {
 public:
  Rank1Model(Eigen::Index m, std::uint64_t seed, std::optional<double> epsilon_override = std::nullopt,
             bool analytic_gradient = false);

  const Matrix& S() const noexcept { return s_; }
  const Vector& b() const noexcept { return b_; }
  double epsilon() const noexcept { return epsilon_; }
  bool has_analytic_gradient() const override { return analytic_; }

  /// Gradient via the adjoint identity, regardless of the configured default.
  Vector analytic_gradient(const Vector& x) const;

 protected:
  double do_eval(const Vector& x) const override;
  Vector do_grad(const Vector& x) const override { return analytic_gradient(x); }

 private:
  Vector solve(const Vector& x, const Vector& rhs) const;

  Matrix s_;
  Vector b_;
  double epsilon_;
  bool analytic_;
};

/// Fixed-step classical RK4 settings.
struct OdeConfig {
  double t_final;
  int step_count;
};

/// Single-step Arrhenius reaction du/dt = S*(u)/tau with x = u(0), f = u(t_f).
/// Inputs outside [0, 1] are rejected. The gradient is the exact derivative of
/// the discrete RK4 map (tangent-linear integration).
class ReactionModel final : public ForwardModel {
 public:
  static constexpr double kTu = 300.0;
  static constexpr double kTb = 2100.0;
  static constexpr double kTAct = 30000.0;
  static constexpr double kB = 6.11e7;
  static constexpr double kTau = 1.0;

  explicit ReactionModel(OdeConfig cfg);
  const OdeConfig& config() const noexcept { return cfg_; }
  bool has_analytic_gradient() const override { return true; }
  std::optional<Box> domain() const override;

  static double source(double u);
  static double source_derivative(double u);

 protected:
  double do_eval(const Vector& x) const override;
  Vector do_grad(const Vector& x) const override;

 private:
  OdeConfig cfg_;
};

/// Lorenz-63 (s = 10, r = 28, b = 8/3) with x = u(0), f = u_1(t_f).
class LorenzModel final : public ForwardModel {
 public:
  explicit LorenzModel(OdeConfig cfg);
  const OdeConfig& config() const noexcept { return cfg_; }

  /// Full state at t_final.
  Eigen::Vector3d integrate(const Eigen::Vector3d& initial) const;

 protected:
  double do_eval(const Vector& x) const override;

 private:
  OdeConfig cfg_;
};

/// f(x) = sin(x_1) cos(x_2).
class PeriodicModel final : public ForwardModel {
 public:
  PeriodicModel();
  bool has_analytic_gradient() const override { return true; }

 protected:
  double do_eval(const Vector& x) const override;
  Vector do_grad(const Vector& x) const override;
};

/// Cell-centred finite-volume analog of -div(e^g grad u) = 0 on the unit
/// square: u = 1 on the top wall, u = 0 on the bottom wall, no flux on the
/// sides. x holds the log-permeability of each of the grid_n^2 cells (cell
/// (i, j) at index j * grid_n + i, j counted from the bottom). Interior faces
/// use harmonic-mean transmissibilities. f is u at (0.1, 0.5), bilinearly
/// interpolated from cell centres. The gradient is the discrete adjoint.
class EllipticFdModel final : public ForwardModel {
 public:
  explicit EllipticFdModel(int grid_n);
  int grid_n() const noexcept { return n_; }
  bool has_analytic_gradient() const override { return true; }

  /// Cell pressures for log-permeability x.
  Vector solve_pressure(const Vector& x) const;

 protected:
  double do_eval(const Vector& x) const override;
  Vector do_grad(const Vector& x) const override;

 private:
  struct Solution;
  void solve(const Vector& x, Solution& sol) const;

  int n_;
  Vector observation_;
};

/// Symmetric positive semi-definite 5-point Laplacian on a grid_n x grid_n
/// cell grid with zero-flux boundaries, scaled by 1/h^2.
Matrix grid_laplacian(int grid_n);

/// Covariance (gamma L + delta I)^{-2} of the smoothness prior.
Matrix smoothness_prior_covariance(int grid_n, double gamma, double delta);

/// Model selection by catalog name plus parameters.
struct ModelSpec {
  std::string name;                        // affine | rank1 | reaction | lorenz | periodic | elliptic-fd
  int m = 2;                               // affine, rank1
  std::uint64_t seed = 0;                  // rank1
  std::optional<double> epsilon;           // rank1 override
  bool analytic_gradient = false;          // rank1
  double t_final = 0.0;                    // reaction, lorenz
  int step_count = 1000;                   // reaction, lorenz
  int grid_n = 17;                         // elliptic-fd

  friend bool operator==(const ModelSpec&, const ModelSpec&) = default;
};

ModelPtr make_model(const ModelSpec& spec);

/// Names accepted by make_model.
const std::vector<std::string>& catalog_names();

}  // namespace bimc
