#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace pbec::numerics {

struct SolverConfig {
  double rel_tol = 1e-10;
  double abs_tol = 1e-12;
  int max_iter = 200;
  double damping_init = 1e-3;

  // Throws ConfigError unless tolerances are positive and max_iter >= 1.
  void validate() const;
};

/// Brent's method on a bracketing interval [lo, hi].
///
/// Stops once |f(x)| <= abs_tol or the bracket shrinks below
/// rel_tol * |x| (plus a few ulps). Throws DomainError when f(lo) and f(hi)
/// have the same sign and SolverError when the iteration cap is hit.
double find_root(const std::function<double(double)>& f, double lo, double hi,
                 const SolverConfig& cfg = {});

// ---------------------------------------------------------------------------
// Adaptive explicit Runge-Kutta integration.

using VectorField =
    std::function<void(double t, std::span<const double> y, std::span<double> dydt)>;

struct OdeOptions {
  double rel_tol = 1e-8;
  double abs_tol = 1e-12;
  double initial_step = 0.0;  // 0 selects a step from the local derivative scale
  double min_step = 0.0;      // 0 selects 1e-14 * |t_span|
  long max_steps = 5'000'000;
  // Applied to every accepted state, e.g. clipping tiny negative overshoot.
  std::function<void(std::span<double>)> project;
  // Called after every accepted step with the new time and state.
  std::function<void(double, std::span<const double>)> observer;
};

struct OdeResult {
  double t = 0.0;
  std::vector<double> y;
  long accepted = 0;
  long rejected = 0;
  long evaluations = 0;
};

/// Dormand-Prince 5(4) with per-component error control
/// (err_i / (abs_tol + rel_tol * max|y_i|)) and PI step-size control.
/// Throws SolverError on step-size underflow or when max_steps is exceeded.
OdeResult integrate_ode(const VectorField& f, std::span<const double> y0, double t0,
                        double t1, const OdeOptions& opts = {});

// ---------------------------------------------------------------------------
// Damped Newton for square systems.

using Residual = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;
using Jacobian = std::function<Eigen::MatrixXd(const Eigen::VectorXd&)>;

struct NewtonOptions {
  SolverConfig solver{1e-12, 1e-12, 100, 1.0};
  // Componentwise box applied to every trial point; empty means unbounded.
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;
  // Maximum tolerated relative mismatch between the supplied Jacobian and a
  // central-difference Jacobian at the starting point. Negative disables it.
  double jacobian_check_tol = 1e-4;
};

struct NewtonResult {
  Eigen::VectorXd x;
  double residual_norm = 0.0;  // max-norm of F(x)
  int iterations = 0;
};

/// Converged when ||F||_inf <= abs_tol + rel_tol * ||x||_inf.
/// Throws SolverError on a singular Jacobian, failed line search, iteration
/// cap, or a Jacobian that disagrees with finite differences at x0.
NewtonResult newton_solve(const Residual& F, const Jacobian& J, Eigen::VectorXd x0,
                          const NewtonOptions& opts = {});

/// Central-difference Jacobian, step sqrt(eps) * max(|x_i|, 1).
Eigen::MatrixXd finite_difference_jacobian(const Residual& F, const Eigen::VectorXd& x);

// ---------------------------------------------------------------------------
// Bounded Levenberg-Marquardt.

struct LeastSquaresProblem {
  // Residual vector for a parameter vector; its size is the data count.
  Residual residuals;
  Eigen::VectorXd lower;  // empty means unbounded
  Eigen::VectorXd upper;
};

struct LeastSquaresResult {
  Eigen::VectorXd params;
  double cost = 0.0;  // 0.5 * sum of squared residuals
  int iterations = 0;
  bool converged = false;
  std::vector<bool> at_bound;  // per parameter, within 1e-9 relative of a bound
  bool any_at_bound() const;
};

/// Finite-difference Jacobian, box projection after every step, geometric
/// damping updates. Throws FitError when there are fewer residuals than
/// parameters or the normal equations are singular for every damping value.
LeastSquaresResult least_squares(const LeastSquaresProblem& problem, Eigen::VectorXd params0,
                                 const SolverConfig& cfg = {1e-12, 1e-14, 500, 1e-3});

}  // namespace pbec::numerics
