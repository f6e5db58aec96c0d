#include "pbec/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "pbec/errors.hpp"

namespace pbec::numerics {

void SolverConfig::validate() const {
  if (!(rel_tol > 0.0) || !(abs_tol > 0.0))
    throw ConfigError("solver tolerances must be positive");
  if (max_iter < 1) throw ConfigError("solver max_iter must be at least 1");
}

double find_root(const std::function<double(double)>& f, double lo, double hi,
                 const SolverConfig& cfg) {
  cfg.validate();
  double a = lo, b = hi;
  double fa = f(a), fb = f(b);
  if (fa == 0.0) return a;
  if (fb == 0.0) return b;
  if (!std::isfinite(fa) || !std::isfinite(fb) || std::signbit(fa) == std::signbit(fb)) {
    std::ostringstream os;
    os << "find_root: no sign change on [" << lo << ", " << hi << "] (f = " << fa << ", " << fb
       << ")";
    throw DomainError(os.str());
  }
  if (std::abs(fa) < std::abs(fb)) {
    std::swap(a, b);
    std::swap(fa, fb);
  }
  double c = a, fc = fa;
  double d = b - a;
  bool bisected = true;
  constexpr double eps = std::numeric_limits<double>::epsilon();

  for (int it = 0; it < cfg.max_iter; ++it) {
    if (std::abs(fb) <= cfg.abs_tol) return b;
    const double tol = cfg.rel_tol * std::abs(b) + 4.0 * eps * std::abs(b);
    if (std::abs(b - a) <= tol || std::abs(b - a) <= std::numeric_limits<double>::min())
      return b;

    double s;
    if (fa != fc && fb != fc) {
      // inverse quadratic interpolation
      s = a * fb * fc / ((fa - fb) * (fa - fc)) + b * fa * fc / ((fb - fa) * (fb - fc)) +
          c * fa * fb / ((fc - fa) * (fc - fb));
    } else {
      s = b - fb * (b - a) / (fb - fa);
    }
    const double m = (3.0 * a + b) / 4.0;
    const bool outside = !((s > std::min(m, b) && s < std::max(m, b)));
    if (outside || (bisected && std::abs(s - b) >= std::abs(b - c) / 2.0) ||
        (!bisected && std::abs(s - b) >= std::abs(c - d) / 2.0) ||
        (bisected && std::abs(b - c) < tol) || (!bisected && std::abs(c - d) < tol)) {
      s = 0.5 * (a + b);
      bisected = true;
    } else {
      bisected = false;
    }
    const double fs = f(s);
    d = c;
    c = b;
    fc = fb;
    if (std::signbit(fa) != std::signbit(fs)) {
      b = s;
      fb = fs;
    } else {
      a = s;
      fa = fs;
    }
    if (std::abs(fa) < std::abs(fb)) {
      std::swap(a, b);
      std::swap(fa, fb);
    }
    if (fb == 0.0) return b;
  }
  std::ostringstream os;
  os << "find_root: iteration cap " << cfg.max_iter << " reached, bracket [" << std::min(a, b)
     << ", " << std::max(a, b) << "]";
  throw SolverError(os.str());
}

// ---------------------------------------------------------------------------

namespace {

// Dormand-Prince 5(4) tableau.
constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                 a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                 a65 = -5103.0 / 18656;
constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784,
                 b6 = 11.0 / 84;
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                 e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;

}  // namespace

OdeResult integrate_ode(const VectorField& f, std::span<const double> y0, double t0, double t1,
                        const OdeOptions& opts) {
  if (!(opts.rel_tol > 0.0) || !(opts.abs_tol > 0.0))
    throw ConfigError("integrate_ode: tolerances must be positive");
  const std::size_t n = y0.size();
  OdeResult res;
  res.t = t0;
  res.y.assign(y0.begin(), y0.end());
  if (t1 == t0 || n == 0) return res;
  const double dir = t1 > t0 ? 1.0 : -1.0;
  const double span = std::abs(t1 - t0);
  const double min_step = opts.min_step > 0.0 ? opts.min_step : 1e-14 * span;

  std::vector<double> k1(n), k2(n), k3(n), k4(n), k5(n), k6(n), k7(n), yt(n), y5(n);
  auto& y = res.y;
  auto eval = [&](double t, const std::vector<double>& yy, std::vector<double>& out) {
    f(t, yy, out);
    ++res.evaluations;
  };
  if (opts.project) opts.project(y);
  eval(res.t, y, k1);

  double h = opts.initial_step;
  if (!(h > 0.0)) {
    // Hairer's starting step heuristic, first-order part only.
    double d0 = 0.0, d1 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double sc = opts.abs_tol + opts.rel_tol * std::abs(y[i]);
      d0 = std::max(d0, std::abs(y[i]) / sc);
      d1 = std::max(d1, std::abs(k1[i]) / sc);
    }
    h = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 * span : 0.01 * d0 / d1;
    h = std::min(h, span);
  }
  h = std::max(h, min_step);

  double err_prev = 1e-4;
  bool last_rejected = false;
  long steps = 0;
  while (dir * (t1 - res.t) > 0.0) {
    if (++steps > opts.max_steps) {
      std::ostringstream os;
      os << "integrate_ode: step cap " << opts.max_steps << " reached at t = " << res.t
         << " (problem is stiff; prefer a steady-state solve)";
      throw SolverError(os.str());
    }
    bool final_step = false;
    if (h >= std::abs(t1 - res.t)) {
      h = std::abs(t1 - res.t);
      final_step = true;
    }
    const double hs = dir * h;
    const double t = res.t;
    for (std::size_t i = 0; i < n; ++i) yt[i] = y[i] + hs * a21 * k1[i];
    eval(t + c2 * hs, yt, k2);
    for (std::size_t i = 0; i < n; ++i) yt[i] = y[i] + hs * (a31 * k1[i] + a32 * k2[i]);
    eval(t + c3 * hs, yt, k3);
    for (std::size_t i = 0; i < n; ++i)
      yt[i] = y[i] + hs * (a41 * k1[i] + a42 * k2[i] + a43 * k3[i]);
    eval(t + c4 * hs, yt, k4);
    for (std::size_t i = 0; i < n; ++i)
      yt[i] = y[i] + hs * (a51 * k1[i] + a52 * k2[i] + a53 * k3[i] + a54 * k4[i]);
    eval(t + c5 * hs, yt, k5);
    for (std::size_t i = 0; i < n; ++i)
      yt[i] = y[i] + hs * (a61 * k1[i] + a62 * k2[i] + a63 * k3[i] + a64 * k4[i] + a65 * k5[i]);
    eval(t + hs, yt, k6);
    for (std::size_t i = 0; i < n; ++i)
      y5[i] = y[i] + hs * (b1 * k1[i] + b3 * k3[i] + b4 * k4[i] + b5 * k5[i] + b6 * k6[i]);
    eval(t + hs, y5, k7);

    double err = 0.0;
    bool finite = true;
    for (std::size_t i = 0; i < n; ++i) {
      const double e = hs * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] + e6 * k6[i] +
                             e7 * k7[i]);
      const double sc = opts.abs_tol + opts.rel_tol * std::max(std::abs(y[i]), std::abs(y5[i]));
      err = std::max(err, std::abs(e) / sc);
      if (!std::isfinite(y5[i])) finite = false;
    }
    if (!finite) err = std::numeric_limits<double>::infinity();

    if (err <= 1.0) {
      res.t = final_step ? t1 : t + hs;
      y.swap(y5);
      if (opts.project) {
        opts.project(y);
        eval(res.t, y, k1);
      } else {
        k1.swap(k7);
      }
      ++res.accepted;
      if (opts.observer) opts.observer(res.t, y);
      double fac = err == 0.0 ? 5.0 : 0.9 * std::pow(err, -0.7 / 5.0) * std::pow(err_prev, 0.4 / 5.0);
      fac = std::clamp(fac, 0.2, 5.0);
      if (last_rejected) fac = std::min(fac, 1.0);
      h *= fac;
      err_prev = std::max(err, 1e-4);
      last_rejected = false;
    } else {
      ++res.rejected;
      const double fac = std::isfinite(err) ? std::max(0.2, 0.9 * std::pow(err, -0.2)) : 0.1;
      h *= fac;
      last_rejected = true;
    }
    if (h < min_step) {
      std::ostringstream os;
      os << "integrate_ode: step size underflow (h = " << h << ") at t = " << res.t
         << " (problem is stiff; prefer a steady-state solve)";
      throw SolverError(os.str());
    }
  }
  return res;
}

// ---------------------------------------------------------------------------

Eigen::MatrixXd finite_difference_jacobian(const Residual& F, const Eigen::VectorXd& x) {
  const double sq = std::sqrt(std::numeric_limits<double>::epsilon());
  const Eigen::Index n = x.size();
  Eigen::MatrixXd J;
  Eigen::VectorXd xp = x, xm = x;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double h = sq * std::max(std::abs(x[i]), 1.0);
    xp[i] = x[i] + h;
    xm[i] = x[i] - h;
    const Eigen::VectorXd col = (F(xp) - F(xm)) / (xp[i] - xm[i]);
    if (i == 0) J.resize(col.size(), n);
    J.col(i) = col;
    xp[i] = x[i];
    xm[i] = x[i];
  }
  return J;
}

namespace {

void clamp_box(Eigen::VectorXd& x, const Eigen::VectorXd& lo, const Eigen::VectorXd& hi) {
  if (lo.size() == x.size()) x = x.cwiseMax(lo);
  if (hi.size() == x.size()) x = x.cwiseMin(hi);
}

}  // namespace

NewtonResult newton_solve(const Residual& F, const Jacobian& J, Eigen::VectorXd x0,
                          const NewtonOptions& opts) {
  opts.solver.validate();
  clamp_box(x0, opts.lower, opts.upper);
  NewtonResult res;
  res.x = std::move(x0);

  if (opts.jacobian_check_tol >= 0.0) {
    const Eigen::MatrixXd Ja = J(res.x);
    const Eigen::MatrixXd Jf = finite_difference_jacobian(F, res.x);
    const double scale = std::max(Ja.cwiseAbs().maxCoeff(), std::numeric_limits<double>::min());
    const double mismatch = (Ja - Jf).cwiseAbs().maxCoeff() / scale;
    if (!(mismatch <= opts.jacobian_check_tol)) {
      std::ostringstream os;
      os << "newton_solve: Jacobian disagrees with finite differences (relative mismatch "
         << mismatch << ")";
      throw SolverError(os.str());
    }
  }

  Eigen::VectorXd Fx = F(res.x);
  for (int it = 0;; ++it) {
    res.residual_norm = Fx.cwiseAbs().maxCoeff();
    res.iterations = it;
    if (!std::isfinite(res.residual_norm)) throw SolverError("newton_solve: non-finite residual");
    const double target = opts.solver.abs_tol + opts.solver.rel_tol * res.x.cwiseAbs().maxCoeff();
    if (res.residual_norm <= target) return res;
    if (it >= opts.solver.max_iter) {
      std::ostringstream os;
      os << "newton_solve: no convergence after " << it << " iterations (|F| = "
         << res.residual_norm << ")";
      throw SolverError(os.str());
    }
    const Eigen::MatrixXd Jx = J(res.x);
    Eigen::FullPivLU<Eigen::MatrixXd> lu(Jx);
    if (!lu.isInvertible()) throw SolverError("newton_solve: singular Jacobian");
    const Eigen::VectorXd dx = lu.solve(-Fx);
    if (!dx.allFinite()) throw SolverError("newton_solve: singular Jacobian");

    const double f0 = Fx.squaredNorm();
    double lambda = opts.solver.damping_init > 0.0 ? std::min(opts.solver.damping_init, 1.0) : 1.0;
    bool accepted = false;
    for (; lambda >= 1e-12; lambda *= 0.5) {
      Eigen::VectorXd xt = res.x + lambda * dx;
      clamp_box(xt, opts.lower, opts.upper);
      Eigen::VectorXd Ft = F(xt);
      const double ft = Ft.squaredNorm();
      if (std::isfinite(ft) && ft <= (1.0 - 1e-4 * lambda) * f0) {
        res.x = std::move(xt);
        Fx = std::move(Ft);
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      std::ostringstream os;
      os << "newton_solve: line search failed after " << it << " iterations (|F| = "
         << res.residual_norm << ")";
      throw SolverError(os.str());
    }
  }
}

// ---------------------------------------------------------------------------

bool LeastSquaresResult::any_at_bound() const {
  return std::any_of(at_bound.begin(), at_bound.end(), [](bool b) { return b; });
}

namespace {

Eigen::MatrixXd bounded_fd_jacobian(const Residual& R, const Eigen::VectorXd& p,
                                    const Eigen::VectorXd& r0, const Eigen::VectorXd& lo,
                                    const Eigen::VectorXd& hi) {
  const double sq = std::sqrt(std::numeric_limits<double>::epsilon());
  Eigen::MatrixXd J(r0.size(), p.size());
  Eigen::VectorXd pp = p;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    const double h = sq * std::max(std::abs(p[i]), 1.0);
    const bool up_ok = hi.size() != p.size() || p[i] + h <= hi[i];
    const bool dn_ok = lo.size() != p.size() || p[i] - h >= lo[i];
    if (up_ok && dn_ok) {
      pp[i] = p[i] + h;
      const Eigen::VectorXd rp = R(pp);
      pp[i] = p[i] - h;
      const Eigen::VectorXd rm = R(pp);
      J.col(i) = (rp - rm) / (2.0 * h);
    } else {
      const double s = up_ok ? h : -h;
      pp[i] = p[i] + s;
      J.col(i) = (R(pp) - r0) / s;
    }
    pp[i] = p[i];
  }
  return J;
}

}  // namespace

LeastSquaresResult least_squares(const LeastSquaresProblem& problem, Eigen::VectorXd params0,
                                 const SolverConfig& cfg) {
  cfg.validate();
  const auto& lo = problem.lower;
  const auto& hi = problem.upper;
  clamp_box(params0, lo, hi);
  LeastSquaresResult res;
  res.params = std::move(params0);
  Eigen::VectorXd r = problem.residuals(res.params);
  if (r.size() < res.params.size())
    throw FitError("least_squares: fewer residuals than parameters");
  if (!r.allFinite()) throw FitError("least_squares: non-finite residual at the starting point");
  res.cost = 0.5 * r.squaredNorm();

  double lambda = cfg.damping_init > 0.0 ? cfg.damping_init : 1e-3;
  for (int it = 0; it < cfg.max_iter; ++it) {
    res.iterations = it + 1;
    const Eigen::MatrixXd J = bounded_fd_jacobian(problem.residuals, res.params, r, lo, hi);
    const Eigen::MatrixXd A = J.transpose() * J;
    const Eigen::VectorXd g = J.transpose() * r;
    if (A.diagonal().minCoeff() <= 0.0)
      throw FitError("least_squares: singular normal equations (a parameter has no effect)");
    if (g.cwiseAbs().maxCoeff() <= cfg.abs_tol * std::max(1.0, res.cost)) {
      res.converged = true;
      break;
    }

    bool stepped = false;
    while (lambda < 1e16) {
      Eigen::MatrixXd Ad = A;
      Ad.diagonal() += lambda * A.diagonal();
      Eigen::LDLT<Eigen::MatrixXd> ldlt(Ad);
      if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) {
        lambda *= 10.0;
        continue;
      }
      Eigen::VectorXd pt = res.params - ldlt.solve(g);
      clamp_box(pt, lo, hi);
      const Eigen::VectorXd rt = problem.residuals(pt);
      const double ct = 0.5 * rt.squaredNorm();
      if (rt.allFinite() && ct < res.cost) {
        const double dp = (pt - res.params).cwiseAbs().maxCoeff();
        const double dc = res.cost - ct;
        res.params = std::move(pt);
        r = rt;
        res.cost = ct;
        lambda = std::max(lambda / 3.0, 1e-12);
        stepped = true;
        if (dp <= cfg.rel_tol * (res.params.cwiseAbs().maxCoeff() + cfg.rel_tol) ||
            dc <= cfg.rel_tol * res.cost + 0.5 * cfg.abs_tol * cfg.abs_tol)
          res.converged = true;
        break;
      }
      lambda *= 4.0;
    }
    if (!stepped) {
      // No downhill step exists at any damping: a stationary point.
      res.converged = true;
      break;
    }
    if (res.converged) break;
  }

  res.at_bound.assign(static_cast<std::size_t>(res.params.size()), false);
  for (Eigen::Index i = 0; i < res.params.size(); ++i) {
    const double p = res.params[i];
    if (lo.size() == res.params.size() && std::abs(p - lo[i]) <= 1e-9 * std::max(1.0, std::abs(lo[i])))
      res.at_bound[i] = true;
    if (hi.size() == res.params.size() && std::abs(p - hi[i]) <= 1e-9 * std::max(1.0, std::abs(hi[i])))
      res.at_bound[i] = true;
  }
  return res;
}

}  // namespace pbec::numerics
