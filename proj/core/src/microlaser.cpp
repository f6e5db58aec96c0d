#include "pbec/microlaser.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "pbec/errors.hpp"
#include "pbec/numerics.hpp"

namespace pbec {

void MicrolaserParams::validate() const {
  if (!(beta > 0.0) || !(beta <= 1.0)) throw DomainError("microlaser: beta must be in (0, 1]");
  if (!(kappa > 0.0)) throw DomainError("microlaser: kappa must be positive");
  if (!(P >= 0.0)) throw DomainError("microlaser: pump must be >= 0");
  if (!(scale > 0.0)) throw DomainError("microlaser: scale must be positive");
}

double microlaser_n_reduced(double beta, double s) {
  // n^2 + b n - c = 0 with b = (1 - s) / beta, c = s / beta; pick the
  // cancellation-free form of the positive root.
  const double b = (1.0 - s) / beta;
  const double c = s / beta;
  if (c == 0.0) return 0.0;
  const double disc = std::sqrt(b * b + 4.0 * c);
  return b >= 0.0 ? 2.0 * c / (b + disc) : 0.5 * (disc - b);
}

double microlaser_n(const MicrolaserParams& p) {
  p.validate();
  return microlaser_n_reduced(p.beta, p.P / p.P_th());
}

MicrolaserFit fit_microlaser(std::span<const PumpSignal> data) {
  if (data.size() < 5) throw FitError("fit_microlaser: need at least 5 points");
  double pmin = INFINITY, pmax = 0.0;
  for (const auto& d : data) {
    if (!(d.pump > 0.0) || !(d.signal > 0.0) || !std::isfinite(d.pump) || !std::isfinite(d.signal))
      throw ConfigError("fit_microlaser: pump and signal must be positive");
    pmin = std::min(pmin, d.pump);
    pmax = std::max(pmax, d.pump);
  }
  if (pmax < 10.0 * pmin) throw FitError("fit_microlaser: pump must span at least one decade");

  const std::size_t n = data.size();
  Eigen::VectorXd lp(n), ls(n);
  for (std::size_t i = 0; i < n; ++i) {
    lp[i] = std::log(data[i].pump);
    ls[i] = std::log(data[i].signal);
  }
  // p = (ln beta, ln P_th, ln scale)
  auto log_model = [&](const Eigen::VectorXd& p) {
    Eigen::VectorXd out(n);
    const double beta = std::exp(p[0]);
    for (std::size_t i = 0; i < n; ++i)
      out[i] = p[2] + std::log(microlaser_n_reduced(beta, std::exp(lp[i] - p[1])));
    return out;
  };
  numerics::LeastSquaresProblem prob;
  prob.residuals = [&](const Eigen::VectorXd& p) -> Eigen::VectorXd { return log_model(p) - ls; };
  prob.lower = Eigen::Vector3d(std::log(1e-10), std::log(pmin) - 10.0, -700.0);
  prob.upper = Eigen::Vector3d(0.0, std::log(pmax) + 10.0, 700.0);

  numerics::LeastSquaresResult best;
  bool have = false;
  for (double beta : {0.3, 1e-1, 1e-2, 1e-3, 1e-4, 1e-5}) {
    for (int k = 0; k <= 4; ++k) {
      Eigen::VectorXd p0(3);
      p0 << std::log(beta), std::log(pmin) + 0.25 * k * (std::log(pmax) - std::log(pmin)), 0.0;
      p0[2] = (ls - log_model(p0)).mean();
      numerics::LeastSquaresResult r;
      try {
        r = numerics::least_squares(prob, p0);
      } catch (const FitError&) {
        continue;
      }
      if (!have || r.cost < best.cost) {
        best = std::move(r);
        have = true;
      }
    }
  }
  if (!have) throw FitError("fit_microlaser: no start converged");

  // Straight-line comparison in log-log space.
  const double mx = lp.mean(), my = ls.mean();
  const double sxx = (lp.array() - mx).square().sum();
  const double sxy = ((lp.array() - mx) * (ls.array() - my)).sum();
  const double slope = sxy / sxx;
  const double rss_line = ((ls.array() - my) - slope * (lp.array() - mx)).square().sum();

  MicrolaserFit out;
  out.beta = std::exp(best.params[0]);
  out.P_th = std::exp(best.params[1]);
  out.scale = std::exp(best.params[2]);
  out.residual = 2.0 * best.cost;
  out.iterations = best.iterations;
  out.at_bound = best.any_at_bound();
  out.beta_unidentifiable = best.at_bound[0] || out.residual >= 0.5 * rss_line;
  return out;
}

}  // namespace pbec
