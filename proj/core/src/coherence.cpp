#include "pbec/coherence.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "pbec/constants.hpp"
#include "pbec/errors.hpp"
#include "pbec/numerics.hpp"

namespace pbec {

namespace cst = constants;

CoherenceSeries g1_thermal(std::span<const ResolvedMode> modes, double T,
                           std::span<const double> tau_grid, const G1Options& opts) {
  if (modes.empty()) throw ConfigError("g1_thermal: empty ladder");
  const std::size_t m = modes.size();
  double eps_ref = modes[0].eps;
  for (const auto& md : modes) eps_ref = std::min(eps_ref, md.eps);

  std::vector<double> w(m);
  if (opts.populations) {
    if (opts.populations->size() != m) throw ConfigError("g1_thermal: population count mismatch");
    w = *opts.populations;
    for (double x : w)
      if (!(x >= 0.0)) throw DomainError("g1_thermal: populations must be >= 0");
  } else {
    if (!(T > 0.0)) throw DomainError("g1_thermal: T must be positive");
    for (std::size_t i = 0; i < m; ++i) w[i] = std::exp(-(modes[i].eps - eps_ref) / (cst::k_B * T));
  }
  double wsum = 0.0;
  for (double x : w) wsum += x;
  if (!(wsum > 0.0)) throw DomainError("g1_thermal: populations sum to zero");

  std::vector<double> d(m, 0.0);
  if (opts.damping) {
    if (opts.damping->size() != m) throw ConfigError("g1_thermal: damping count mismatch");
    d = *opts.damping;
    for (double x : d)
      if (!(x >= 0.0)) throw DomainError("g1_thermal: damping must be >= 0");
  }

  std::vector<double> dw(m);
  for (std::size_t i = 0; i < m; ++i) dw[i] = (modes[i].eps - eps_ref) / cst::hbar;

  CoherenceSeries out;
  out.tau.assign(tau_grid.begin(), tau_grid.end());
  out.g1.resize(tau_grid.size());
  out.visibility.resize(tau_grid.size());
  for (std::size_t k = 0; k < tau_grid.size(); ++k) {
    const double tau = tau_grid[k];
    if (!std::isfinite(tau)) throw DomainError("g1_thermal: non-finite delay");
    double re = 0.0, im = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      if (w[i] == 0.0) continue;
      const double amp = w[i] * std::exp(-0.5 * d[i] * std::abs(tau));
      const double ph = dw[i] * tau;
      re += amp * std::cos(ph);
      im -= amp * std::sin(ph);
    }
    out.g1[k] = {re / wsum, im / wsum};
    out.visibility[k] = std::abs(out.g1[k]);
  }
  return out;
}

std::vector<double> default_damping(std::span<const ResolvedMode> modes, const CavityConfig& cavity,
                                    const DyeModel& dye) {
  std::vector<double> d;
  d.reserve(modes.size());
  for (const auto& m : modes)
    d.push_back(cavity.kappa +
                dye.n_mol * dye.sigma_abs.sigma_at(photon_wavelength_nm(m.eps)) * cavity.c_star());
  return d;
}

double collapse_time(const CoherenceSeries& series, double level) {
  const auto& v = series.visibility;
  for (std::size_t k = 1; k < v.size(); ++k) {
    if (v[k] < level && v[k - 1] >= level) {
      const double t = (v[k - 1] - level) / (v[k - 1] - v[k]);
      return series.tau[k - 1] + t * (series.tau[k] - series.tau[k - 1]);
    }
  }
  return std::numeric_limits<double>::quiet_NaN();
}

double peak_visibility(const CoherenceSeries& series, double tau_lo, double tau_hi) {
  double best = std::numeric_limits<double>::quiet_NaN();
  for (std::size_t k = 0; k < series.tau.size(); ++k) {
    if (series.tau[k] < tau_lo || series.tau[k] > tau_hi) continue;
    if (!(best >= series.visibility[k])) best = series.visibility[k];
  }
  return best;
}

double coherence_time_single_mode(double kappa, double reabs) {
  if (!(kappa > 0.0)) throw DomainError("coherence_time_single_mode: kappa must be positive");
  if (!(reabs >= 0.0)) throw DomainError("coherence_time_single_mode: reabs must be >= 0");
  return 2.0 / (kappa + reabs);
}

SchawlowTownes schawlow_townes_tau(double n, double tau_c0, double crossover_n) {
  if (!(n >= 0.0)) throw DomainError("schawlow_townes_tau: n must be >= 0");
  if (!(tau_c0 > 0.0) || !(crossover_n > 0.0))
    throw DomainError("schawlow_townes_tau: tau_c0 and crossover_n must be positive");
  SchawlowTownes r;
  r.tau_c = tau_c0 * (1.0 + n / crossover_n);
  r.discrepancy_region = n >= kCoherenceDiscrepancyN;
  return r;
}

double Interferogram::intensity(double phi) const {
  return i1 + i2 + 2.0 * std::sqrt(i1 * i2) * std::abs(g1) * std::cos(omega * tau + std::arg(g1) + phi);
}

Interferogram simulate_interferogram(std::complex<double> g1, double omega, double tau,
                                     double arm_ratio) {
  if (!(arm_ratio > 0.0)) throw DomainError("simulate_interferogram: arm_ratio must be positive");
  Interferogram r;
  r.i1 = arm_ratio / (1.0 + arm_ratio);
  r.i2 = 1.0 / (1.0 + arm_ratio);
  r.g1 = g1;
  r.omega = omega;
  r.tau = tau;
  const double fringe = 2.0 * std::sqrt(r.i1 * r.i2) * std::abs(g1);
  r.i_max = r.i1 + r.i2 + fringe;
  r.i_min = r.i1 + r.i2 - fringe;
  r.visibility = fringe / (r.i1 + r.i2);
  return r;
}

CoherenceFit fit_exponential_coherence(const CoherenceSeries& series) {
  const std::size_t n = series.tau.size();
  if (n < 5 || series.visibility.size() != n)
    throw FitError("fit_exponential_coherence: need at least 5 delay points");
  Eigen::VectorXd t(n), v(n);
  for (std::size_t i = 0; i < n; ++i) {
    t[i] = series.tau[i];
    v[i] = series.visibility[i];
    if (!std::isfinite(t[i]) || !std::isfinite(v[i]))
      throw ConfigError("fit_exponential_coherence: non-finite data");
  }
  const double tmin = t.minCoeff(), tmax = t.maxCoeff();
  const double span = tmax - tmin;
  if (!(span > 0.0)) throw FitError("fit_exponential_coherence: delays must not coincide");
  Eigen::Index imax = 0;
  const double vmax = v.maxCoeff(&imax);
  if (!(vmax > 0.0)) throw FitError("fit_exponential_coherence: no signal");

  // p = (amplitude, tau_0 / span, ln(tau_c / span))
  auto model = [&](const Eigen::VectorXd& p) {
    Eigen::VectorXd out(n);
    const double t0 = p[1] * span, tc = std::exp(p[2]) * span;
    for (std::size_t i = 0; i < n; ++i) out[i] = p[0] * std::exp(-std::abs(t[i] - t0) / tc);
    return out;
  };
  numerics::LeastSquaresProblem prob;
  prob.residuals = [&](const Eigen::VectorXd& p) -> Eigen::VectorXd { return model(p) - v; };
  prob.lower = Eigen::Vector3d(0.0, tmin / span - 1.0, std::log(1e-6));
  prob.upper = Eigen::Vector3d(10.0 * vmax, tmax / span + 1.0, std::log(1e3));

  double est = 0.0;
  int cnt = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = v[i] / vmax;
    if (r > 0.05 && r < 0.95) {
      est += std::abs(t[i] - t[imax]) / -std::log(r);
      ++cnt;
    }
  }
  std::vector<double> tcs{0.1 * span, 0.3 * span, span};
  if (cnt > 0) tcs.insert(tcs.begin(), est / cnt);

  numerics::LeastSquaresResult best;
  bool have = false;
  for (double tc : tcs) {
    Eigen::VectorXd p0(3);
    p0 << vmax, t[imax] / span, std::log(tc / span);
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
  if (!have) throw FitError("fit_exponential_coherence: no start converged");

  CoherenceFit out;
  out.amplitude = best.params[0];
  out.tau_0 = best.params[1] * span;
  out.tau_c = std::exp(best.params[2]) * span;
  out.residual = 2.0 * best.cost;
  out.iterations = best.iterations;
  if (out.tau_c >= 10.0 * span || best.at_bound[2] || !(out.amplitude > 0.0))
    throw FitError("fit_exponential_coherence: data does not decay over the delay window");
  return out;
}

}  // namespace pbec
