#include "pbec/equilibrium.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <set>
#include <sstream>

#include "pbec/constants.hpp"
#include "pbec/errors.hpp"

namespace pbec {

namespace cst = constants;

void EquilibriumParams::validate() const {
  if (!(T > 0.0)) throw DomainError("equilibrium: T must be positive");
  if (!(mu < 0.0)) throw DomainError("equilibrium: mu must be below the ground-state energy");
  if (!(scale > 0.0)) throw DomainError("equilibrium: scale must be positive");
}

double be_population(double eps_rel, double g, const EquilibriumParams& params) {
  if (!(params.T > 0.0)) throw DomainError("be_population: T must be positive");
  if (eps_rel < 0.0) throw DomainError("be_population: eps_rel must be >= 0");
  const double x = (eps_rel - params.mu) / (cst::k_B * params.T);
  if (!(x > 0.0)) throw DomainError("be_population: chemical potential at or above the level");
  return g / std::expm1(x);
}

namespace {

// Sum over levels with mu = -x k_B T; e holds (eps_i - eps_0) / k_B T.
double sum_at(const std::vector<double>& e, const std::vector<double>& g, double x) {
  double s = 0.0;
  for (std::size_t i = 0; i < e.size(); ++i) s += g[i] / std::expm1(x + e[i]);
  return s;
}

double log_expm1(double z) { return z > 30.0 ? z + std::log1p(-std::exp(-z)) : std::log(std::expm1(z)); }

}  // namespace

double total_population(const ModeLadder& ladder, double T, double mu) {
  if (ladder.modes.empty()) throw ConfigError("total_population: empty ladder");
  const EquilibriumParams p{T, mu, 1.0};
  double s = 0.0;
  for (const auto& m : ladder.modes) s += be_population(m.eps - ladder.eps0(), m.g, p);
  return s;
}

double solve_mu(double n_tot, const ModeLadder& ladder, double T,
                const numerics::SolverConfig& cfg) {
  if (!(n_tot > 0.0)) throw DomainError("solve_mu: n_tot must be positive");
  if (ladder.modes.empty()) throw ConfigError("solve_mu: empty ladder");
  if (!(T > 0.0)) throw DomainError("solve_mu: T must be positive");
  const double kT = cst::k_B * T;
  std::vector<double> e, g;
  for (const auto& m : ladder.modes) {
    e.push_back((m.eps - ladder.eps0()) / kT);
    g.push_back(m.g);
  }
  // The ground level alone reaches n_tot at x = log1p(g0 / n_tot).
  const double x_lo = 0.5 * std::log1p(g.front() / n_tot);
  double x_hi = std::max(1.0, 4.0 * x_lo);
  for (int k = 0; k < 64 && sum_at(e, g, x_hi) >= n_tot; ++k) x_hi *= 2.0;

  auto h = [&](double x) { return std::log(sum_at(e, g, x)) - std::log(n_tot); };
  double x = 0.0;
  try {
    x = numerics::find_root(h, x_lo, x_hi, cfg);
  } catch (const Error& err) {
    std::ostringstream os;
    os << "solve_mu: " << err.what() << " (bracket mu/kT in [" << -x_hi << ", " << -x_lo << "])";
    throw SolverError(os.str());
  }
  const double got = sum_at(e, g, x);
  if (!(std::abs(got / n_tot - 1.0) <= 1e-10)) {
    std::ostringstream os;
    os << "solve_mu: relative mismatch " << got / n_tot - 1.0 << " at mu/kT = " << -x;
    throw SolverError(os.str());
  }
  return -x * kT;
}

BeFit fit_be(std::span<const LevelSignal> observed, const ModeLadder& ladder) {
  if (ladder.modes.empty()) throw ConfigError("fit_be: empty ladder");
  std::set<int> levels;
  for (const auto& o : observed) {
    if (o.level < 0 || static_cast<std::size_t>(o.level) >= ladder.size())
      throw ConfigError("fit_be: level index outside the ladder");
    if (!(o.signal > 0.0) || !std::isfinite(o.signal))
      throw ConfigError("fit_be: signals must be positive");
    levels.insert(o.level);
  }
  if (levels.size() < 3) throw FitError("fit_be: need at least 3 distinct levels");
  const auto [mn, mx] = std::minmax_element(observed.begin(), observed.end(),
                                            [](auto& a, auto& b) { return a.signal < b.signal; });
  if (mx->signal - mn->signal <= 1e-12 * mx->signal)
    throw FitError("fit_be: degenerate data (all levels carry the same signal)");

  const std::size_t n = observed.size();
  Eigen::VectorXd e(n), g(n), ls(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& m = ladder.modes[static_cast<std::size_t>(observed[i].level)];
    e[i] = m.eps - ladder.eps0();
    g[i] = m.g;
    ls[i] = std::log(observed[i].signal);
  }
  // p = (T, x = -mu / k_B T, ln scale)
  auto log_model = [&](const Eigen::VectorXd& p) {
    Eigen::VectorXd out(n);
    const double kT = cst::k_B * p[0];
    for (std::size_t i = 0; i < n; ++i)
      out[i] = p[2] + std::log(g[i]) - log_expm1(p[1] + e[i] / kT);
    return out;
  };
  numerics::LeastSquaresProblem prob;
  prob.residuals = [&](const Eigen::VectorXd& p) -> Eigen::VectorXd { return log_model(p) - ls; };
  prob.lower = Eigen::Vector3d(1.0, 1e-12, -700.0);
  prob.upper = Eigen::Vector3d(1e5, 700.0, 700.0);

  auto start = [&](double T, double x) {
    Eigen::VectorXd p(3);
    p << T, x, 0.0;
    p[2] = (ls - log_model(p)).mean();
    return p;
  };
  std::vector<Eigen::VectorXd> starts;
  {
    // Signal sum read as a photon number at 300 K, scale from the ground level.
    double sum = 0.0;
    for (const auto& o : observed) sum += o.signal;
    try {
      const double mu = solve_mu(sum, ladder, 300.0);
      starts.push_back(start(300.0, -mu / (cst::k_B * 300.0)));
    } catch (const Error&) {
    }
  }
  for (double T : {300.0, 100.0, 1000.0, 30.0, 3000.0})
    for (double x : {1e-3, 0.1, 1.0, 5.0}) starts.push_back(start(T, x));

  numerics::LeastSquaresResult best;
  bool have = false;
  for (const auto& p0 : starts) {
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
  if (!have) throw FitError("fit_be: no start converged");

  BeFit out;
  out.params.T = best.params[0];
  out.params.mu = -best.params[1] * cst::k_B * best.params[0];
  out.params.scale = std::exp(best.params[2]);
  out.residual = 2.0 * best.cost;
  out.iterations = best.iterations;
  out.at_bound = best.any_at_bound();
  return out;
}

double critical_number_2dho(double T, double eps) {
  if (!(T > 0.0)) throw DomainError("critical_number_2dho: T must be positive");
  if (!(eps > 0.0)) throw DomainError("critical_number_2dho: eps must be positive");
  const double r = cst::k_B * T / eps;
  return std::numbers::pi * std::numbers::pi / 6.0 * r * r;
}

PhaseLabel classify_condensation(std::span<const double> populations, double T, double eps,
                                 const CriterionConfig& cfg) {
  if (populations.empty()) throw ConfigError("classify_condensation: empty population list");
  if (!(cfg.alpha >= 1.0)) throw ConfigError("classify_condensation: alpha must be >= 1");
  double n_tot = 0.0;
  for (double x : populations) {
    if (!(x >= 0.0)) throw DomainError("classify_condensation: negative population");
    n_tot += x;
  }
  if (!(n_tot > 0.0)) throw DomainError("classify_condensation: all populations are zero");

  PhaseLabel label;
  label.condensed.assign(populations.size(), false);
  switch (cfg.which) {
    case Criterion::I:
      label.condensed[0] = populations[0] > n_tot / 2.0;
      break;
    case Criterion::II:
      label.condensed[0] = n_tot > critical_number_2dho(T, eps);
      break;
    case Criterion::III: {
      if (!(T > 0.0) || !(eps > 0.0)) throw DomainError("classify_condensation: bad T or eps");
      const double thr = cst::k_B * T / eps;
      for (std::size_t i = 0; i < populations.size(); ++i) label.condensed[i] = populations[i] > thr;
      break;
    }
    case Criterion::IV: {
      const double thr = std::pow(n_tot, 1.0 / cfg.alpha);
      for (std::size_t i = 0; i < populations.size(); ++i) label.condensed[i] = populations[i] > thr;
      break;
    }
  }
  const bool ground = label.condensed[0];
  const bool excited = std::any_of(label.condensed.begin() + 1, label.condensed.end(),
                                   [](bool b) { return b; });
  if (ground && excited)
    label.phase = Phase::MultimodeCondensate;
  else if (ground)
    label.phase = Phase::BEC;
  else if (excited)
    label.phase = Phase::LaserNoGround;
  else
    label.phase = Phase::NotCondensed;
  return label;
}

std::string_view to_string(Phase phase) {
  switch (phase) {
    case Phase::NotCondensed: return "NotCondensed";
    case Phase::BEC: return "BEC";
    case Phase::MultimodeCondensate: return "MultimodeCondensate";
    case Phase::LaserNoGround: return "LaserNoGround";
  }
  return "?";
}

std::string_view to_string(Criterion criterion) {
  switch (criterion) {
    case Criterion::I: return "i";
    case Criterion::II: return "ii";
    case Criterion::III: return "iii";
    case Criterion::IV: return "iv";
  }
  return "?";
}

}  // namespace pbec
