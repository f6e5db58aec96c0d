#include "pbec/noneq.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <numbers>
#include <sstream>
#include <thread>

#include <boost/math/quadrature/gauss.hpp>

#include "pbec/constants.hpp"
#include "pbec/errors.hpp"

namespace pbec {

namespace cst = constants;
using std::numbers::pi;

void PumpConfig::validate() const {
  if (!(waist_um > 0.0)) throw ConfigError("pump: waist must be positive");
  if (!(rate >= 0.0) || !std::isfinite(rate)) throw ConfigError("pump: rate must be >= 0");
}

double SpatialGrid::total_molecules() const {
  double s = 0.0;
  for (double m : molecules) s += m;
  return s;
}

double oscillator_length(const CavityConfig& cavity) {
  const double m_ph = cst::h * cavity.n_medium * cavity.n_medium / (cst::c * cavity.lambda0_nm * 1e-9);
  const double omega = 2.0 * pi * cavity.mean_trap_frequency_hz();
  return std::sqrt(cst::hbar / (m_ph * omega));
}

double shell_intensity(int m, double r, double b) {
  if (m < 0) throw DomainError("shell_intensity: negative level");
  const double rho = r * r / (b * b);
  const double gauss = std::exp(-rho);
  double sum = 0.0;
  for (int l = m % 2; l <= m; l += 2) {
    const auto n = static_cast<unsigned>((m - l) / 2);
    const auto al = static_cast<unsigned>(l);
    double ratio = 1.0;  // n! / (n + l)!
    for (unsigned k = 1; k <= al; ++k) ratio /= static_cast<double>(n + k);
    const double lag = std::assoc_laguerre(n, al, rho);
    const double term = ratio * std::pow(rho, l) * gauss * lag * lag;
    sum += (l == 0 ? 1.0 : 2.0) * term;
  }
  return sum / (pi * b * b * (m + 1));
}

SpatialGrid build_grid(const CavityConfig& cavity, const DyeModel& dye, const PumpConfig& pump,
                       const GridOptions& opts) {
  cavity.validate();
  dye.validate();
  pump.validate();
  if (opts.n_bins < 1) throw ConfigError("grid: n_bins must be >= 1");
  double extent_um;
  if (opts.extent_um) {
    extent_um = *opts.extent_um;
  } else {
    if (!(opts.extent_factor > 0.0)) throw ConfigError("grid: extent factor must be positive");
    extent_um = opts.extent_factor * std::max(pump.waist_um, oscillator_length(cavity) * 1e6);
  }
  if (!(extent_um > 0.0) || !std::isfinite(extent_um))
    throw ConfigError("grid: extent must be positive");

  SpatialGrid g;
  const auto nb = static_cast<std::size_t>(opts.n_bins);
  const double L = cavity.length_m();
  const double w = pump.waist_um * 1e-6;
  for (std::size_t j = 0; j < nb; ++j) {
    const double r1 = extent_um * static_cast<double>(j) / static_cast<double>(nb);
    const double r2 = extent_um * static_cast<double>(j + 1) / static_cast<double>(nb);
    const double a = pi * (r2 * r2 - r1 * r1) * 1e-12;
    g.inner_um.push_back(r1);
    g.outer_um.push_back(r2);
    g.r_um.push_back(0.5 * (r1 + r2));
    g.area_m2.push_back(a);
    g.molecules.push_back(dye.n_mol * a * L);
    const double s1 = r1 * 1e-6, s2 = r2 * 1e-6;
    const double prof = 0.5 * pi * w * w *
                        (std::exp(-2.0 * s1 * s1 / (w * w)) - std::exp(-2.0 * s2 * s2 / (w * w))) / a;
    g.profile.push_back(prof);
  }
  return g;
}

OverlapMatrix build_overlaps(const ModeLadder& ladder, const SpatialGrid& grid,
                             const CavityConfig& cavity) {
  if (ladder.modes.empty()) throw ConfigError("build_overlaps: empty ladder");
  if (grid.size() == 0) throw ConfigError("build_overlaps: empty grid");
  const double b = oscillator_length(cavity);
  const std::size_t K = ladder.size(), J = grid.size();
  double a_grid = 0.0;
  for (double a : grid.area_m2) a_grid += a;

  using Quad = boost::math::quadrature::gauss<double, 30>;
  OverlapMatrix out;
  out.eta.resize(static_cast<Eigen::Index>(K), static_cast<Eigen::Index>(J));
  std::vector<double> bin(J);
  for (std::size_t m = 0; m < K; ++m) {
    const int level = ladder.modes[m].index;
    double total = 0.0;
    for (std::size_t j = 0; j < J; ++j) {
      bin[j] = Quad::integrate(
          [&](double r) { return 2.0 * pi * r * shell_intensity(level, r, b); },
          grid.inner_um[j] * 1e-6, grid.outer_um[j] * 1e-6);
      total += bin[j];
    }
    if (m == 0 && total < 0.99) {
      std::ostringstream os;
      os << "build_overlaps: grid holds only " << 100.0 * total
         << "% of the ground-mode intensity (need 99%)";
      throw ConfigError(os.str());
    }
    if (!(total > 0.0)) throw ConfigError("build_overlaps: mode has no weight on the grid");
    for (std::size_t j = 0; j < J; ++j)
      out.eta(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(j)) =
          bin[j] / total * a_grid / grid.area_m2[j];
  }
  return out;
}

void NoneqParams::validate() const {
  cavity.validate();
  dye.validate();
  pump.validate();
  const auto K = static_cast<Eigen::Index>(n_modes());
  const auto J = static_cast<Eigen::Index>(n_bins());
  if (K == 0 || J == 0) throw ConfigError("noneq: empty ladder or grid");
  if (eta.eta.rows() != K || eta.eta.cols() != J)
    throw ConfigError("noneq: overlap matrix shape mismatch");
  if (A.size() != K || E.size() != K) throw ConfigError("noneq: rate vector size mismatch");
  if (grid.molecules.size() != grid.size() || grid.profile.size() != grid.size())
    throw ConfigError("noneq: grid column size mismatch");
  for (std::size_t j = 0; j < grid.size(); ++j) {
    if (!(grid.molecules[j] > 0.0)) throw ConfigError("noneq: bin molecule counts must be positive");
    if (!(grid.profile[j] >= 0.0)) throw ConfigError("noneq: pump profile must be >= 0");
    if (j > 0 && !(grid.r_um[j] > grid.r_um[j - 1]))
      throw ConfigError("noneq: bin radii must be strictly increasing");
  }
  if (!(eta.eta.array() >= 0.0).all()) throw ConfigError("noneq: overlaps must be >= 0");
  for (Eigen::Index m = 0; m < K; ++m) {
    if (!(A[m] >= 0.0) || !(E[m] >= 0.0)) throw ConfigError("noneq: rates must be >= 0");
    if (A[m] == 0.0) continue;
    const auto& mode = ladder.modes[static_cast<std::size_t>(m)];
    const double ks =
        kennard_stepanov_ratio(mode.eps - photon_energy(dye.lambda_zpl_nm), dye.T_dye);
    if (!(std::abs(E[m] / (A[m] * ks) - 1.0) <= 1e-12)) {
      std::ostringstream os;
      os << "noneq: emission/absorption ratio of level " << m
         << " violates the Kennard-Stepanov relation";
      throw ConfigError(os.str());
    }
  }
}

NoneqParams make_noneq_params(const CavityConfig& cavity, const DyeModel& dye, int n_levels,
                              const PumpConfig& pump, const GridOptions& grid) {
  NoneqParams p;
  p.cavity = cavity;
  p.dye = dye;
  p.pump = pump;
  p.grid_options = grid;
  p.ladder = build_mode_ladder(cavity, n_levels);
  p.grid = build_grid(cavity, dye, pump, grid);
  p.eta = build_overlaps(p.ladder, p.grid, cavity);
  const double m_tot = p.grid.total_molecules();
  const double eps_zpl = photon_energy(dye.lambda_zpl_nm);
  const auto K = static_cast<Eigen::Index>(p.ladder.size());
  p.A.resize(K);
  p.E.resize(K);
  for (Eigen::Index m = 0; m < K; ++m) {
    const auto& mode = p.ladder.modes[static_cast<std::size_t>(m)];
    p.A[m] = dye.n_mol * dye.sigma_abs.sigma_at(mode.lambda_nm) * cavity.c_star() / m_tot;
    p.E[m] = p.A[m] * kennard_stepanov_ratio(mode.eps - eps_zpl, dye.T_dye);
  }
  p.validate();
  return p;
}

NoneqParams with_cutoff(const NoneqParams& base, double lambda0_nm) {
  CavityConfig c = base.cavity;
  c.lambda0_nm = lambda0_nm;
  return make_noneq_params(c, base.dye, static_cast<int>(base.n_modes()), base.pump,
                           base.grid_options);
}

SimState SimState::vacuum(const NoneqParams& p) {
  SimState s;
  s.n.assign(p.n_modes(), 0.0);
  s.f.assign(p.n_bins(), 0.0);
  return s;
}

// ---------------------------------------------------------------------------

void rate_rhs(const NoneqParams& p, std::span<const double> y, std::span<double> dydt) {
  const std::size_t K = p.n_modes(), J = p.n_bins();
  const double* n = y.data();
  const double* f = y.data() + K;
  double* dn = dydt.data();
  double* df = dydt.data() + K;
  for (std::size_t j = 0; j < J; ++j)
    df[j] = p.pump_at(j) * (1.0 - f[j]) - p.dye.gamma_down * f[j];
  for (std::size_t m = 0; m < K; ++m) {
    const double Em = p.E[static_cast<Eigen::Index>(m)];
    const double Am = p.A[static_cast<Eigen::Index>(m)];
    const double g = p.ladder.modes[m].g;
    double gain = 0.0;
    for (std::size_t j = 0; j < J; ++j) {
      const double eta = p.eta.eta(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(j));
      const double x = eta * (Em * f[j] * (n[m] + g) - Am * (1.0 - f[j]) * n[m]);
      gain += p.grid.molecules[j] * x;
      df[j] -= x;
    }
    dn[m] = -p.cavity.kappa * n[m] + gain;
  }
}

Eigen::MatrixXd rate_jacobian(const NoneqParams& p, std::span<const double> y) {
  const std::size_t K = p.n_modes(), J = p.n_bins();
  const double* n = y.data();
  const double* f = y.data() + K;
  Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(K + J),
                                              static_cast<Eigen::Index>(K + J));
  for (std::size_t j = 0; j < J; ++j) {
    const auto jj = static_cast<Eigen::Index>(K + j);
    jac(jj, jj) = -p.pump_at(j) - p.dye.gamma_down;
  }
  for (std::size_t m = 0; m < K; ++m) {
    const auto mm = static_cast<Eigen::Index>(m);
    const double Em = p.E[mm], Am = p.A[mm];
    const double g = p.ladder.modes[m].g;
    double dnn = -p.cavity.kappa;
    for (std::size_t j = 0; j < J; ++j) {
      const auto jj = static_cast<Eigen::Index>(K + j);
      const double eta = p.eta.eta(mm, static_cast<Eigen::Index>(j));
      const double dx_dn = eta * (Em * f[j] - Am * (1.0 - f[j]));
      const double dx_df = eta * (Em * (n[m] + g) + Am * n[m]);
      dnn += p.grid.molecules[j] * dx_dn;
      jac(mm, jj) = p.grid.molecules[j] * dx_df;
      jac(jj, mm) = -dx_dn;
      jac(jj, jj) -= dx_df;
    }
    jac(mm, mm) = dnn;
  }
  return jac;
}

Derivatives rate_derivatives(const SimState& state, const NoneqParams& p) {
  const std::size_t K = p.n_modes(), J = p.n_bins();
  if (state.n.size() != K || state.f.size() != J)
    throw ConfigError("rate_derivatives: state shape does not match the parameters");
  std::vector<double> y(K + J), d(K + J);
  std::copy(state.n.begin(), state.n.end(), y.begin());
  std::copy(state.f.begin(), state.f.end(), y.begin() + static_cast<std::ptrdiff_t>(K));
  rate_rhs(p, y, d);
  Derivatives out;
  out.dn.assign(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(K));
  out.df.assign(d.begin() + static_cast<std::ptrdiff_t>(K), d.end());
  return out;
}

namespace {

std::vector<double> pack(const SimState& s) {
  std::vector<double> y(s.n);
  y.insert(y.end(), s.f.begin(), s.f.end());
  return y;
}

SimState unpack(std::span<const double> y, std::size_t K, double t) {
  SimState s;
  s.n.assign(y.begin(), y.begin() + static_cast<std::ptrdiff_t>(K));
  s.f.assign(y.begin() + static_cast<std::ptrdiff_t>(K), y.end());
  s.t = t;
  return s;
}

void project_state(std::span<double> y, std::size_t K) {
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (y[i] < 0.0) y[i] = 0.0;
    if (i >= K && y[i] > 1.0) y[i] = 1.0;
  }
}

void check_state(const SimState& s, const NoneqParams& p) {
  if (s.n.size() != p.n_modes() || s.f.size() != p.n_bins())
    throw ConfigError("noneq: state shape does not match the parameters");
  for (double x : s.n)
    if (!(x >= 0.0)) throw ConfigError("noneq: populations must be >= 0");
  for (double x : s.f)
    if (!(x >= 0.0 && x <= 1.0)) throw ConfigError("noneq: excitation fractions must lie in [0, 1]");
}

}  // namespace

SimState evolve(const SimState& state, const NoneqParams& p, double t_final,
                const EvolveOptions& opts) {
  check_state(state, p);
  if (!(t_final > state.t)) throw ConfigError("evolve: t_final must exceed the state time");
  const std::size_t K = p.n_modes();
  numerics::OdeOptions o;
  o.rel_tol = opts.rel_tol;
  o.abs_tol = opts.abs_tol;
  o.max_steps = opts.max_steps;
  o.project = [K](std::span<double> y) { project_state(y, K); };
  const auto y0 = pack(state);
  auto res = numerics::integrate_ode(
      [&p](double, std::span<const double> y, std::span<double> d) { rate_rhs(p, y, d); }, y0,
      state.t, t_final, o);
  return unpack(res.y, K, res.t);
}

// ---------------------------------------------------------------------------

namespace {

struct ScaledSystem {
  const NoneqParams& p;
  Eigen::VectorXd row_scale;

  explicit ScaledSystem(const NoneqParams& params) : p(params) {
    const std::size_t K = p.n_modes(), J = p.n_bins();
    row_scale.resize(static_cast<Eigen::Index>(K + J));
    // Photon rows: loss plus the total exchange rate with the reservoir, so
    // the tolerance stays above rounding when re-absorption dominates kappa.
    for (std::size_t m = 0; m < K; ++m) {
      const auto mm = static_cast<Eigen::Index>(m);
      double r = p.cavity.kappa;
      for (std::size_t j = 0; j < J; ++j)
        r += p.grid.molecules[j] * p.eta.eta(mm, static_cast<Eigen::Index>(j)) *
             (p.A[mm] + p.E[mm] * p.ladder.modes[m].g);
      row_scale[mm] = 1.0 / r;
    }
    for (std::size_t j = 0; j < J; ++j) {
      double r = p.pump_at(j) + p.dye.gamma_down;
      for (std::size_t m = 0; m < K; ++m)
        r += p.eta.eta(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(j)) *
             (p.E[static_cast<Eigen::Index>(m)] * p.ladder.modes[m].g +
              p.A[static_cast<Eigen::Index>(m)]);
      row_scale[static_cast<Eigen::Index>(K + j)] = r > 0.0 ? 1.0 / r : 1.0;
    }
  }

  Eigen::VectorXd F(const Eigen::VectorXd& x) const {
    Eigen::VectorXd d(x.size());
    rate_rhs(p, std::span<const double>(x.data(), static_cast<std::size_t>(x.size())),
             std::span<double>(d.data(), static_cast<std::size_t>(d.size())));
    return row_scale.cwiseProduct(d);
  }

  Eigen::MatrixXd J(const Eigen::VectorXd& x) const {
    return row_scale.asDiagonal() *
           rate_jacobian(p, std::span<const double>(x.data(), static_cast<std::size_t>(x.size())));
  }
};

Eigen::VectorXd to_vec(const SimState& s) {
  const auto y = pack(s);
  return Eigen::Map<const Eigen::VectorXd>(y.data(), static_cast<Eigen::Index>(y.size()));
}

// Photons slaved to the reservoir: f from pump against decay and spontaneous
// emission, then each level's gain-loss balance at that f.
Eigen::VectorXd adiabatic_seed(const NoneqParams& p) {
  const std::size_t K = p.n_modes(), J = p.n_bins();
  Eigen::VectorXd x(static_cast<Eigen::Index>(K + J));
  for (std::size_t j = 0; j < J; ++j) {
    double spont = 0.0;
    for (std::size_t m = 0; m < K; ++m)
      spont += p.eta.eta(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(j)) *
               p.E[static_cast<Eigen::Index>(m)] * p.ladder.modes[m].g;
    const double P = p.pump_at(j);
    const double den = P + p.dye.gamma_down + spont;
    x[static_cast<Eigen::Index>(K + j)] = den > 0.0 ? P / den : 0.0;
  }
  for (std::size_t m = 0; m < K; ++m) {
    const auto mm = static_cast<Eigen::Index>(m);
    double src = 0.0, net = p.cavity.kappa;
    for (std::size_t j = 0; j < J; ++j) {
      const double f = x[static_cast<Eigen::Index>(K + j)];
      const double w = p.grid.molecules[j] * p.eta.eta(mm, static_cast<Eigen::Index>(j));
      src += w * p.E[mm] * f * p.ladder.modes[m].g;
      net += w * (p.A[mm] * (1.0 - f) - p.E[mm] * f);
    }
    x[mm] = src / std::max(net, 1e-3 * p.cavity.kappa);
  }
  return x;
}

struct Attempt {
  bool ok = false;
  Eigen::VectorXd x;
  double residual = 0.0;
  int iterations = 0;
  std::string error;
};

Attempt newton_at(const NoneqParams& p, const Eigen::VectorXd& x0, double tol) {
  const ScaledSystem sys(p);
  const std::size_t K = p.n_modes();
  numerics::NewtonOptions o;
  o.solver = {tol, tol, 100, 1.0};
  o.lower = Eigen::VectorXd::Zero(x0.size());
  o.upper = Eigen::VectorXd::Constant(x0.size(), std::numeric_limits<double>::infinity());
  o.upper.tail(x0.size() - static_cast<Eigen::Index>(K)).setOnes();
  Attempt a;
  try {
    auto r = numerics::newton_solve([&](const Eigen::VectorXd& x) { return sys.F(x); },
                                    [&](const Eigen::VectorXd& x) { return sys.J(x); }, x0, o);
    a.ok = true;
    a.x = std::move(r.x);
    a.residual = r.residual_norm;
    a.iterations = r.iterations;
  } catch (const Error& e) {
    a.error = e.what();
  }
  return a;
}

// Walks the pump from `from_rate` (where `x` solves the system) to the target.
Attempt homotopy(const NoneqParams& p, Eigen::VectorXd x, double from_rate, double tol,
                 int max_steps) {
  NoneqParams q = p;
  const double target = p.pump.rate;
  double cur = from_rate;
  double step = std::log(target / cur);
  Attempt last;
  int total_iter = 0;
  for (int k = 0; k < max_steps; ++k) {
    const double next = std::min(target, cur * std::exp(step));
    q.pump.rate = k + 1 == max_steps ? target : next;
    Attempt a = newton_at(q, x, tol);
    if (a.ok) {
      total_iter += a.iterations;
      x = a.x;
      cur = q.pump.rate;
      if (cur >= target) {
        a.iterations = total_iter;
        return a;
      }
      step *= 1.5;
    } else {
      last = std::move(a);
      step *= 0.5;
      if (step < 1e-8) break;
    }
  }
  last.ok = false;
  if (last.error.empty()) last.error = "pump homotopy did not reach the target";
  return last;
}

}  // namespace

SimState steady_state(const NoneqParams& p, const SimState* seed, const SteadyStateOptions& opts,
                      SteadyStateInfo* info) {
  p.validate();
  const std::size_t K = p.n_modes();
  std::vector<std::string> failures;
  auto finish = [&](const Attempt& a, std::string_view path) {
    if (info) {
      info->residual = a.residual;
      info->newton_iterations = a.iterations;
      info->path = path;
    }
    Eigen::VectorXd x = a.x;
    std::span<double> y(x.data(), static_cast<std::size_t>(x.size()));
    project_state(y, K);
    return unpack(y, K, 0.0);
  };
  auto note = [&](std::string_view path, const Attempt& a) {
    failures.push_back(std::string(path) + ": " + a.error);
  };

  if (seed) {
    check_state(*seed, p);
    Attempt a = newton_at(p, to_vec(*seed), opts.tol);
    if (a.ok) return finish(a, "seed");
    note("seed", a);
    if (opts.seed_pump_rate > 0.0 && opts.seed_pump_rate < p.pump.rate) {
      a = homotopy(p, to_vec(*seed), opts.seed_pump_rate, opts.tol, opts.max_homotopy_steps);
      if (a.ok) return finish(a, "seed-homotopy");
      note("seed-homotopy", a);
    }
  }

  const Eigen::VectorXd x_ad = adiabatic_seed(p);
  {
    Attempt a = newton_at(p, x_ad, opts.tol);
    if (a.ok) return finish(a, "adiabatic");
    note("adiabatic", a);
  }

  // A few hundred photon lifetimes relax the field against the reservoir.
  try {
    std::vector<double> y(x_ad.data(), x_ad.data() + x_ad.size());
    EvolveOptions eo;
    eo.max_steps = 20'000;
    const SimState s = evolve(unpack(y, K, 0.0), p, 200.0 / p.cavity.kappa, eo);
    Attempt a = newton_at(p, to_vec(s), opts.tol);
    if (a.ok) return finish(a, "short-evolve");
    note("short-evolve", a);
  } catch (const Error& e) {
    failures.push_back(std::string("short-evolve: ") + e.what());
  }

  if (p.pump.rate > 0.0) {
    NoneqParams q = p;
    q.pump.rate = p.pump.rate * 1e-6;
    Attempt a0 = newton_at(q, adiabatic_seed(q), opts.tol);
    if (a0.ok) {
      Attempt a = homotopy(p, a0.x, q.pump.rate, opts.tol, opts.max_homotopy_steps);
      if (a.ok) return finish(a, "homotopy");
      note("homotopy", a);
    } else {
      note("homotopy start", a0);
    }
  }

  // Last resort: plain time integration, then a final Newton polish.
  {
    std::vector<double> last(x_ad.data(), x_ad.data() + x_ad.size());
    numerics::OdeOptions o;
    o.max_steps = opts.max_fallback_steps;
    o.project = [K](std::span<double> y) { project_state(y, K); };
    o.observer = [&last](double, std::span<const double> y) { last.assign(y.begin(), y.end()); };
    const double horizon = 20.0 / std::max(p.dye.gamma_down, 1e-3 * p.cavity.kappa);
    try {
      numerics::integrate_ode(
          [&p](double, std::span<const double> y, std::span<double> d) { rate_rhs(p, y, d); },
          last, 0.0, horizon, o);
    } catch (const Error& e) {
      failures.push_back(std::string("time integration: ") + e.what());
    }
    Eigen::VectorXd x = Eigen::Map<Eigen::VectorXd>(last.data(), static_cast<Eigen::Index>(last.size()));
    Attempt a = newton_at(p, x, opts.tol);
    if (a.ok) return finish(a, "time-integration");
    note("time-integration", a);
  }

  std::ostringstream os;
  os << "steady_state: no convergence at pump rate " << p.pump.rate << " 1/s";
  for (const auto& f : failures) os << "\n  " << f;
  throw SolverError(os.str());
}

BalanceReport excitation_balance(const SimState& state, const NoneqParams& p) {
  check_state(state, p);
  BalanceReport r;
  for (std::size_t j = 0; j < p.n_bins(); ++j) {
    const double M = p.grid.molecules[j];
    r.pumped += M * p.pump_at(j) * (1.0 - state.f[j]);
    r.lost += p.dye.gamma_down * M * state.f[j];
  }
  for (double n : state.n) r.lost += p.cavity.kappa * n;
  const double scale = std::max(r.pumped, r.lost);
  r.relative_residual = scale > 0.0 ? std::abs(r.pumped - r.lost) / scale : 0.0;
  return r;
}

// ---------------------------------------------------------------------------

std::optional<std::size_t> SweepResult::threshold_index() const {
  for (std::size_t i = 0; i < points.size(); ++i)
    if (std::any_of(points[i].phase.condensed.begin(), points[i].phase.condensed.end(),
                    [](bool b) { return b; }))
      return i;
  return std::nullopt;
}

SweepResult sweep_pump(const NoneqParams& p, std::span<const double> rates,
                       const SweepOptions& opts) {
  for (std::size_t i = 0; i < rates.size(); ++i) {
    if (!(rates[i] >= 0.0) || !std::isfinite(rates[i]))
      throw ConfigError("sweep_pump: pump rates must be finite and >= 0");
    if (i > 0 && !(rates[i] > rates[i - 1]))
      throw ConfigError("sweep_pump: pump rates must be strictly increasing");
  }
  const std::size_t K = p.n_modes();
  if (opts.observed_levels < 0 || static_cast<std::size_t>(opts.observed_levels) > K)
    throw ConfigError("sweep_pump: observed_levels outside the ladder");
  const std::size_t K_obs = opts.observed_levels == 0 ? K : static_cast<std::size_t>(opts.observed_levels);

  SweepResult out;
  out.lambda0_nm = p.cavity.lambda0_nm;
  out.gamma = thermalisation_ratio(p.dye, p.cavity, p.cavity.lambda0_nm);
  NoneqParams q = p;
  std::optional<SimState> prev;
  double prev_rate = 0.0;
  for (std::size_t i = 0; i < rates.size(); ++i) {
    q.pump.rate = rates[i];
    SteadyStateOptions so;
    so.seed_pump_rate = prev_rate;
    SimState s;
    try {
      s = steady_state(q, prev ? &*prev : nullptr, so);
    } catch (const SolverError& e) {
      std::ostringstream os;
      os << "sweep_pump: point " << i << " (pump rate " << rates[i] << "): " << e.what();
      throw SolverError(os.str());
    }
    SweepPoint pt;
    pt.pump_rate = rates[i];
    pt.n = s.n;
    pt.f = s.f;
    double all = 0.0;
    for (double x : s.n) all += x;
    for (std::size_t m = 0; m < K_obs; ++m) pt.n_tot += s.n[m];
    pt.ground_fraction = pt.n_tot > 0.0 ? s.n[0] / pt.n_tot : 0.0;
    pt.f_max = s.f.empty() ? 0.0 : *std::max_element(s.f.begin(), s.f.end());
    if (all > 0.0 && K >= 2) pt.truncation_fraction = (s.n[K - 1] + s.n[K - 2]) / all;
    const std::span<const double> obs(s.n.data(), K_obs);
    if (pt.n_tot > 0.0) {
      pt.phase = classify_condensation(obs, p.dye.T_dye, p.ladder.spacing, opts.criterion);
    } else {
      pt.phase.phase = Phase::NotCondensed;
      pt.phase.condensed.assign(K_obs, false);
    }
    out.points.push_back(std::move(pt));
    prev = std::move(s);
    prev_rate = rates[i];
  }
  return out;
}

PhaseMap sweep_cutoff(const NoneqParams& base, std::span<const double> lambda0_list,
                      std::span<const double> rates, const SweepOptions& opts, int threads) {
  for (double l : lambda0_list)
    if (!base.dye.sigma_abs.contains(l)) {
      std::ostringstream os;
      os << "sweep_cutoff: lambda0 = " << l << " nm outside the dye table";
      throw ConfigError(os.str());
    }
  PhaseMap map;
  map.rows.resize(lambda0_list.size());
  std::vector<std::exception_ptr> errors(lambda0_list.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < lambda0_list.size();) {
      try {
        map.rows[i] = sweep_pump(with_cutoff(base, lambda0_list[i]), rates, opts);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const int nt = std::clamp(threads, 1, static_cast<int>(std::max<std::size_t>(1, lambda0_list.size())));
  if (nt == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < nt; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return map;
}

}  // namespace pbec
