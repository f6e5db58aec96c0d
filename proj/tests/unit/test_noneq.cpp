#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include <pbec/errors.hpp>
#include <pbec/microlaser.hpp>
#include <pbec/noneq.hpp>

#include "test_support.hpp"

using namespace pbec;

namespace {

DyeModel reference_dye() {
  DyeModel d;
  d.sigma_abs = load_dye_spectra(test::data_path("dye_reference.tsv"));
  return d;
}

NoneqParams small_params(double lambda0 = 560.0, double rate = 0.0, int levels = 8, int bins = 16) {
  CavityConfig c;
  c.lambda0_nm = lambda0;
  c.f_x_thz = c.f_y_thz = 1.5;
  GridOptions g;
  g.n_bins = bins;
  return make_noneq_params(c, reference_dye(), levels, PumpConfig{2.4, rate}, g);
}

// Normalised 1D oscillator eigenfunctions by the stable three-term recurrence.
std::vector<double> hermite_functions(int nmax, double x) {
  std::vector<double> psi(static_cast<std::size_t>(nmax + 1));
  psi[0] = std::pow(M_PI, -0.25) * std::exp(-0.5 * x * x);
  if (nmax >= 1) psi[1] = std::sqrt(2.0) * x * psi[0];
  for (int n = 2; n <= nmax; ++n)
    psi[static_cast<std::size_t>(n)] =
        std::sqrt(2.0 / n) * x * psi[static_cast<std::size_t>(n - 1)] -
        std::sqrt((n - 1.0) / n) * psi[static_cast<std::size_t>(n - 2)];
  return psi;
}

// Degeneracy-averaged level density along the x axis (y = 0), in units of
// 1/b^2. The shell sum is rotationally symmetric, so this is the radial profile.
double level_density(int m, double x) {
  const auto px = hermite_functions(m, x);
  const auto py = hermite_functions(m, 0.0);
  double s = 0.0;
  for (int jx = 0; jx <= m; ++jx) {
    const int jy = m - jx;
    s += px[static_cast<std::size_t>(jx)] * px[static_cast<std::size_t>(jx)] *
         py[static_cast<std::size_t>(jy)] * py[static_cast<std::size_t>(jy)];
  }
  return s / (m + 1);
}

double sum(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0); }

}  // namespace

TEST_CASE("grid geometry and molecule counts") {
  const auto p = small_params();
  const auto& g = p.grid;
  REQUIRE(g.size() == 16u);
  const double L = p.cavity.length_m();
  double area = 0.0;
  for (std::size_t j = 0; j < g.size(); ++j) {
    CHECK(g.molecules[j] > 0.0);
    CHECK(g.molecules[j] == doctest::Approx(p.dye.n_mol * g.area_m2[j] * L));
    if (j > 0) CHECK(g.r_um[j] > g.r_um[j - 1]);
    area += g.area_m2[j];
  }
  CHECK(area == doctest::Approx(M_PI * std::pow(g.outer_um.back() * 1e-6, 2)).epsilon(1e-12));
  CHECK(g.total_molecules() == doctest::Approx(p.dye.n_mol * area * L));
  CHECK(g.outer_um.back() == doctest::Approx(6.0 * 2.4));
  CHECK(g.profile.front() <= 1.0);
  CHECK(g.profile.front() > g.profile.back());
}

TEST_CASE("overlaps: one bin over all space gives unity") {
  CavityConfig c;
  GridOptions g;
  g.n_bins = 1;
  g.extent_um = 60.0;
  const auto p = make_noneq_params(c, reference_dye(), 12, PumpConfig{2.4, 0.0}, g);
  for (Eigen::Index m = 0; m < p.eta.eta.rows(); ++m) CHECK(p.eta.eta(m, 0) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("overlaps: rows normalised, ground mode vanishes far out") {
  const auto p = small_params(560.0, 0.0, 8, 64);
  const double a_tot = sum(p.grid.area_m2);
  for (Eigen::Index m = 0; m < p.eta.eta.rows(); ++m) {
    double s = 0.0;
    for (std::size_t j = 0; j < p.n_bins(); ++j) {
      CHECK(p.eta.eta(m, static_cast<Eigen::Index>(j)) >= 0.0);
      s += p.eta.eta(m, static_cast<Eigen::Index>(j)) * p.grid.area_m2[j] / a_tot;
    }
    CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
  }
  const double b_um = oscillator_length(p.cavity) * 1e6;
  for (std::size_t j = 0; j < p.n_bins(); ++j)
    if (p.grid.inner_um[j] > 6.0 * b_um) CHECK(p.eta.eta(0, static_cast<Eigen::Index>(j)) < 1e-6);
}

TEST_CASE("overlaps for levels 0-5 match a Hermite-function midpoint oracle") {
  const auto p = small_params(560.0, 0.0, 6, 64);
  const double b = oscillator_length(p.cavity);
  const double R = p.grid.outer_um.back() * 1e-6 / b;
  const int N = 1'000'000;
  const double h = R / N;
  const auto J = p.n_bins();
  const double a_tot = sum(p.grid.area_m2);
  for (int m = 0; m <= 5; ++m) {
    std::vector<double> bin(J, 0.0);
    for (int k = 0; k < N; ++k) {
      const double x = (k + 0.5) * h;
      const double r_um = x * b * 1e6;
      const auto j = std::min<std::size_t>(J - 1, static_cast<std::size_t>(r_um / p.grid.outer_um.back() * J));
      bin[j] += 2.0 * M_PI * x * level_density(m, x) * h;
    }
    const double total = sum(bin);
    for (std::size_t j = 0; j < J; ++j) {
      const double eta = bin[j] / total * a_tot / p.grid.area_m2[j];
      CHECK(std::abs(p.eta.eta(m, static_cast<Eigen::Index>(j)) - eta) < 1e-4);
    }
  }
}

TEST_CASE("overlaps: grid too small for the ground mode") {
  CavityConfig c;
  GridOptions g;
  g.extent_um = 0.5;
  CHECK_THROWS_AS(make_noneq_params(c, reference_dye(), 4, PumpConfig{2.4, 0.0}, g), ConfigError);
}

TEST_CASE("absorption is pinned to the thermalisation rate and obeys Kennard-Stepanov") {
  const auto p = small_params(563.0);
  double s = 0.0;
  for (std::size_t j = 0; j < p.n_bins(); ++j) s += p.grid.molecules[j] * p.eta.eta(0, static_cast<Eigen::Index>(j));
  const double reabs = p.dye.n_mol * p.dye.sigma_abs.sigma_at(563.0) * p.cavity.c_star();
  CHECK(s * p.A[0] == doctest::Approx(reabs).epsilon(1e-12));
  for (Eigen::Index m = 0; m < p.A.size(); ++m) {
    const double delta = p.ladder.modes[static_cast<std::size_t>(m)].eps - photon_energy(p.dye.lambda_zpl_nm);
    CHECK(p.E[m] / p.A[m] == doctest::Approx(kennard_stepanov_ratio(delta, p.dye.T_dye)).epsilon(1e-12));
  }
  CHECK_NOTHROW(p.validate());
  auto bad = p;
  bad.E[2] *= 1.01;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("rate_derivatives: vacuum fixed point and pure decay without emission") {
  auto p = small_params();
  const auto d = rate_derivatives(SimState::vacuum(p), p);
  for (double x : d.dn) CHECK(x == 0.0);
  for (double x : d.df) CHECK(x == 0.0);

  p.E.setZero();
  SimState s = SimState::vacuum(p);
  auto g = test::rng(7);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (double& f : s.f) f = u(g);
  for (double& n : s.n) n = 10.0 * u(g);
  const auto d2 = rate_derivatives(s, p);
  for (std::size_t m = 0; m < p.n_modes(); ++m) {
    double loss = p.cavity.kappa;
    for (std::size_t j = 0; j < p.n_bins(); ++j)
      loss += p.grid.molecules[j] * p.eta.eta(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(j)) *
              p.A[static_cast<Eigen::Index>(m)] * (1.0 - s.f[j]);
    CHECK(d2.dn[m] == doctest::Approx(-loss * s.n[m]).epsilon(1e-12));
  }
}

TEST_CASE("excitation balance holds for the derivatives at random states") {
  auto p = small_params(563.0, 3e6);
  auto g = test::rng(8);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int rep = 0; rep < 50; ++rep) {
    SimState s = SimState::vacuum(p);
    for (double& f : s.f) f = u(g);
    for (double& n : s.n) n = 1e3 * u(g);
    const auto d = rate_derivatives(s, p);
    double lhs = sum(d.dn), pumped = 0.0, lost = p.cavity.kappa * sum(s.n);
    for (std::size_t j = 0; j < p.n_bins(); ++j) {
      lhs += p.grid.molecules[j] * d.df[j];
      pumped += p.grid.molecules[j] * p.pump_at(j) * (1.0 - s.f[j]);
      lost += p.dye.gamma_down * p.grid.molecules[j] * s.f[j];
    }
    const double scale = std::abs(pumped) + std::abs(lost) + std::abs(sum(d.dn));
    CHECK(std::abs(lhs - (pumped - lost)) <= 1e-12 * scale);
  }
}

TEST_CASE("analytic Jacobian agrees with finite differences") {
  const auto p = small_params(563.0, 3e6);
  auto g = test::rng(9);
  std::uniform_real_distribution<double> u(0.05, 0.95);
  const auto K = p.n_modes(), J = p.n_bins();
  Eigen::VectorXd y(static_cast<Eigen::Index>(K + J));
  for (std::size_t m = 0; m < K; ++m) y[static_cast<Eigen::Index>(m)] = 100.0 * u(g);
  for (std::size_t j = 0; j < J; ++j) y[static_cast<Eigen::Index>(K + j)] = u(g);
  const auto Ja = rate_jacobian(p, std::span<const double>(y.data(), static_cast<std::size_t>(y.size())));
  const auto F = [&](const Eigen::VectorXd& x) {
    Eigen::VectorXd d(x.size());
    rate_rhs(p, std::span<const double>(x.data(), static_cast<std::size_t>(x.size())),
             std::span<double>(d.data(), static_cast<std::size_t>(d.size())));
    return d;
  };
  const auto Jf = numerics::finite_difference_jacobian(F, y);
  CHECK((Ja - Jf).lpNorm<Eigen::Infinity>() <= 1e-5 * Ja.lpNorm<Eigen::Infinity>());
}

TEST_CASE("evolve: zero pump keeps the vacuum") {
  const auto p = small_params();
  const auto s = evolve(SimState::vacuum(p), p, 1e-9);
  for (double n : s.n) CHECK(n == 0.0);
  for (double f : s.f) CHECK(f == 0.0);
  CHECK(s.t == 1e-9);
  CHECK_THROWS_AS(evolve(s, p, 0.0), ConfigError);
}

TEST_CASE("evolve: single mode with pinned excitation follows the linear ODE") {
  CavityConfig c;
  GridOptions go;
  go.n_bins = 1;
  go.extent_um = 60.0;
  DyeModel d = reference_dye();
  d.gamma_down = 1e14;
  auto p = make_noneq_params(c, d, 1, PumpConfig{100.0, 1e14}, go);
  p.A.setZero();
  const double M = p.grid.molecules[0];
  const double f0 = p.pump_at(0) / (p.pump_at(0) + d.gamma_down);
  // Gain G = M eta E f0 = 0.4 kappa, so n(t) = G/(kappa-G) (1 - exp(-(kappa-G) t)).
  const double G = 0.4 * c.kappa;
  p.E[0] = G / (M * p.eta.eta(0, 0) * f0);
  SimState s = SimState::vacuum(p);
  s.f[0] = f0;
  EvolveOptions o;
  o.rel_tol = 1e-10;
  o.abs_tol = 1e-14;
  for (double t : {2e-12, 5e-12, 2e-11, 1e-10}) {
    const auto r = evolve(s, p, t, o);
    const double exact = G / (c.kappa - G) * (1.0 - std::exp(-(c.kappa - G) * t));
    CHECK(test::rel_err(r.n[0], exact) < 1e-6);
  }
}

TEST_CASE("integrated trajectory conserves excitations to the quadrature of the balance") {
  const auto p = small_params(563.0, 3e6);
  const auto K = p.n_modes(), J = p.n_bins();
  std::vector<double> y0(K + J + 2, 0.0);
  // Extra components accumulate pumped and lost excitations.
  auto field = [&](double, std::span<const double> y, std::span<double> d) {
    rate_rhs(p, y.first(K + J), d.first(K + J));
    double in = 0.0, out = 0.0;
    for (std::size_t m = 0; m < K; ++m) out += p.cavity.kappa * y[m];
    for (std::size_t j = 0; j < J; ++j) {
      in += p.grid.molecules[j] * p.pump_at(j) * (1.0 - y[K + j]);
      out += p.dye.gamma_down * p.grid.molecules[j] * y[K + j];
    }
    d[K + J] = in;
    d[K + J + 1] = out;
  };
  numerics::OdeOptions o;
  o.rel_tol = 1e-10;
  o.abs_tol = 1e-12;
  const auto r = numerics::integrate_ode(field, y0, 0.0, 2e-9, o);
  double stock = 0.0;
  for (std::size_t m = 0; m < K; ++m) stock += r.y[m];
  for (std::size_t j = 0; j < J; ++j) stock += p.grid.molecules[j] * r.y[K + j];
  const double pumped = r.y[K + J], lost = r.y[K + J + 1];
  CHECK(pumped > 0.0);
  CHECK(std::abs(stock - (pumped - lost)) < 1e-6 * pumped);
}

TEST_CASE("steady_state: zero pump is the vacuum") {
  const auto p = small_params();
  const auto s = steady_state(p);
  for (double n : s.n) CHECK(n == 0.0);
  for (double f : s.f) CHECK(f == 0.0);
}

TEST_CASE("steady_state agrees with long-time integration at mid pump") {
  // Fast non-cavity decay keeps the reservoir relaxation short enough to integrate.
  CavityConfig c;
  c.lambda0_nm = 563.0;
  DyeModel d = reference_dye();
  d.gamma_down = 1e9;
  GridOptions go;
  go.n_bins = 8;
  const auto p = make_noneq_params(c, d, 6, PumpConfig{2.4, 2e9}, go);
  SteadyStateInfo info;
  const auto ss = steady_state(p, nullptr, {}, &info);
  // The Newton tolerance is relative to the size of the state.
  const double n_max = *std::max_element(ss.n.begin(), ss.n.end());
  CHECK(info.residual < 1e-10 * std::max(1.0, n_max));
  EvolveOptions o;
  o.rel_tol = 1e-11;
  o.abs_tol = 1e-14;
  const auto ev = evolve(SimState::vacuum(p), p, 4e-7, o);
  double ntot = 0.0;
  for (std::size_t m = 0; m < p.n_modes(); ++m) ntot += ss.n[m];
  CHECK(ntot > 1.0);
  for (std::size_t m = 0; m < p.n_modes(); ++m) CHECK(std::abs(ss.n[m] - ev.n[m]) <= 1e-6 * std::max(1.0, ss.n[m]));
  for (std::size_t j = 0; j < p.n_bins(); ++j) CHECK(std::abs(ss.f[j] - ev.f[j]) <= 1e-6);
  CHECK(excitation_balance(ss, p).relative_residual < 1e-8);
}

TEST_CASE("microlaser limit: single level, no absorption") {
  CavityConfig c;
  GridOptions go;
  go.n_bins = 1;
  go.extent_um = 60.0;
  DyeModel d = reference_dye();
  d.gamma_down = 9.9e6;
  auto p = make_noneq_params(c, d, 1, PumpConfig{1e5, 0.0}, go);
  // Make the one bin's pump exactly uniform.
  p.grid.profile[0] = 1.0;
  p.A.setZero();
  p.E[0] = 1e5 / (p.eta.eta(0, 0));
  const double M = p.grid.molecules[0];
  const double Gamma = d.gamma_down + p.E[0] * p.eta.eta(0, 0);
  const double beta = p.E[0] * p.eta.eta(0, 0) / Gamma;
  const double P_th = c.kappa / beta;
  // With one bin the molecular equation is dN/dt = P - Gamma N (1 + beta n)
  // for N = M f and P = M rate (1 - f), so the microlaser closed form is exact.
  for (double s : {0.01, 0.1, 0.5, 1.0, 2.0, 10.0, 100.0}) {
    auto q = p;
    q.pump.rate = s * P_th / M;
    const auto st = steady_state(q);
    const double n_ml = microlaser_n({beta, c.kappa, M * q.pump.rate * (1.0 - st.f[0]), 1.0});
    CHECK(test::rel_err(st.n[0], n_ml) < 1e-6);
  }
}

TEST_CASE("pump sweeps: monotone, balanced, consistent with single-cutoff maps") {
  const auto p = small_params(563.0, 0.0, 12, 24);
  std::vector<double> rates;
  for (int i = 0; i < 15; ++i) rates.push_back(3e4 * std::pow(10.0, 0.2 * i));
  const auto r = sweep_pump(p, rates);
  REQUIRE(r.points.size() == rates.size());
  CHECK(r.gamma == doctest::Approx(thermalisation_ratio(p.dye, p.cavity, 563.0)).epsilon(1e-12));
  for (std::size_t i = 1; i < r.points.size(); ++i) CHECK(r.points[i].n_tot >= r.points[i - 1].n_tot);
  for (const auto& pt : r.points) {
    SimState s;
    s.n = pt.n;
    s.f = pt.f;
    auto q = p;
    q.pump.rate = pt.pump_rate;
    CHECK(excitation_balance(s, q).relative_residual < 1e-8);
    for (double f : pt.f) CHECK((f >= 0.0 && f <= 1.0));
  }
  const std::vector<double> one{563.0};
  const auto map = sweep_cutoff(p, one, rates);
  REQUIRE(map.rows.size() == 1u);
  for (std::size_t i = 0; i < rates.size(); ++i) {
    CHECK(map.rows[0].points[i].n == r.points[i].n);
    CHECK(map.rows[0].points[i].phase.phase == r.points[i].phase.phase);
  }
}

TEST_CASE("sweep_cutoff: gamma falls with the cutoff and order is preserved across threads") {
  const auto p = small_params(557.0, 0.0, 6, 12);
  const std::vector<double> lam{557.0, 563.0, 570.0, 580.0};
  const std::vector<double> rates{1e5, 1e6};
  const auto a = sweep_cutoff(p, lam, rates, {}, 1);
  const auto b = sweep_cutoff(p, lam, rates, {}, 3);
  for (std::size_t i = 0; i < lam.size(); ++i) {
    CHECK(a.rows[i].lambda0_nm == lam[i]);
    if (i > 0) CHECK(a.rows[i].gamma < a.rows[i - 1].gamma);
    CHECK(a.rows[i].points[1].n == b.rows[i].points[1].n);
  }
  const std::vector<double> outside{700.0};
  CHECK_THROWS_AS(sweep_cutoff(p, outside, rates), ConfigError);
}

TEST_CASE("sweep_pump input checks") {
  const auto p = small_params();
  const std::vector<double> down{2e5, 1e5};
  CHECK_THROWS_AS(sweep_pump(p, down), ConfigError);
  SweepOptions o;
  o.observed_levels = 99;
  const std::vector<double> ok{1e5};
  CHECK_THROWS_AS(sweep_pump(p, ok, o), ConfigError);
  const std::vector<double> zero{0.0};
  const auto r = sweep_pump(p, zero);
  for (double n : r.points[0].n) CHECK(n == 0.0);
  CHECK(r.points[0].phase.phase == Phase::NotCondensed);
}
