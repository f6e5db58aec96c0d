#pragma once

#include <cstddef>
#include <optional>
#include <string_view>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "pbec/equilibrium.hpp"
#include "pbec/numerics.hpp"
#include "pbec/physics.hpp"

namespace pbec {

struct PumpConfig {
  double waist_um = 2.4;  // 1/e^2 radius of the Gaussian spot
  double rate = 0.0;      // peak excitation rate per molecule, 1/s

  void validate() const;
};

struct GridOptions {
  int n_bins = 64;
  double extent_factor = 6.0;       // times max(waist, oscillator length)
  std::optional<double> extent_um;  // overrides the factor when set
};

// Annular bins of the molecular reservoir.
struct SpatialGrid {
  std::vector<double> inner_um;
  std::vector<double> outer_um;
  std::vector<double> r_um;       // bin centre
  std::vector<double> area_m2;
  std::vector<double> molecules;  // M_j
  std::vector<double> profile;    // bin-averaged pump profile, peak 1

  std::size_t size() const { return r_um.size(); }
  double total_molecules() const;
};

SpatialGrid build_grid(const CavityConfig& cavity, const DyeModel& dye, const PumpConfig& pump,
                       const GridOptions& opts = {});

/// sqrt(hbar / (m_ph * 2 pi f)) with the photon mass h n^2 / (c lambda0), in m.
double oscillator_length(const CavityConfig& cavity);

/// Degeneracy-averaged radial intensity of level m, normalised to unit power.
double shell_intensity(int m, double r, double b);

// eta(m, j). Rows satisfy sum_j eta(m, j) * area_j / sum(area) = 1.
struct OverlapMatrix {
  Eigen::MatrixXd eta;
};

OverlapMatrix build_overlaps(const ModeLadder& ladder, const SpatialGrid& grid,
                             const CavityConfig& cavity);

struct NoneqParams {
  CavityConfig cavity;
  DyeModel dye;
  ModeLadder ladder;
  PumpConfig pump;
  GridOptions grid_options;
  SpatialGrid grid;
  OverlapMatrix eta;
  Eigen::VectorXd A;  // absorption per molecule, 1/s
  Eigen::VectorXd E;  // emission per molecule, 1/s

  std::size_t n_modes() const { return ladder.size(); }
  std::size_t n_bins() const { return grid.size(); }
  double pump_at(std::size_t j) const { return pump.rate * grid.profile[j]; }

  // Shape checks plus the Kennard-Stepanov relation between E and A. Modes
  // with A_m = 0 carry no detailed-balance constraint and are exempt.
  void validate() const;
};

/// Full construction: ladder, grid, overlaps and the rates pinned so that
/// sum_j M_j eta(0, j) A_0 = n_mol sigma(lambda0) c*.
NoneqParams make_noneq_params(const CavityConfig& cavity, const DyeModel& dye, int n_levels,
                              const PumpConfig& pump, const GridOptions& grid = {});

/// Same parameters with the ladder, overlaps and rates rebuilt for a new cutoff.
NoneqParams with_cutoff(const NoneqParams& base, double lambda0_nm);

struct SimState {
  std::vector<double> n;  // level populations, degeneracy included
  std::vector<double> f;  // excited fraction per bin
  double t = 0.0;

  static SimState vacuum(const NoneqParams& p);
};

struct Derivatives {
  std::vector<double> dn;
  std::vector<double> df;
};

/// dn_m/dt = -kappa n_m + sum_j M_j eta_mj X_mj
/// df_j/dt = P_j (1 - f_j) - gamma_down f_j - sum_m eta_mj X_mj
/// X_mj = E_m f_j (n_m + g_m) - A_m (1 - f_j) n_m
Derivatives rate_derivatives(const SimState& state, const NoneqParams& p);

// Flat-vector forms, y = [n..., f...].
void rate_rhs(const NoneqParams& p, std::span<const double> y, std::span<double> dydt);
Eigen::MatrixXd rate_jacobian(const NoneqParams& p, std::span<const double> y);

struct EvolveOptions {
  double rel_tol = 1e-8;
  double abs_tol = 1e-12;
  long max_steps = 5'000'000;
};

/// Explicit adaptive integration with n >= 0, 0 <= f <= 1 projection.
SimState evolve(const SimState& state, const NoneqParams& p, double t_final,
                const EvolveOptions& opts = {});

struct SteadyStateOptions {
  double tol = 1e-13;      // on rates scaled by their characteristic size
  double seed_pump_rate = 0.0;  // pump rate the seed solves, enables homotopy from it
  int max_homotopy_steps = 400;
  long max_fallback_steps = 200'000;
};

struct SteadyStateInfo {
  double residual = 0.0;  // max scaled residual
  int newton_iterations = 0;
  std::string_view path;  // which seed produced the solution
};

/// Solves rate_derivatives = 0 by damped Newton. Seeds tried in order: the
/// optional previous solution, an adiabatic estimate, a short evolve from that
/// estimate, a pump homotopy, and finally capped time integration.
SimState steady_state(const NoneqParams& p, const SimState* seed = nullptr,
                      const SteadyStateOptions& opts = {}, SteadyStateInfo* info = nullptr);

/// Excitation balance residual: sum M P (1-f) - gamma sum M f - kappa sum n.
struct BalanceReport {
  double pumped = 0.0;
  double lost = 0.0;
  double relative_residual = 0.0;
};
BalanceReport excitation_balance(const SimState& state, const NoneqParams& p);

struct SweepOptions {
  CriterionConfig criterion;
  int observed_levels = 0;  // levels used for classification; 0 means all
};

struct SweepPoint {
  double pump_rate = 0.0;
  std::vector<double> n;
  std::vector<double> f;
  double n_tot = 0.0;      // over the observed levels
  double ground_fraction = 0.0;
  double f_max = 0.0;
  double truncation_fraction = 0.0;  // share held by the top two levels
  PhaseLabel phase;
};

inline constexpr double kTruncationLimit = 0.005;

struct SweepResult {
  double lambda0_nm = 0.0;
  double gamma = 0.0;
  std::vector<SweepPoint> points;

  // Index of the first point where any level is flagged, if any.
  std::optional<std::size_t> threshold_index() const;
};

/// Rates must be strictly increasing; each point seeds the next.
SweepResult sweep_pump(const NoneqParams& p, std::span<const double> rates,
                       const SweepOptions& opts = {});

struct PhaseMap {
  std::vector<SweepResult> rows;  // one per cutoff, in input order
};

/// Independent cutoffs run on up to `threads` workers; output order is fixed.
PhaseMap sweep_cutoff(const NoneqParams& base, std::span<const double> lambda0_list,
                      std::span<const double> rates, const SweepOptions& opts = {},
                      int threads = 1);

}  // namespace pbec
