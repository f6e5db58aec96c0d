#pragma once

#include <complex>
#include <optional>
#include <span>
#include <vector>

#include "pbec/physics.hpp"

namespace pbec {

struct CoherenceSeries {
  std::vector<double> tau;  // s
  std::vector<std::complex<double>> g1;
  std::vector<double> visibility;  // |g1|
};

struct G1Options {
  // Explicit per-mode weights; Boltzmann weights at T when absent.
  std::optional<std::vector<double>> populations;
  // Per-mode population decay rates d_m (1/s); the field decays at d_m / 2.
  std::optional<std::vector<double>> damping;
};

/// g1(tau) = sum n_m exp(-i eps_m tau / hbar) exp(-d_m |tau| / 2) / sum n_m,
/// returned in the frame rotating with the lowest mode: eps_m is measured
/// from the lowest energy, so the optical carrier stays out of g1 and enters
/// only through simulate_interferogram.
CoherenceSeries g1_thermal(std::span<const ResolvedMode> modes, double T,
                           std::span<const double> tau_grid, const G1Options& opts = {});

// |g1| level taken as "collapsed". For a 2D thermal gas |g1| ~ 1/(1 + (kT tau/hbar)^2),
// so 5% is reached near tau = 0.7 h/kT.
inline constexpr double kCollapseLevel = 0.05;

/// First delay at which |g1| drops below `level`, linearly interpolated
/// between grid points; NaN when it never does.
double collapse_time(const CoherenceSeries& series, double level = kCollapseLevel);

/// Largest |g1| on the grid within [tau_lo, tau_hi]; NaN if no point lies there.
double peak_visibility(const CoherenceSeries& series, double tau_lo, double tau_hi);

/// Damping kappa + n_mol sigma(lambda_m) c* for every mode.
std::vector<double> default_damping(std::span<const ResolvedMode> modes, const CavityConfig& cavity,
                                    const DyeModel& dye);

/// Low-photon-number coherence time 2 / (kappa + reabs).
double coherence_time_single_mode(double kappa, double reabs);

struct SchawlowTownes {
  double tau_c = 0.0;
  bool phenomenological = true;  // the crossover shape is an interpolation
  bool discrepancy_region = false;  // n >= 50, where measurements disagree
};

inline constexpr double kCoherenceDiscrepancyN = 50.0;

/// tau_c0 * (1 + n / crossover_n).
SchawlowTownes schawlow_townes_tau(double n, double tau_c0, double crossover_n);

struct Interferogram {
  double i1 = 0.0;
  double i2 = 0.0;
  std::complex<double> g1;
  double omega = 0.0;
  double tau = 0.0;
  double i_max = 0.0;
  double i_min = 0.0;
  double visibility = 0.0;

  double intensity(double phi) const;
};

/// Mach-Zehnder output for arm intensity ratio I1/I2; I1 + I2 = 1.
Interferogram simulate_interferogram(std::complex<double> g1, double omega, double tau,
                                     double arm_ratio);

struct CoherenceFit {
  double tau_c = 0.0;
  double tau_0 = 0.0;
  double amplitude = 0.0;
  double residual = 0.0;
  int iterations = 0;
};

/// Fits amplitude * exp(-|tau - tau_0| / tau_c) to the visibilities.
CoherenceFit fit_exponential_coherence(const CoherenceSeries& series);

}  // namespace pbec
