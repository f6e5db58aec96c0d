#pragma once

#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace pbec {

struct CavityConfig {
  int q = 10;                    // longitudinal mode number
  double lambda0_nm = 570.0;     // cutoff vacuum wavelength
  double f_x_thz = 1.5;          // transverse trap frequencies
  double f_y_thz = 1.5;
  double kappa = 2e11;           // photon loss rate, 1/s
  double n_medium = 1.44;
  std::optional<double> roc_um;  // mirror radius of curvature

  void validate() const;
  double c_star() const;           // speed of light in the medium, m/s
  double length_m() const;         // q * lambda_medium / 2
  double mean_trap_frequency_hz() const;
};

// Tabulated absorption cross-section against vacuum wavelength.
struct SpectralTable {
  std::vector<double> wavelength_nm;  // strictly increasing
  std::vector<double> sigma_m2;       // >= 0

  void validate() const;
  bool contains(double lambda_nm) const;
  // Linear interpolation; throws DomainError outside the table.
  double sigma_at(double lambda_nm) const;
};

struct DyeModel {
  SpectralTable sigma_abs;
  double lambda_zpl_nm = 545.0;
  double T_dye = 300.0;    // K
  double n_mol = 1e24;     // effective molecular density, 1/m^3
  double gamma_down = 1e4; // non-cavity decay, 1/s

  void validate() const;
};

struct ModeGroup {
  int index = 0;
  double eps = 0.0;  // J
  int g = 1;
  double lambda_nm = 0.0;
};

struct ResolvedMode {
  int j_x = 0;
  int j_y = 0;
  double eps = 0.0;  // J
};

struct ModeLadder {
  std::vector<ModeGroup> modes;
  std::vector<ResolvedMode> resolved;  // only filled for anisotropic traps
  double spacing = 0.0;                // h * (f_x + f_y) / 2, J

  std::size_t size() const { return modes.size(); }
  double eps0() const { return modes.front().eps; }
};

ModeLadder build_mode_ladder(const CavityConfig& cavity, int n_levels);

// Every (j_x, j_y) with j_x < n_x and j_y < n_y, ordered by j_x then j_y.
std::vector<ResolvedMode> resolved_modes(const CavityConfig& cavity, int n_x, int n_y);

/// Paraxial plano-concave estimate f = c* / (2 pi sqrt(L * roc)), in THz.
double derive_trap_frequency(const CavityConfig& cavity);

/// gamma = n_mol * sigma(lambda) * c* / kappa.
double thermalisation_ratio(const DyeModel& dye, const CavityConfig& cavity, double lambda_nm);

/// Two columns (wavelength in nm, cross-section in m^2) separated by a tab,
/// comma or spaces. Lines starting with '#' and blank lines are skipped and a
/// single non-numeric header row is tolerated. Rows given in strictly
/// decreasing order are reversed; any other ordering is rejected.
SpectralTable load_dye_spectra(std::istream& in);
SpectralTable load_dye_spectra(const std::string& path);

/// Writes the shortest round-trip representation of every value.
void write_dye_spectra(std::ostream& out, const SpectralTable& table);

/// Emission/absorption ratio exp(-delta / (k_B T)).
double kennard_stepanov_ratio(double delta, double T);

// Photon energy for a vacuum wavelength and back.
double photon_energy(double lambda_nm);
double photon_wavelength_nm(double eps);

}  // namespace pbec
