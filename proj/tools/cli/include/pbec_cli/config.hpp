#pragma once

#include <optional>
#include <string>
#include <vector>

#include <pbec/equilibrium.hpp>
#include <pbec/noneq.hpp>
#include <pbec/physics.hpp>

namespace pbec::cli {

struct SweepRange {
  double from = 0.0;
  double to = 0.0;
  int points = 1;
  bool log = true;

  std::vector<double> values() const;
};

struct CoherenceSettings {
  std::string mode = "multimode";  // or "single"
  std::optional<double> T;         // defaults to the dye temperature
  int modes_x = 40;
  int modes_y = 40;
  bool damping = false;  // multimode only; single mode is always damped
  double tau_from = 0.0;  // s
  double tau_to = 2e-12;
  int tau_points = 2001;
  std::optional<double> n0;  // photon number for the Schawlow-Townes estimate
  double crossover_n = 1.0;
};

struct RunConfig {
  std::string path;
  std::string sha256;  // of the file bytes

  CavityConfig cavity;
  DyeModel dye;
  PumpConfig pump;
  double pump_calibration = 1.0;  // excitation rate per nominal pump unit, 1/s
  GridOptions grid;
  int levels = 20;
  SweepRange pump_sweep;  // nominal units
  std::vector<double> lambda0_list;
  SweepOptions classify;
  CoherenceSettings coherence;

  std::vector<double> pump_rates() const;  // pump_sweep times the calibration
  NoneqParams noneq_params() const;
};

/// Parses the YAML file; every dimensional value carries a unit suffix.
/// Relative paths inside the file resolve against its directory.
RunConfig load_run_config(const std::string& path);

/// "557 nm" -> 5.57e-7 in SI, checked against the expected dimension.
enum class Dim { Length, Frequency, Rate, Time, Temperature, Density, Area };
double parse_quantity(const std::string& text, Dim dim);
/// As parse_quantity but expressed in a target unit given by its SI factor (1e-9 for nm).
double parse_quantity_in(const std::string& text, Dim dim, double target);

std::string sha256_hex(const std::string& bytes);

}  // namespace pbec::cli
