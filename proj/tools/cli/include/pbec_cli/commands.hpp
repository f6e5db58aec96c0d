#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "pbec_cli/config.hpp"

namespace pbec::cli {

// Each command writes its CSV to `out_path` and, where it has one, a JSON
// summary next to it (same stem, .json). Errors surface as pbec exceptions.

/// Columns: pump_rate, n_tot, n_0..n_{K-1}, f_max, phase_label, gamma.
nlohmann::json cmd_sweep_pump(const RunConfig& rc, const std::string& out_path);

/// Columns: lambda0, pump_rate, gamma, phase_label, ground_fraction.
nlohmann::json cmd_phase_map(const RunConfig& rc, std::vector<double> lambda0_list,
                             const std::string& out_path, int threads);

struct FitRequest {
  std::string kind;  // be, microlaser, coherence
  std::string data_path;
  std::optional<RunConfig> config;  // required for be (the ladder)
  long row = -1;                    // sweep CSV row for be; -1 is the last
  int levels = 0;                   // sweep CSV levels used for be; 0 is all
};

/// Writes the fit report as JSON to out_path and returns it.
nlohmann::json cmd_fit(const FitRequest& req, const std::string& out_path);

/// Columns: tau, re_g1, im_g1, abs_g1. Single-mode runs add a JSON sidecar.
nlohmann::json cmd_coherence(const RunConfig& rc, const std::string& mode,
                             const std::string& out_path);

/// Entry point used by the executable; returns the process exit code
/// (0 ok, 2 configuration, 3 solver, 4 fit, 1 anything else).
int run(int argc, char** argv, std::ostream& out, std::ostream& err);

std::string format_number(double x);

}  // namespace pbec::cli
