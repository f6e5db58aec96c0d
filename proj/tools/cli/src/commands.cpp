#include "pbec_cli/commands.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include <CLI11.hpp>

#include <pbec/coherence.hpp>
#include <pbec/constants.hpp>
#include <pbec/errors.hpp>
#include <pbec/microlaser.hpp>

namespace pbec::cli {

namespace fs = std::filesystem;
using nlohmann::json;

// The tool never draws random numbers; --seedless asserts exactly that.
inline constexpr bool kUsesRng = false;

std::string format_number(double x) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, r.ptr);
}

namespace {

std::ofstream open_out(const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ConfigError("cannot write " + path);
  return os;
}

std::string sidecar_path(const std::string& out_path) {
  return fs::path(out_path).replace_extension(".json").string();
}

void write_json(const std::string& path, const json& j) {
  auto os = open_out(path);
  os << j.dump(2) << '\n';
}

void write_meta(std::ostream& os, const RunConfig& rc, std::string_view command) {
  os << "# pbec " << command << '\n';
  os << "# config: " << fs::path(rc.path).filename().string() << '\n';
  os << "# config_sha256: " << rc.sha256 << '\n';
}

json sweep_summary(const SweepResult& r, const RunConfig& rc) {
  json j;
  j["lambda0_nm"] = r.lambda0_nm;
  j["gamma"] = r.gamma;
  j["points"] = r.points.size();
  double peak = 0.0, trunc = 0.0;
  for (const auto& p : r.points) {
    peak = std::max(peak, p.ground_fraction);
    trunc = std::max(trunc, p.truncation_fraction);
  }
  j["peak_ground_fraction"] = peak;
  j["final_phase"] = r.points.empty() ? "" : std::string(to_string(r.points.back().phase.phase));
  if (const auto t = r.threshold_index()) {
    const auto& p = r.points[*t];
    j["threshold"] = {{"index", *t}, {"pump_rate", p.pump_rate},
                      {"pump_nominal", p.pump_rate / rc.pump_calibration}, {"n_tot", p.n_tot},
                      {"phase_label", std::string(to_string(p.phase.phase))}};
  } else {
    j["threshold"] = nullptr;
  }
  j["truncation"] = {{"max_top_two_fraction", trunc}, {"limit", kTruncationLimit},
                     {"ok", trunc < kTruncationLimit}};
  return j;
}

}  // namespace

json cmd_sweep_pump(const RunConfig& rc, const std::string& out_path) {
  const NoneqParams p = rc.noneq_params();
  const auto rates = rc.pump_rates();
  const SweepResult r = sweep_pump(p, rates, rc.classify);

  auto os = open_out(out_path);
  write_meta(os, rc, "sweep-pump");
  os << "# n_tot sums the classified levels; criterion "
     << to_string(rc.classify.criterion.which) << '\n';
  os << "pump_rate,n_tot";
  for (std::size_t m = 0; m < p.n_modes(); ++m) os << ",n_" << m;
  os << ",f_max,phase_label,gamma\n";
  for (const auto& pt : r.points) {
    os << format_number(pt.pump_rate) << ',' << format_number(pt.n_tot);
    for (double n : pt.n) os << ',' << format_number(n);
    os << ',' << format_number(pt.f_max) << ',' << to_string(pt.phase.phase) << ','
       << format_number(r.gamma) << '\n';
  }

  json j = sweep_summary(r, rc);
  j["command"] = "sweep-pump";
  j["config_sha256"] = rc.sha256;
  j["criterion"] = std::string(to_string(rc.classify.criterion.which));
  j["observed_levels"] = rc.classify.observed_levels == 0 ? rc.levels : rc.classify.observed_levels;
  write_json(sidecar_path(out_path), j);
  return j;
}

json cmd_phase_map(const RunConfig& rc, std::vector<double> lambda0_list,
                   const std::string& out_path, int threads) {
  if (lambda0_list.empty()) lambda0_list = rc.lambda0_list;
  if (lambda0_list.empty()) lambda0_list.push_back(rc.cavity.lambda0_nm);
  const NoneqParams p = rc.noneq_params();
  const auto rates = rc.pump_rates();
  const PhaseMap map = sweep_cutoff(p, lambda0_list, rates, rc.classify, threads);

  auto os = open_out(out_path);
  write_meta(os, rc, "phase-map");
  os << "lambda0,pump_rate,gamma,phase_label,ground_fraction\n";
  json rows = json::array();
  for (const auto& row : map.rows) {
    for (const auto& pt : row.points)
      os << format_number(row.lambda0_nm) << ',' << format_number(pt.pump_rate) << ','
         << format_number(row.gamma) << ',' << to_string(pt.phase.phase) << ','
         << format_number(pt.ground_fraction) << '\n';
    rows.push_back(sweep_summary(row, rc));
  }
  json j{{"command", "phase-map"}, {"config_sha256", rc.sha256}, {"cutoffs", rows}};
  write_json(sidecar_path(out_path), j);
  return j;
}

// ---------------------------------------------------------------------------

namespace {

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  std::optional<std::size_t> column(const std::string& name) const {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) return std::nullopt;
    return static_cast<std::size_t>(it - header.begin());
  }
};

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream is(line);
  while (std::getline(is, cell, ',')) {
    const auto b = cell.find_first_not_of(" \t\r");
    const auto e = cell.find_last_not_of(" \t\r");
    out.push_back(b == std::string::npos ? "" : cell.substr(b, e - b + 1));
  }
  return out;
}

// Numeric CSV with a header row; non-numeric cells (labels) read as NaN.
Table read_table(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open data file " + path);
  Table t;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#' || line.find_first_not_of(" \t\r") == std::string::npos)
      continue;
    auto cells = split(line);
    if (t.header.empty()) {
      t.header = std::move(cells);
      continue;
    }
    if (cells.size() != t.header.size()) throw ConfigError("data file: ragged row in " + path);
    std::vector<double> row;
    for (const auto& c : cells) {
      double v = std::nan("");
      const auto r = std::from_chars(c.data(), c.data() + c.size(), v);
      if (r.ec != std::errc() || r.ptr != c.data() + c.size()) v = std::nan("");
      row.push_back(v);
    }
    t.rows.push_back(std::move(row));
  }
  if (t.header.empty()) throw ConfigError("data file " + path + " has no header");
  return t;
}

std::size_t require(const Table& t, const std::string& name, const std::string& kind) {
  const auto c = t.column(name);
  if (!c) throw ConfigError("data schema mismatch for '" + kind + "': missing column '" + name + "'");
  return *c;
}

json fit_be_report(const FitRequest& req, const Table& t) {
  if (!req.config) throw ConfigError("fit be needs --config for the mode ladder");
  std::vector<LevelSignal> obs;
  if (t.column("level")) {
    const auto cl = require(t, "level", "be"), cs = require(t, "signal", "be");
    for (const auto& r : t.rows) obs.push_back({static_cast<int>(std::lround(r[cl])), r[cs]});
  } else if (t.column("n_0")) {
    if (t.rows.empty()) throw ConfigError("data file has no rows");
    const long idx = req.row < 0 ? static_cast<long>(t.rows.size()) + req.row : req.row;
    if (idx < 0 || idx >= static_cast<long>(t.rows.size()))
      throw ConfigError("--row outside the data file");
    const auto& r = t.rows[static_cast<std::size_t>(idx)];
    for (int m = 0;; ++m) {
      if (req.levels > 0 && m >= req.levels) break;
      const auto c = t.column("n_" + std::to_string(m));
      if (!c) break;
      if (r[*c] > 0.0) obs.push_back({m, r[*c]});
    }
  } else {
    throw ConfigError("data schema mismatch for 'be': need level,signal or n_0.. columns");
  }
  int max_level = 0;
  for (const auto& o : obs) max_level = std::max(max_level, o.level);
  const ModeLadder ladder =
      build_mode_ladder(req.config->cavity, std::max(req.config->levels, max_level + 1));
  const BeFit f = fit_be(obs, ladder);
  return {{"kind", "be"},
          {"params",
           {{"T", f.params.T},
            {"mu", f.params.mu},
            {"mu_over_kT", f.params.mu / (constants::k_B * f.params.T)},
            {"scale", f.params.scale}}},
          {"residual", f.residual},
          {"iterations", f.iterations},
          {"at_bound", f.at_bound},
          {"points", obs.size()}};
}

json fit_microlaser_report(const Table& t) {
  std::size_t cp, cs;
  if (t.column("pump")) {
    cp = require(t, "pump", "microlaser");
    cs = require(t, "signal", "microlaser");
  } else {
    cp = require(t, "pump_rate", "microlaser");
    cs = require(t, "n_0", "microlaser");
  }
  std::vector<PumpSignal> data;
  for (const auto& r : t.rows)
    if (r[cp] > 0.0 && r[cs] > 0.0) data.push_back({r[cp], r[cs]});
  const MicrolaserFit f = fit_microlaser(data);
  return {{"kind", "microlaser"},
          {"params", {{"beta", f.beta}, {"P_th", f.P_th}, {"scale", f.scale}}},
          {"residual", f.residual},
          {"iterations", f.iterations},
          {"at_bound", f.at_bound},
          {"beta_unidentifiable", f.beta_unidentifiable},
          {"points", data.size()}};
}

json fit_coherence_report(const Table& t) {
  const auto ct = require(t, "tau", "coherence");
  const auto cv = t.column("visibility") ? *t.column("visibility") : require(t, "abs_g1", "coherence");
  CoherenceSeries s;
  for (const auto& r : t.rows) {
    s.tau.push_back(r[ct]);
    s.visibility.push_back(r[cv]);
    s.g1.emplace_back(r[cv], 0.0);
  }
  const CoherenceFit f = fit_exponential_coherence(s);
  return {{"kind", "coherence"},
          {"params", {{"tau_c", f.tau_c}, {"tau_0", f.tau_0}, {"amplitude", f.amplitude}}},
          {"residual", f.residual},
          {"iterations", f.iterations},
          {"points", s.tau.size()}};
}

}  // namespace

json cmd_fit(const FitRequest& req, const std::string& out_path) {
  const Table t = read_table(req.data_path);
  json j;
  if (req.kind == "be")
    j = fit_be_report(req, t);
  else if (req.kind == "microlaser")
    j = fit_microlaser_report(t);
  else if (req.kind == "coherence")
    j = fit_coherence_report(t);
  else
    throw ConfigError("fit kind must be be, microlaser or coherence");
  j["data"] = fs::path(req.data_path).filename().string();
  write_json(out_path, j);
  return j;
}

// ---------------------------------------------------------------------------

json cmd_coherence(const RunConfig& rc, const std::string& mode, const std::string& out_path) {
  const auto& co = rc.coherence;
  const std::string m = mode.empty() ? co.mode : mode;
  std::vector<double> tau(static_cast<std::size_t>(co.tau_points));
  for (int i = 0; i < co.tau_points; ++i)
    tau[static_cast<std::size_t>(i)] =
        co.tau_from + (co.tau_to - co.tau_from) * static_cast<double>(i) / (co.tau_points - 1);

  CoherenceSeries s;
  json j{{"command", "coherence"}, {"mode", m}, {"config_sha256", rc.sha256}};
  if (m == "multimode") {
    const auto modes = resolved_modes(rc.cavity, co.modes_x, co.modes_y);
    G1Options opts;
    if (co.damping) opts.damping = default_damping(modes, rc.cavity, rc.dye);
    const double T = co.T.value_or(rc.dye.T_dye);
    s = g1_thermal(modes, T, tau, opts);
    j["T"] = T;
    j["modes"] = modes.size();
    j["damped"] = co.damping;
    j["thermal_time_h_over_kT"] = constants::h / (constants::k_B * T);
    const double tc = collapse_time(s);
    j["collapse_level"] = kCollapseLevel;
    j["collapse_time"] = std::isnan(tc) ? json(nullptr) : json(tc);
    const double t_rev = 1.0 / rc.cavity.mean_trap_frequency_hz();
    const double peak = peak_visibility(s, 0.9 * t_rev, 1.1 * t_rev);
    j["revival_time"] = t_rev;
    j["revival_peak"] = std::isnan(peak) ? json(nullptr) : json(peak);
  } else if (m == "single") {
    const std::vector<ResolvedMode> ground{{0, 0, photon_energy(rc.cavity.lambda0_nm)}};
    const double reabs =
        rc.dye.n_mol * rc.dye.sigma_abs.sigma_at(rc.cavity.lambda0_nm) * rc.cavity.c_star();
    G1Options opts;
    opts.damping = std::vector<double>{rc.cavity.kappa + reabs};
    s = g1_thermal(ground, rc.dye.T_dye, tau, opts);
    const double tc = coherence_time_single_mode(rc.cavity.kappa, reabs);
    const CoherenceFit f = fit_exponential_coherence(s);
    j["kappa"] = rc.cavity.kappa;
    j["reabsorption_rate"] = reabs;
    j["gamma"] = reabs / rc.cavity.kappa;
    j["tau_c_theory"] = tc;
    j["fit"] = {{"tau_c", f.tau_c}, {"tau_0", f.tau_0}, {"amplitude", f.amplitude},
                {"residual", f.residual}};
    if (co.n0) {
      const auto st = schawlow_townes_tau(*co.n0, tc, co.crossover_n);
      j["schawlow_townes"] = {{"n", *co.n0},
                              {"tau_c", st.tau_c},
                              {"crossover_n", co.crossover_n},
                              {"phenomenological", st.phenomenological},
                              {"discrepancy_region", st.discrepancy_region}};
    }
  } else {
    throw ConfigError("coherence mode must be multimode or single");
  }

  auto os = open_out(out_path);
  write_meta(os, rc, "coherence " + m);
  os << "tau,re_g1,im_g1,abs_g1\n";
  for (std::size_t k = 0; k < s.tau.size(); ++k)
    os << format_number(s.tau[k]) << ',' << format_number(s.g1[k].real()) << ','
       << format_number(s.g1[k].imag()) << ',' << format_number(s.visibility[k]) << '\n';
  write_json(sidecar_path(out_path), j);
  return j;
}

// ---------------------------------------------------------------------------

namespace {

std::vector<double> parse_lambda_list(const std::string& text) {
  std::vector<double> out;
  std::istringstream is(text);
  std::string item;
  while (std::getline(is, item, ',')) {
    double v = 0.0;
    const auto b = item.find_first_not_of(' ');
    if (b == std::string::npos) continue;
    const char* s = item.data() + b;
    const auto r = std::from_chars(s, item.data() + item.size(), v);
    if (r.ec != std::errc()) throw ConfigError("bad --lambda0-list entry '" + item + "'");
    out.push_back(v);
  }
  return out;
}

}  // namespace

int run(int argc, char** argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"pbec: photon BEC rate-model sweeps, fits and coherence"};
  app.require_subcommand(1);
  std::string config, out_path;
  int threads = 1;
  bool seedless = false;

  auto* sweep = app.add_subcommand("sweep-pump", "Steady states along the configured pump sweep");
  sweep->footer(
      "CSV columns: pump_rate,n_tot,n_0..n_{K-1},f_max,phase_label,gamma\n"
      "JSON summary (same stem, .json): threshold estimate, peak ground fraction");
  auto* pmap = app.add_subcommand("phase-map", "Pump sweeps repeated over cutoff wavelengths");
  pmap->footer("CSV columns: lambda0,pump_rate,gamma,phase_label,ground_fraction");
  auto* fit = app.add_subcommand("fit", "Fit measured or simulated data");
  fit->footer(
      "Data schemas:\n"
      "  be          level,signal  (or a sweep-pump CSV, one row)\n"
      "  microlaser  pump,signal   (or a sweep-pump CSV: pump_rate,n_0)\n"
      "  coherence   tau,visibility (or tau,...,abs_g1)");
  auto* coh = app.add_subcommand("coherence", "First-order coherence g1(tau)");
  coh->footer(
      "CSV columns: tau,re_g1,im_g1,abs_g1 (g1 in the frame of the lowest mode)\n"
      "JSON sidecar (same stem, .json): collapse time and revival peak (multimode),\n"
      "fitted and predicted tau_c (single)");

  for (auto* sc : {sweep, pmap, coh}) {
    sc->add_option("--config", config, "YAML run configuration")->required()->check(CLI::ExistingFile);
    sc->add_option("--out", out_path, "Output CSV path")->required();
    sc->add_option("--threads", threads, "Worker threads for independent sweeps")->check(CLI::PositiveNumber);
    sc->add_flag("--seedless", seedless, "Assert that no random numbers are used");
  }
  std::string lambda_list;
  pmap->add_option("--lambda0-list", lambda_list, "Comma-separated cutoffs in nm");

  std::string kind, data;
  long row = -1;
  int levels = 0;
  fit->add_option("kind", kind, "be | microlaser | coherence")
      ->required()
      ->check(CLI::IsMember({"be", "microlaser", "coherence"}));
  fit->add_option("--data", data, "Data CSV")->required()->check(CLI::ExistingFile);
  fit->add_option("--config", config, "Run configuration (ladder for be)")->check(CLI::ExistingFile);
  fit->add_option("--out", out_path, "Output JSON path")->required();
  fit->add_option("--row", row, "Row of a sweep CSV to fit (negative counts from the end)");
  fit->add_option("--levels", levels, "Lowest levels of a sweep CSV to fit (0 = all)");
  fit->add_option("--threads", threads, "Ignored by fits")->check(CLI::PositiveNumber);
  fit->add_flag("--seedless", seedless, "Assert that no random numbers are used");

  std::string mode;
  coh->add_option("--mode", mode, "multimode | single (default from config)")
      ->check(CLI::IsMember({"multimode", "single"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }
  if (seedless && kUsesRng) {
    err << "pbec: --seedless requested but this build uses random numbers\n";
    return 2;
  }

  try {
    json summary;
    if (*sweep) {
      summary = cmd_sweep_pump(load_run_config(config), out_path);
    } else if (*pmap) {
      summary = cmd_phase_map(load_run_config(config), parse_lambda_list(lambda_list), out_path,
                              threads);
    } else if (*fit) {
      FitRequest req{kind, data, std::nullopt, row, levels};
      if (!config.empty()) req.config = load_run_config(config);
      summary = cmd_fit(req, out_path);
    } else if (*coh) {
      summary = cmd_coherence(load_run_config(config), mode, out_path);
    }
    out << summary.dump(2) << '\n';
    return 0;
  } catch (const ConfigError& e) {
    err << "pbec: configuration error: " << e.what() << '\n';
    return 2;
  } catch (const DomainError& e) {
    err << "pbec: configuration error: " << e.what() << '\n';
    return 2;
  } catch (const SolverError& e) {
    err << "pbec: solver failure: " << e.what() << '\n';
    return 3;
  } catch (const FitError& e) {
    err << "pbec: fit failure: " << e.what() << '\n';
    return 4;
  } catch (const std::exception& e) {
    err << "pbec: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace pbec::cli
