#include "pbec/physics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "pbec/constants.hpp"
#include "pbec/errors.hpp"

namespace pbec {

namespace cst = constants;

void CavityConfig::validate() const {
  if (q < 1) throw ConfigError("cavity: q must be >= 1");
  if (!(lambda0_nm > 0.0)) throw ConfigError("cavity: lambda0 must be positive");
  if (!(f_x_thz > 0.0) || !(f_y_thz > 0.0))
    throw ConfigError("cavity: trap frequencies must be positive");
  if (!(kappa > 0.0)) throw ConfigError("cavity: kappa must be positive");
  if (!(n_medium >= 1.0)) throw ConfigError("cavity: n_medium must be >= 1");
  if (roc_um) {
    if (!(*roc_um > 0.0)) throw ConfigError("cavity: roc must be positive");
    if (length_m() >= *roc_um * 1e-6)
      throw ConfigError("cavity: cavity length must be shorter than the mirror roc");
  }
}

double CavityConfig::c_star() const { return cst::c / n_medium; }

double CavityConfig::length_m() const { return q * (lambda0_nm * 1e-9 / n_medium) / 2.0; }

double CavityConfig::mean_trap_frequency_hz() const { return 0.5 * (f_x_thz + f_y_thz) * 1e12; }

void SpectralTable::validate() const {
  if (wavelength_nm.size() != sigma_m2.size())
    throw ConfigError("dye spectrum: column lengths differ");
  if (wavelength_nm.size() < 2) throw ConfigError("dye spectrum: need at least 2 rows");
  for (std::size_t i = 0; i < wavelength_nm.size(); ++i) {
    if (!std::isfinite(wavelength_nm[i]) || !std::isfinite(sigma_m2[i]))
      throw ConfigError("dye spectrum: non-finite value");
    if (sigma_m2[i] < 0.0) throw ConfigError("dye spectrum: negative cross-section");
    if (i > 0 && !(wavelength_nm[i] > wavelength_nm[i - 1]))
      throw ConfigError("dye spectrum: wavelengths must be strictly increasing");
  }
}

bool SpectralTable::contains(double lambda_nm) const {
  return !wavelength_nm.empty() && lambda_nm >= wavelength_nm.front() &&
         lambda_nm <= wavelength_nm.back();
}

double SpectralTable::sigma_at(double lambda_nm) const {
  if (!contains(lambda_nm)) {
    std::ostringstream os;
    os << "wavelength " << lambda_nm << " nm outside the tabulated range";
    if (!wavelength_nm.empty())
      os << " [" << wavelength_nm.front() << ", " << wavelength_nm.back() << "]";
    throw DomainError(os.str());
  }
  auto it = std::lower_bound(wavelength_nm.begin(), wavelength_nm.end(), lambda_nm);
  const auto i = static_cast<std::size_t>(it - wavelength_nm.begin());
  if (*it == lambda_nm) return sigma_m2[i];
  const double x0 = wavelength_nm[i - 1], x1 = wavelength_nm[i];
  const double w = (lambda_nm - x0) / (x1 - x0);
  return (1.0 - w) * sigma_m2[i - 1] + w * sigma_m2[i];
}

void DyeModel::validate() const {
  sigma_abs.validate();
  if (!(lambda_zpl_nm > 0.0)) throw ConfigError("dye: lambda_zpl must be positive");
  if (!(T_dye > 0.0)) throw ConfigError("dye: T_dye must be positive");
  if (!(n_mol > 0.0)) throw ConfigError("dye: n_mol must be positive");
  if (!(gamma_down >= 0.0)) throw ConfigError("dye: gamma_down must be >= 0");
}

double photon_energy(double lambda_nm) { return cst::h * cst::c / (lambda_nm * 1e-9); }

double photon_wavelength_nm(double eps) { return cst::h * cst::c / eps * 1e9; }

ModeLadder build_mode_ladder(const CavityConfig& cavity, int n_levels) {
  if (n_levels < 1) throw ConfigError("mode ladder: n_levels must be >= 1");
  cavity.validate();
  const double fx = cavity.f_x_thz, fy = cavity.f_y_thz;
  if (std::abs(fx - fy) > 0.5 * std::min(fx, fy))
    throw ConfigError("mode ladder: trap frequencies differ by more than 50%");

  ModeLadder ladder;
  const double eps0 = photon_energy(cavity.lambda0_nm);
  ladder.spacing = cst::h * cavity.mean_trap_frequency_hz();
  ladder.modes.reserve(static_cast<std::size_t>(n_levels));
  for (int i = 0; i < n_levels; ++i) {
    ModeGroup m;
    m.index = i;
    m.eps = eps0 + i * ladder.spacing;
    m.g = i + 1;
    m.lambda_nm = photon_wavelength_nm(m.eps);
    ladder.modes.push_back(m);
  }
  if (fx != fy) {
    for (int shell = 0; shell < n_levels; ++shell)
      for (int jx = shell; jx >= 0; --jx) {
        const int jy = shell - jx;
        ladder.resolved.push_back({jx, jy, eps0 + cst::h * 1e12 * (fx * jx + fy * jy)});
      }
  }
  return ladder;
}

std::vector<ResolvedMode> resolved_modes(const CavityConfig& cavity, int n_x, int n_y) {
  if (n_x < 1 || n_y < 1) throw ConfigError("resolved modes: counts must be >= 1");
  cavity.validate();
  const double eps0 = photon_energy(cavity.lambda0_nm);
  std::vector<ResolvedMode> out;
  out.reserve(static_cast<std::size_t>(n_x) * static_cast<std::size_t>(n_y));
  for (int jx = 0; jx < n_x; ++jx)
    for (int jy = 0; jy < n_y; ++jy)
      out.push_back({jx, jy, eps0 + cst::h * 1e12 * (cavity.f_x_thz * jx + cavity.f_y_thz * jy)});
  return out;
}

double derive_trap_frequency(const CavityConfig& cavity) {
  if (!cavity.roc_um) throw ConfigError("derive_trap_frequency: roc not set");
  const double roc = *cavity.roc_um * 1e-6;
  const double L = cavity.length_m();
  if (!(roc > 0.0) || L >= roc)
    throw ConfigError("derive_trap_frequency: cavity length must be shorter than roc");
  return cavity.c_star() / (2.0 * std::numbers::pi * std::sqrt(L * roc)) * 1e-12;
}

double thermalisation_ratio(const DyeModel& dye, const CavityConfig& cavity, double lambda_nm) {
  return dye.n_mol * dye.sigma_abs.sigma_at(lambda_nm) * cavity.c_star() / cavity.kappa;
}

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

bool parse_double(std::string_view s, double& out) {
  s = trim(s);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, out);
  return ec == std::errc() && ptr == end;
}

}  // namespace

SpectralTable load_dye_spectra(std::istream& in) {
  SpectralTable t;
  std::string line;
  int lineno = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++lineno;
    std::string_view s = trim(line);
    if (s.empty() || s.front() == '#') continue;
    std::size_t sep = s.find_first_of("\t,");
    if (sep == std::string_view::npos) sep = s.find(' ');
    double wl = 0.0, sig = 0.0;
    const bool ok = sep != std::string_view::npos && parse_double(s.substr(0, sep), wl) &&
                    parse_double(s.substr(sep + 1), sig);
    if (!ok) {
      if (!header_seen && t.wavelength_nm.empty()) {
        header_seen = true;
        continue;
      }
      std::ostringstream os;
      os << "dye spectrum: malformed row at line " << lineno;
      throw ConfigError(os.str());
    }
    t.wavelength_nm.push_back(wl);
    t.sigma_m2.push_back(sig);
  }
  if (t.wavelength_nm.size() >= 2 && t.wavelength_nm.front() > t.wavelength_nm.back()) {
    std::reverse(t.wavelength_nm.begin(), t.wavelength_nm.end());
    std::reverse(t.sigma_m2.begin(), t.sigma_m2.end());
  }
  t.validate();
  return t;
}

SpectralTable load_dye_spectra(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("dye spectrum: cannot open " + path);
  return load_dye_spectra(in);
}

void write_dye_spectra(std::ostream& out, const SpectralTable& table) {
  table.validate();
  out << "# wavelength_nm\tsigma_m2\n";
  char buf[64];
  for (std::size_t i = 0; i < table.wavelength_nm.size(); ++i) {
    auto r = std::to_chars(buf, buf + sizeof buf, table.wavelength_nm[i]);
    out.write(buf, r.ptr - buf);
    out.put('\t');
    r = std::to_chars(buf, buf + sizeof buf, table.sigma_m2[i]);
    out.write(buf, r.ptr - buf);
    out.put('\n');
  }
}

double kennard_stepanov_ratio(double delta, double T) {
  if (!(T > 0.0)) throw DomainError("kennard_stepanov_ratio: T must be positive");
  return std::exp(-delta / (cst::k_B * T));
}

}  // namespace pbec
