#include "pbec_cli/config.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include <openssl/evp.h>
#include <yaml-cpp/yaml.h>

#include <pbec/errors.hpp>

namespace pbec::cli {

namespace fs = std::filesystem;

std::vector<double> SweepRange::values() const {
  if (points < 1) throw ConfigError("sweep: points must be >= 1");
  if (points == 1) return {from};
  if (!(to > from)) throw ConfigError("sweep: 'to' must exceed 'from'");
  if (log && !(from > 0.0)) throw ConfigError("sweep: log spacing needs a positive start");
  std::vector<double> v(static_cast<std::size_t>(points));
  for (int i = 0; i < points; ++i) {
    const double u = static_cast<double>(i) / (points - 1);
    v[static_cast<std::size_t>(i)] =
        log ? from * std::pow(to / from, u) : from + (to - from) * u;
  }
  v.back() = to;
  return v;
}

std::vector<double> RunConfig::pump_rates() const {
  auto v = pump_sweep.values();
  for (double& x : v) x *= pump_calibration;
  return v;
}

NoneqParams RunConfig::noneq_params() const {
  return make_noneq_params(cavity, dye, levels, pump, grid);
}

namespace {

struct UnitDef {
  Dim dim;
  double factor;
};

const std::map<std::string, UnitDef>& units() {
  static const std::map<std::string, UnitDef> u{
      {"m", {Dim::Length, 1.0}},          {"mm", {Dim::Length, 1e-3}},
      {"um", {Dim::Length, 1e-6}},        {"µm", {Dim::Length, 1e-6}},
      {"nm", {Dim::Length, 1e-9}},        {"Hz", {Dim::Frequency, 1.0}},
      {"GHz", {Dim::Frequency, 1e9}},     {"THz", {Dim::Frequency, 1e12}},
      {"1/s", {Dim::Rate, 1.0}},          {"s^-1", {Dim::Rate, 1.0}},
      {"1/ns", {Dim::Rate, 1e9}},         {"1/ps", {Dim::Rate, 1e12}},
      {"s", {Dim::Time, 1.0}},            {"ns", {Dim::Time, 1e-9}},
      {"ps", {Dim::Time, 1e-12}},         {"fs", {Dim::Time, 1e-15}},
      {"K", {Dim::Temperature, 1.0}},     {"1/m^3", {Dim::Density, 1.0}},
      {"m^-3", {Dim::Density, 1.0}},      {"1/cm^3", {Dim::Density, 1e6}},
      {"m^2", {Dim::Area, 1.0}},          {"cm^2", {Dim::Area, 1e-4}},
  };
  return u;
}

const char* dim_name(Dim d) {
  switch (d) {
    case Dim::Length: return "length";
    case Dim::Frequency: return "frequency";
    case Dim::Rate: return "rate";
    case Dim::Time: return "time";
    case Dim::Temperature: return "temperature";
    case Dim::Density: return "density";
    case Dim::Area: return "area";
  }
  return "?";
}

}  // namespace

double parse_quantity(const std::string& text, Dim dim) { return parse_quantity_in(text, dim, 1.0); }

double parse_quantity_in(const std::string& text, Dim dim, double target) {
  std::istringstream is(text);
  double value = 0.0;
  std::string unit, extra;
  if (!(is >> value) || !(is >> unit) || (is >> extra))
    throw ConfigError("expected '<number> <unit>' but got '" + text + "'");
  const auto it = units().find(unit);
  if (it == units().end()) throw ConfigError("unknown unit '" + unit + "' in '" + text + "'");
  if (it->second.dim != dim)
    throw ConfigError("'" + text + "': expected a " + dim_name(dim) + " unit");
  // Same-unit values pass through untouched ("557 nm" read in nm stays 557).
  if (it->second.factor == target) return value;
  return value * (it->second.factor / target);
}

std::string sha256_hex(const std::string& bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1)
    throw Error("sha256 failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned i = 0; i < len; ++i) {
    out.push_back(hex[md[i] >> 4]);
    out.push_back(hex[md[i] & 15]);
  }
  return out;
}

namespace {

// Walks a mapping while remembering where we are for error messages.
class Section {
 public:
  Section(YAML::Node node, std::string name) : node_(std::move(node)), name_(std::move(name)) {
    if (node_ && !node_.IsMap()) throw ConfigError("'" + name_ + "' must be a mapping");
  }

  bool has(const std::string& key) const { return node_ && node_[key]; }

  Section sub(const std::string& key) const {
    return Section(node_ ? node_[key] : YAML::Node(), name_ + "." + key);
  }

  double quantity(const std::string& key, Dim dim) const {
    return parse_quantity(scalar(key), dim);
  }
  double quantity_in(const std::string& key, Dim dim, double target) const {
    return parse_quantity_in(scalar(key), dim, target);
  }
  double quantity(const std::string& key, Dim dim, double fallback) const {
    return has(key) ? quantity(key, dim) : fallback;
  }

  template <class T>
  T get(const std::string& key) const {
    try {
      return node_[key].as<T>();
    } catch (const YAML::Exception&) {
      throw ConfigError("'" + name_ + "." + key + "' has the wrong type");
    }
  }
  template <class T>
  T get(const std::string& key, T fallback) const {
    return has(key) ? get<T>(key) : fallback;
  }

  std::string scalar(const std::string& key) const {
    if (!has(key)) throw ConfigError("missing key '" + name_ + "." + key + "'");
    if (!node_[key].IsScalar()) throw ConfigError("'" + name_ + "." + key + "' must be a scalar");
    return node_[key].Scalar();
  }

  YAML::Node raw(const std::string& key) const { return node_[key]; }
  const std::string& name() const { return name_; }

  void allow(std::initializer_list<const char*> keys) const {
    if (!node_) return;
    for (const auto& kv : node_) {
      const auto k = kv.first.as<std::string>();
      bool ok = false;
      for (const char* a : keys) ok = ok || k == a;
      if (!ok) throw ConfigError("unknown key '" + name_ + "." + k + "'");
    }
  }

 private:
  YAML::Node node_;
  std::string name_;
};

SweepRange read_range(const Section& s, bool log_default) {
  s.allow({"from", "to", "points", "spacing"});
  SweepRange r;
  r.from = s.get<double>("from");
  r.to = s.get<double>("to", r.from);
  r.points = s.get<int>("points", 1);
  const auto spacing = s.get<std::string>("spacing", log_default ? "log" : "linear");
  if (spacing != "log" && spacing != "linear")
    throw ConfigError("'" + s.name() + ".spacing' must be log or linear");
  r.log = spacing == "log";
  return r;
}

}  // namespace

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  RunConfig rc;
  rc.path = path;
  rc.sha256 = sha256_hex(buf.str());

  YAML::Node root;
  try {
    root = YAML::Load(buf.str());
  } catch (const YAML::Exception& e) {
    throw ConfigError("config " + path + ": " + e.what());
  }
  const fs::path base = fs::path(path).parent_path();
  Section top(root, "config");
  top.allow({"cavity", "dye", "pump", "grid", "model", "sweep", "classify", "coherence"});

  {
    const Section c = top.sub("cavity");
    c.allow({"q", "lambda0", "trap_frequency", "f_x", "f_y", "roc", "kappa", "cavity_lifetime",
             "n_medium"});
    rc.cavity.q = c.get<int>("q", 10);
    rc.cavity.lambda0_nm = c.quantity_in("lambda0", Dim::Length, 1e-9);
    rc.cavity.n_medium = c.get<double>("n_medium", 1.44);
    if (c.has("roc")) rc.cavity.roc_um = c.quantity_in("roc", Dim::Length, 1e-6);
    if (c.has("kappa") == c.has("cavity_lifetime"))
      throw ConfigError("cavity: give exactly one of kappa or cavity_lifetime");
    rc.cavity.kappa = c.has("kappa") ? c.quantity("kappa", Dim::Rate)
                                     : 1.0 / c.quantity("cavity_lifetime", Dim::Time);
    // Directly given frequencies take precedence over the roc estimate.
    if (c.has("f_x") || c.has("f_y")) {
      rc.cavity.f_x_thz = c.quantity_in("f_x", Dim::Frequency, 1e12);
      rc.cavity.f_y_thz = c.quantity_in("f_y", Dim::Frequency, 1e12);
    } else if (c.has("trap_frequency")) {
      rc.cavity.f_x_thz = rc.cavity.f_y_thz = c.quantity_in("trap_frequency", Dim::Frequency, 1e12);
    } else if (rc.cavity.roc_um) {
      rc.cavity.f_x_thz = rc.cavity.f_y_thz = derive_trap_frequency(rc.cavity);
    } else {
      throw ConfigError("cavity: set trap_frequency, f_x/f_y or roc");
    }
    rc.cavity.validate();
  }
  {
    const Section d = top.sub("dye");
    d.allow({"spectrum", "lambda_zpl", "temperature", "n_mol", "gamma_down"});
    fs::path spec = d.get<std::string>("spectrum");
    if (spec.is_relative()) spec = base / spec;
    if (!fs::exists(spec)) throw ConfigError("dye spectrum file not found: " + spec.string());
    rc.dye.sigma_abs = load_dye_spectra(spec.string());
    rc.dye.lambda_zpl_nm = (d.has("lambda_zpl") ? d.quantity_in("lambda_zpl", Dim::Length, 1e-9) : 545.0);
    rc.dye.T_dye = d.quantity("temperature", Dim::Temperature, 300.0);
    rc.dye.n_mol = d.quantity("n_mol", Dim::Density, 1e24);
    rc.dye.gamma_down = d.quantity("gamma_down", Dim::Rate, 1e4);
    rc.dye.validate();
  }
  {
    const Section p = top.sub("pump");
    p.allow({"waist", "calibration"});
    rc.pump.waist_um = (p.has("waist") ? p.quantity_in("waist", Dim::Length, 1e-6) : 2.4);
    rc.pump_calibration = p.quantity("calibration", Dim::Rate, 1.0);
    rc.pump.validate();
  }
  {
    const Section g = top.sub("grid");
    g.allow({"bins", "extent_factor", "extent"});
    rc.grid.n_bins = g.get<int>("bins", 64);
    rc.grid.extent_factor = g.get<double>("extent_factor", 6.0);
    if (g.has("extent")) rc.grid.extent_um = g.quantity_in("extent", Dim::Length, 1e-6);
  }
  {
    const Section m = top.sub("model");
    m.allow({"levels"});
    rc.levels = m.get<int>("levels", 20);
    if (rc.levels < 1) throw ConfigError("model.levels must be >= 1");
  }
  {
    const Section s = top.sub("sweep");
    s.allow({"pump", "lambda0_list"});
    if (s.has("pump")) rc.pump_sweep = read_range(s.sub("pump"), true);
    if (s.has("lambda0_list")) {
      const auto node = s.raw("lambda0_list");
      if (!node.IsSequence()) throw ConfigError("sweep.lambda0_list must be a list");
      for (const auto& v : node) rc.lambda0_list.push_back(parse_quantity_in(v.as<std::string>(), Dim::Length, 1e-9));
    }
  }
  {
    const Section c = top.sub("classify");
    c.allow({"criterion", "alpha", "observed_levels"});
    const auto crit = c.get<std::string>("criterion", "iv");
    if (crit == "i") rc.classify.criterion.which = Criterion::I;
    else if (crit == "ii") rc.classify.criterion.which = Criterion::II;
    else if (crit == "iii") rc.classify.criterion.which = Criterion::III;
    else if (crit == "iv") rc.classify.criterion.which = Criterion::IV;
    else throw ConfigError("classify.criterion must be one of i, ii, iii, iv");
    rc.classify.criterion.alpha = c.get<double>("alpha", 2.0);
    if (!(rc.classify.criterion.alpha >= 1.0)) throw ConfigError("classify.alpha must be >= 1");
    rc.classify.observed_levels = c.get<int>("observed_levels", 0);
    if (rc.classify.observed_levels < 0 || rc.classify.observed_levels > rc.levels)
      throw ConfigError("classify.observed_levels must lie in [0, model.levels]");
  }
  {
    const Section c = top.sub("coherence");
    c.allow({"mode", "temperature", "modes_x", "modes_y", "damping", "tau", "n0", "crossover_n"});
    auto& co = rc.coherence;
    co.mode = c.get<std::string>("mode", "multimode");
    if (co.mode != "multimode" && co.mode != "single")
      throw ConfigError("coherence.mode must be multimode or single");
    if (c.has("temperature")) co.T = c.quantity("temperature", Dim::Temperature);
    co.modes_x = c.get<int>("modes_x", 40);
    co.modes_y = c.get<int>("modes_y", 40);
    co.damping = c.get<bool>("damping", false);
    if (c.has("tau")) {
      const Section t = c.sub("tau");
      t.allow({"from", "to", "points"});
      co.tau_from = t.quantity("from", Dim::Time);
      co.tau_to = t.quantity("to", Dim::Time);
      co.tau_points = t.get<int>("points", 2001);
      if (co.tau_points < 2 || !(co.tau_to > co.tau_from))
        throw ConfigError("coherence.tau needs to > from and at least 2 points");
    }
    if (c.has("n0")) co.n0 = c.get<double>("n0");
    co.crossover_n = c.get<double>("crossover_n", 1.0);
    if (!(co.crossover_n > 0.0)) throw ConfigError("coherence.crossover_n must be positive");
  }
  return rc;
}

}  // namespace pbec::cli
