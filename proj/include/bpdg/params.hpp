#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "constants.hpp"

namespace bpdg {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Silicon electron-phonon model. Energies in eV, everything else SI.
struct MaterialParams {
  double m_star = 0.32 * PhysicalConstants::m_e;  // kg
  double alpha_kane = 0.5;                        // 1/eV
  double eps_r = 11.7;
  double T_L = 300.0;           // K
  double rho0 = 2330.0;         // kg/m^3
  double v_sound = 9040.0;      // m/s
  double Xi_d = 9.0;            // eV
  double DtK = 11.4e10;         // eV/m
  double hbar_omega_p = 0.063;  // eV

  /// Relative permittivity at position x (m). Homogeneous material.
  [[nodiscard]] double eps_r_at(double /*x*/) const { return eps_r; }

  [[nodiscard]] double thermal_energy_ev() const {
    return PhysicalConstants::kB * T_L / PhysicalConstants::q;
  }

  bool operator==(const MaterialParams&) const = default;
};

struct DopingSegment {
  double x_begin = 0.0;  // m
  double x_end = 0.0;    // m
  double value = 0.0;    // 1/m^3

  bool operator==(const DopingSegment&) const = default;
};

struct DeviceConfig {
  double length = 400e-9;  // m
  std::vector<DopingSegment> doping{{0.0, 100e-9, 5e23}, {100e-9, 300e-9, 2e21},
                                    {300e-9, 400e-9, 5e23}};
  double bias = 2.0;  // V
  std::size_t n_x = 120;
  std::size_t n_u = 60;
  std::size_t n_r = 24;
  double u_max = 0.0;  // dimensionless; <= 0 means derive from max_energy
  double r_max = 0.0;
  double max_energy = 1.4;  // eV, used only to derive u_max/r_max
  double t_final = 3.0e-12;  // s
  double cfl = 0.8;
  std::size_t output_stride = 10;
  std::vector<double> snapshot_times{0.5e-12, 3.0e-12};  // s
  std::size_t threads = 0;  // 0: hardware concurrency

  [[nodiscard]] std::size_t n_k() const { return n_u * n_r; }

  /// Doping (1/m^3) at position x; the half-open segment [x_begin, x_end) wins,
  /// the last segment is closed on the right.
  [[nodiscard]] double doping_at(double x) const {
    for (const auto& seg : doping) {
      if (x >= seg.x_begin && x < seg.x_end) return seg.value;
    }
    return doping.back().value;
  }

  bool operator==(const DeviceConfig&) const = default;
};

/// Reference scales for the nondimensional solver variables.
struct Scales {
  double k_star = 0.0;    // 1/m, thermal wave vector
  double t_star = 0.0;    // s
  double x_star = 0.0;    // m
  double eps_star = 0.0;  // eV
  double E_star = 0.0;    // V/m, field that moves u by one unit per t_star
  double rho_star = 0.0;  // 1/m^3
  double f_star = 0.0;    // pdf scale, rho_star / k_star^3

  [[nodiscard]] double v_star() const { return x_star / t_star; }
  /// Scale of cell measures M and of K entries times t_star.
  [[nodiscard]] double k_volume() const { return k_star * k_star * k_star; }

  [[nodiscard]] double nondim_time(double t) const { return t / t_star; }
  [[nodiscard]] double dim_time(double tau) const { return tau * t_star; }
  [[nodiscard]] double nondim_length(double x) const { return x / x_star; }
  [[nodiscard]] double dim_length(double xi) const { return xi * x_star; }
  [[nodiscard]] double nondim_field(double e) const { return e / E_star; }
  [[nodiscard]] double dim_field(double e) const { return e * E_star; }
  [[nodiscard]] double nondim_wavevector(double k) const { return k / k_star; }
  [[nodiscard]] double dim_wavevector(double u) const { return u * k_star; }
  [[nodiscard]] double nondim_energy(double e) const { return e / eps_star; }
  [[nodiscard]] double dim_energy(double e) const { return e * eps_star; }
};

inline Scales build_scales(const MaterialParams& mat) {
  using C = PhysicalConstants;
  Scales s;
  s.k_star = std::sqrt(2.0 * mat.m_star * C::kB * mat.T_L) / C::hbar;
  s.t_star = 1e-12;
  s.x_star = 1e-6;
  s.eps_star = C::kB * mat.T_L / C::q;
  s.E_star = C::hbar * s.k_star / (C::q * s.t_star);
  s.rho_star = 1e23;
  s.f_star = s.rho_star / (s.k_star * s.k_star * s.k_star);
  return s;
}

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

inline double parse_double(const std::string& key, std::string_view text) {
  const std::string t = trim(text);
  double v = 0.0;
  const auto* first = t.data();
  const auto* last = t.data() + t.size();
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (t.empty() || ec != std::errc{} || ptr != last) {
    throw ConfigError("parse error: key '" + key + "' expects a number, got '" + t + "'");
  }
  return v;
}

inline std::size_t parse_size(const std::string& key, std::string_view text) {
  const std::string t = trim(text);
  std::size_t v = 0;
  auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (t.empty() || ec != std::errc{} || ptr != t.data() + t.size()) {
    throw ConfigError("parse error: key '" + key + "' expects a non-negative integer, got '" + t +
                      "'");
  }
  return v;
}

inline std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (true) {
    const auto next = s.find(sep, pos);
    out.push_back(trim(s.substr(pos, next - pos)));
    if (next == std::string_view::npos) break;
    pos = next + 1;
  }
  return out;
}

inline std::string format_double(double v) {
  std::ostringstream os;
  os << std::setprecision(std::numeric_limits<double>::max_digits10) << v;
  return os.str();
}

/// Formats value/scale so that parsing the text and multiplying by scale gives value back.
inline std::string format_scaled(double value, double scale) {
  double c = value / scale;
  double up = c;
  double down = c;
  for (int i = 0; i < 8; ++i) {
    if (up * scale == value) return format_double(up);
    if (down * scale == value) return format_double(down);
    up = std::nextafter(up, std::numeric_limits<double>::infinity());
    down = std::nextafter(down, -std::numeric_limits<double>::infinity());
  }
  return format_double(c);
}

}  // namespace detail

/// Flat `section.key -> value` view of a config file.
using ConfigEntries = std::map<std::string, std::string>;

/// Parses INI-style text: `[section]` headers, `key = value` lines, `#` comments.
inline ConfigEntries parse_config_text(std::string_view text) {
  ConfigEntries entries;
  std::string section;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string t = detail::trim(line);
    if (t.empty()) continue;
    if (t.front() == '[') {
      if (t.back() != ']' || t.size() < 3) {
        throw ConfigError("parse error: malformed section header on line " +
                          std::to_string(lineno));
      }
      section = detail::trim(std::string_view(t).substr(1, t.size() - 2));
      continue;
    }
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("parse error: expected 'key = value' on line " + std::to_string(lineno));
    }
    const std::string key = detail::trim(std::string_view(t).substr(0, eq));
    if (key.empty()) {
      throw ConfigError("parse error: empty key on line " + std::to_string(lineno));
    }
    const std::string full = section.empty() ? key : section + "." + key;
    entries[full] = detail::trim(std::string_view(t).substr(eq + 1));
  }
  return entries;
}

/// Applies a `section.key=value` override.
inline void apply_override(ConfigEntries& entries, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos) {
    throw ConfigError("parse error: override '" + std::string(assignment) +
                      "' is not of the form key=value");
  }
  entries[detail::trim(assignment.substr(0, eq))] = detail::trim(assignment.substr(eq + 1));
}

struct LoadedConfig {
  DeviceConfig device;
  MaterialParams material;

  bool operator==(const LoadedConfig&) const = default;
};

/// Smallest dimensionless half-extent whose Kane energy reaches `energy_ev`.
inline double k_extent_for_energy(const MaterialParams& mat, double energy_ev) {
  const double gamma = energy_ev * (1.0 + mat.alpha_kane * energy_ev);
  return std::sqrt(gamma / mat.thermal_energy_ev());
}

inline void validate(const LoadedConfig& cfg) {
  const auto& d = cfg.device;
  const auto& m = cfg.material;
  auto fail = [](const std::string& field, const std::string& why) {
    throw ConfigError("validation error: " + field + ": " + why);
  };
  if (!(d.length > 0.0)) fail("device.length", "must be positive");
  if (d.doping.empty()) fail("device.doping", "at least one segment required");
  auto segs = d.doping;
  std::sort(segs.begin(), segs.end(),
            [](const auto& a, const auto& b) { return a.x_begin < b.x_begin; });
  const double tol = 1e-12 * d.length;
  if (std::abs(segs.front().x_begin) > tol) fail("device.doping", "must start at x = 0");
  for (std::size_t i = 0; i < segs.size(); ++i) {
    if (!(segs[i].x_end > segs[i].x_begin)) fail("device.doping", "empty or reversed segment");
    if (!(segs[i].value > 0.0)) fail("device.doping", "values must be positive");
    if (i + 1 < segs.size()) {
      if (segs[i].x_end > segs[i + 1].x_begin + tol) fail("device.doping", "overlapping segments");
      if (segs[i].x_end < segs[i + 1].x_begin - tol) fail("device.doping", "gap between segments");
    }
  }
  if (std::abs(segs.back().x_end - d.length) > tol) {
    fail("device.doping", "segments must end at x = length");
  }
  if (!(d.bias >= 0.0)) fail("device.bias", "must be >= 0");
  if (d.n_x < 2) fail("grid.n_x", "must be >= 2");
  if (d.n_u < 1 || d.n_r < 1) fail("grid.n_u/grid.n_r", "must be >= 1");
  if (!(d.u_max > 0.0)) fail("grid.u_max", "must be positive");
  if (!(d.r_max > 0.0)) fail("grid.r_max", "must be positive");
  if (!(d.t_final >= 0.0)) fail("run.t_final", "must be >= 0");
  if (!(d.cfl > 0.0 && d.cfl <= 1.0)) fail("run.cfl", "must lie in (0, 1]");
  if (d.output_stride < 1) fail("run.output_stride", "must be >= 1");
  for (double t : d.snapshot_times) {
    if (!(t >= 0.0)) fail("run.snapshot_times", "must be >= 0");
  }
  if (!(m.m_star > 0.0)) fail("material.m_star", "must be positive");
  if (!(m.alpha_kane >= 0.0)) fail("material.alpha_kane", "must be >= 0");
  if (!(m.eps_r >= 1.0)) fail("material.eps_r", "must be >= 1");
  if (!(m.T_L > 0.0)) fail("material.T_L", "must be positive");
  if (!(m.rho0 > 0.0)) fail("material.rho0", "must be positive");
  if (!(m.v_sound > 0.0)) fail("material.v_sound", "must be positive");
  if (!(m.Xi_d >= 0.0)) fail("material.Xi_d", "must be >= 0");
  if (!(m.DtK >= 0.0)) fail("material.DtK", "must be >= 0");
  if (!(m.hbar_omega_p > 0.0)) fail("material.hbar_omega_p", "must be positive");
}

/// Builds and validates a configuration from parsed entries. Unknown keys are errors.
inline LoadedConfig config_from_entries(const ConfigEntries& entries) {
  LoadedConfig cfg;
  auto& d = cfg.device;
  auto& m = cfg.material;
  bool explicit_u = false;
  bool explicit_r = false;
  for (const auto& [key, value] : entries) {
    auto num = [&] { return detail::parse_double(key, value); };
    auto count = [&] { return detail::parse_size(key, value); };
    if (key == "device.length") {
      d.length = num();
    } else if (key == "device.doping") {
      // "x_begin x_end N_D, ..." in m, m, cm^-3
      d.doping.clear();
      for (const auto& item : detail::split(value, ',')) {
        std::istringstream is(item);
        std::string a, b, c, extra;
        if (!(is >> a >> b >> c) || (is >> extra)) {
          throw ConfigError("parse error: device.doping segment '" + item +
                            "' must be 'x_begin x_end N_D'");
        }
        d.doping.push_back({detail::parse_double(key, a), detail::parse_double(key, b),
                            detail::parse_double(key, c) * 1e6});
      }
    } else if (key == "device.bias") {
      d.bias = num();
    } else if (key == "grid.n_x") {
      d.n_x = count();
    } else if (key == "grid.n_u") {
      d.n_u = count();
    } else if (key == "grid.n_r") {
      d.n_r = count();
    } else if (key == "grid.u_max") {
      d.u_max = num();
      explicit_u = true;
    } else if (key == "grid.r_max") {
      d.r_max = num();
      explicit_r = true;
    } else if (key == "grid.max_energy") {
      d.max_energy = num();
    } else if (key == "run.t_final") {
      d.t_final = num();
    } else if (key == "run.cfl") {
      d.cfl = num();
    } else if (key == "run.output_stride") {
      d.output_stride = count();
    } else if (key == "run.snapshot_times") {
      d.snapshot_times.clear();
      for (const auto& item : detail::split(value, ',')) {
        if (!item.empty()) d.snapshot_times.push_back(detail::parse_double(key, item));
      }
    } else if (key == "run.threads") {
      d.threads = count();
    } else if (key == "material.m_star") {
      m.m_star = num() * PhysicalConstants::m_e;
    } else if (key == "material.alpha_kane") {
      m.alpha_kane = num();
    } else if (key == "material.eps_r") {
      m.eps_r = num();
    } else if (key == "material.T_L") {
      m.T_L = num();
    } else if (key == "material.rho0") {
      m.rho0 = num();
    } else if (key == "material.v_sound") {
      m.v_sound = num();
    } else if (key == "material.Xi_d") {
      m.Xi_d = num();
    } else if (key == "material.DtK") {
      m.DtK = num();
    } else if (key == "material.hbar_omega_p") {
      m.hbar_omega_p = num();
    } else {
      throw ConfigError("parse error: unknown key '" + key + "'");
    }
  }
  if (!explicit_u || !(d.u_max > 0.0)) {
    if (!(d.max_energy > 0.0)) {
      throw ConfigError("validation error: grid.max_energy: must be positive");
    }
    if (!explicit_u) d.u_max = k_extent_for_energy(m, d.max_energy);
  }
  if (!explicit_r) d.r_max = d.u_max;
  validate(cfg);
  return cfg;
}

inline LoadedConfig load_config(const std::string& path,
                                const std::vector<std::string>& overrides = {}) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  auto entries = parse_config_text(buf.str());
  for (const auto& o : overrides) apply_override(entries, o);
  return config_from_entries(entries);
}

/// Writes a config that parses back to an equal LoadedConfig.
inline std::string serialize_config(const LoadedConfig& cfg) {
  using detail::format_double;
  using detail::format_scaled;
  const auto& d = cfg.device;
  const auto& m = cfg.material;
  std::ostringstream os;
  os << "[device]\n";
  os << "length = " << format_double(d.length) << "  # m\n";
  os << "doping = ";
  for (std::size_t i = 0; i < d.doping.size(); ++i) {
    if (i) os << ", ";
    os << format_double(d.doping[i].x_begin) << ' ' << format_double(d.doping[i].x_end) << ' '
       << format_scaled(d.doping[i].value, 1e6);
  }
  os << "  # m m cm^-3\n";
  os << "bias = " << format_double(d.bias) << "  # V\n\n";
  os << "[grid]\n";
  os << "n_x = " << d.n_x << "\n";
  os << "n_u = " << d.n_u << "\n";
  os << "n_r = " << d.n_r << "\n";
  os << "u_max = " << format_double(d.u_max) << "\n";
  os << "r_max = " << format_double(d.r_max) << "\n";
  os << "max_energy = " << format_double(d.max_energy) << "  # eV\n\n";
  os << "[run]\n";
  os << "t_final = " << format_double(d.t_final) << "  # s\n";
  os << "cfl = " << format_double(d.cfl) << "\n";
  os << "output_stride = " << d.output_stride << "\n";
  os << "snapshot_times = ";
  for (std::size_t i = 0; i < d.snapshot_times.size(); ++i) {
    if (i) os << ", ";
    os << format_double(d.snapshot_times[i]);
  }
  os << "  # s\n";
  os << "threads = " << d.threads << "\n\n";
  os << "[material]\n";
  os << "m_star = " << format_scaled(m.m_star, PhysicalConstants::m_e) << "  # m_e\n";
  os << "alpha_kane = " << format_double(m.alpha_kane) << "  # 1/eV\n";
  os << "eps_r = " << format_double(m.eps_r) << "\n";
  os << "T_L = " << format_double(m.T_L) << "  # K\n";
  os << "rho0 = " << format_double(m.rho0) << "  # kg/m^3\n";
  os << "v_sound = " << format_double(m.v_sound) << "  # m/s\n";
  os << "Xi_d = " << format_double(m.Xi_d) << "  # eV\n";
  os << "DtK = " << format_double(m.DtK) << "  # eV/m\n";
  os << "hbar_omega_p = " << format_double(m.hbar_omega_p) << "  # eV\n";
  return os.str();
}

}  // namespace bpdg
