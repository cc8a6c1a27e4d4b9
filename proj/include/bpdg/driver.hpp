#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "band.hpp"
#include "collision.hpp"
#include "field.hpp"
#include "kgrid.hpp"
#include "params.hpp"
#include "transport.hpp"

namespace bpdg {

class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Macroscopic profiles in the units of the figure captions.
struct Moments {
  double time = 0.0;            // s
  std::vector<double> x;        // interval centers, m
  std::vector<double> density;  // cm^-3
  std::vector<double> velocity; // cm/s
  std::vector<double> energy;   // eV
  std::vector<double> node_x;   // m
  std::vector<double> potential;  // V, at nodes
  bool zero_density = false;    // some interval had no electrons; its velocity/energy are 0
};

struct DiagnosticsRow {
  std::size_t step = 0;
  double time_ps = 0.0;
  double neg_fraction_pct = 0.0;
  double pdf_min = 0.0;
  double pdf_max = 0.0;
  double total_charge = 0.0;  // electrons per cm^2
  double wall_ms = 0.0;
};

/// Everything the time loop needs, built once from a configuration.
class Simulation {
 public:
  Simulation(const LoadedConfig& cfg, CollisionMatrix kmat)
      : cfg_(cfg),
        scales_(build_scales(cfg.material)),
        band_(KaneBand::from(cfg.material)),
        grid_(build_grid(cfg.device, band_, scales_)),
        kmat_(std::move(kmat)),
        dx_(cfg.device.length / static_cast<double>(cfg.device.n_x)),
        op_(grid_, scales_, dx_) {
    if (kmat_.size() != grid_.size()) {
      throw std::invalid_argument("Simulation: K matrix size does not match the k-grid");
    }
    const auto& d = cfg_.device;
    doping_.resize(d.n_x);
    for (std::size_t i = 0; i < d.n_x; ++i) {
      doping_[i] = interval_doping(d, dx_ * static_cast<double>(i), dx_ * (i + 1.0));
    }
    bc_.kind = BoundarySpec::Kind::charge_neutral;
    bc_.left_doping = d.doping_at(0.0);
    bc_.right_doping = d.doping_at(d.length);
    poisson_.n_x = d.n_x;
    poisson_.dx = dx_;
    poisson_.eps_r.resize(d.n_x);
    for (std::size_t i = 0; i < d.n_x; ++i) {
      poisson_.eps_r[i] = cfg_.material.eps_r_at(dx_ * (i + 0.5));
    }
    poisson_.v_left = 0.0;
    poisson_.v_right = d.bias;
  }

  // The transport operator refers to grid_.
  Simulation(const Simulation&) = delete;
  Simulation& operator=(const Simulation&) = delete;

  /// Mean doping over [a, b].
  static double interval_doping(const DeviceConfig& d, double a, double b) {
    double acc = 0.0;
    for (const auto& seg : d.doping) {
      const double lo = std::max(a, seg.x_begin);
      const double hi = std::min(b, seg.x_end);
      if (hi > lo) acc += (hi - lo) * seg.value;
    }
    return acc / (b - a);
  }

  [[nodiscard]] const LoadedConfig& config() const { return cfg_; }
  [[nodiscard]] const Scales& scales() const { return scales_; }
  [[nodiscard]] const KaneBand& band() const { return band_; }
  [[nodiscard]] const KGrid& grid() const { return grid_; }
  [[nodiscard]] const CollisionMatrix& kmatrix() const { return kmat_; }
  [[nodiscard]] const TransportOperator& transport() const { return op_; }
  [[nodiscard]] const std::vector<double>& doping() const { return doping_; }
  [[nodiscard]] const BoundarySpec& boundary() const { return bc_; }
  [[nodiscard]] double dx() const { return dx_; }
  [[nodiscard]] std::size_t n_x() const { return cfg_.device.n_x; }

  void set_boundary(const BoundarySpec& bc) { bc_ = bc; }
  void set_bias(double bias) { poisson_.v_right = bias; }

  /// Maxwellian in the cell-mean energies, scaled to the local doping.
  [[nodiscard]] StateField initialize() const {
    const auto n = static_cast<Eigen::Index>(grid_.size());
    const double kT = cfg_.material.thermal_energy_ev();
    Eigen::VectorXd shape(n);
    for (const auto& c : grid_.cells()) {
      shape[static_cast<Eigen::Index>(c.index)] = std::exp(-c.mean_energy / kT);
    }
    const double shape_density = scales_.rho_star * op_.measure().dot(shape);
    StateField s;
    s.values.resize(n, static_cast<Eigen::Index>(n_x()));
    for (std::size_t i = 0; i < n_x(); ++i) {
      s.values.col(static_cast<Eigen::Index>(i)) = shape * (doping_[i] / shape_density);
    }
    return s;
  }

  [[nodiscard]] PoissonSolution solve_field(const Eigen::MatrixXd& f) const {
    const Eigen::RowVectorXd rho = op_.density(f);
    std::vector<double> r(rho.data(), rho.data() + rho.size());
    return solve_poisson(poisson_, r, doping_);
  }

  [[nodiscard]] Eigen::MatrixXd rhs(const Eigen::MatrixXd& f) const {
    return op_.rhs(f, solve_field(f).field, kmat_, bc_);
  }

  /// Stable step for the current state, seconds.
  [[nodiscard]] double stable_dt(const Eigen::MatrixXd& f) const {
    const double rate = op_.max_rate(solve_field(f).field, kmat_);
    return scales_.dim_time(cfg_.device.cfl / rate);
  }

  /// One SSP-RK2 (Heun) step of length dt seconds; the field is re-solved at each stage.
  void step_fixed(StateField& s, double dt) const {
    const double h = scales_.nondim_time(dt);
    Eigen::MatrixXd stage = s.values + h * rhs(s.values);
    Eigen::MatrixXd next = 0.5 * (s.values + stage + h * rhs(stage));
    if (!next.allFinite()) {
      std::ostringstream msg;
      msg << "state became non-finite at t = " << s.time << " s (dt = " << dt << " s)";
      throw DivergenceError(msg.str());
    }
    s.values = std::move(next);
    s.time += dt;
  }

  /// Step with the CFL-limited dt, clipped so as not to pass t_limit. Returns dt.
  double step(StateField& s, std::optional<double> t_limit = std::nullopt) const {
    double dt = stable_dt(s.values);
    const bool clipped = t_limit && s.time + dt >= *t_limit;
    if (clipped) dt = *t_limit - s.time;
    step_fixed(s, dt);
    if (clipped) s.time = *t_limit;
    return dt;
  }

  [[nodiscard]] Moments compute_moments(const StateField& s) const {
    Moments m;
    m.time = s.time;
    const auto& f = s.values;
    const Eigen::RowVectorXd mass = op_.measure().transpose() * f;
    Eigen::VectorXd eta(static_cast<Eigen::Index>(grid_.size()));
    Eigen::VectorXd em(static_cast<Eigen::Index>(grid_.size()));
    for (const auto& c : grid_.cells()) {
      eta[static_cast<Eigen::Index>(c.index)] = c.eta_x;
      em[static_cast<Eigen::Index>(c.index)] = c.mean_energy * c.measure;
    }
    const Eigen::RowVectorXd flux = eta.transpose() * f;
    const Eigen::RowVectorXd energy = em.transpose() * f;
    for (std::size_t i = 0; i < n_x(); ++i) {
      const auto ii = static_cast<Eigen::Index>(i);
      m.x.push_back(dx_ * (i + 0.5));
      m.density.push_back(scales_.rho_star * mass[ii] * 1e-6);
      if (mass[ii] > 0.0) {
        m.velocity.push_back(scales_.v_star() * flux[ii] / mass[ii] * 100.0);
        m.energy.push_back(energy[ii] / mass[ii]);
      } else {
        m.zero_density = true;
        m.velocity.push_back(0.0);
        m.energy.push_back(0.0);
      }
    }
    const PoissonSolution sol = solve_field(f);
    m.potential = sol.potential;
    for (std::size_t j = 0; j <= n_x(); ++j) m.node_x.push_back(dx_ * static_cast<double>(j));
    return m;
  }

  [[nodiscard]] DiagnosticsRow diagnostics(const StateField& s, std::size_t step) const {
    DiagnosticsRow d;
    d.step = step;
    d.time_ps = s.time * 1e12;
    const auto& f = s.values;
    const auto negative = (f.array() < 0.0).count();
    d.neg_fraction_pct = 100.0 * static_cast<double>(negative) / static_cast<double>(f.size());
    d.pdf_min = f.minCoeff();
    d.pdf_max = f.maxCoeff();
    d.total_charge = op_.density(f).sum() * 1e-6 * dx_ * 100.0;
    return d;
  }

 private:
  LoadedConfig cfg_;
  Scales scales_;
  KaneBand band_;
  KGrid grid_;
  CollisionMatrix kmat_;
  double dx_;
  TransportOperator op_;
  std::vector<double> doping_;
  BoundarySpec bc_;
  PoissonProblem poisson_;
};

/// "0.5" for 0.5 ps, "3.0" for 3 ps, shortest round-trip text otherwise.
inline std::string time_label_ps(double t) {
  const double ps = t * 1e12;
  std::ostringstream os;
  const double tenths = std::round(ps * 10.0);
  if (std::abs(ps * 10.0 - tenths) < 1e-9 * std::max(1.0, std::abs(ps * 10.0))) {
    os.setf(std::ios::fixed);
    os.precision(1);
    os << tenths / 10.0;
  } else {
    os << ps;
  }
  return os.str();
}

inline void write_moments_csv(std::ostream& os, const Moments& m) {
  os.precision(15);
  os << "x_um,density_cm3,velocity_cm_s,energy_eV,potential_V\n";
  for (std::size_t i = 0; i < m.x.size(); ++i) {
    const double v = 0.5 * (m.potential[i] + m.potential[i + 1]);
    os << m.x[i] * 1e6 << ',' << m.density[i] << ',' << m.velocity[i] << ',' << m.energy[i] << ','
       << v << '\n';
  }
}

inline void write_potential_csv(std::ostream& os, const Moments& m) {
  os.precision(15);
  os << "x_um,potential_V\n";
  for (std::size_t j = 0; j < m.node_x.size(); ++j) {
    os << m.node_x[j] * 1e6 << ',' << m.potential[j] << '\n';
  }
}

inline void write_diagnostics_header(std::ostream& os) {
  os << "step,time_ps,neg_fraction_pct,pdf_min,pdf_max,total_charge\n";
}

inline void write_diagnostics_row(std::ostream& os, const DiagnosticsRow& d) {
  os.precision(15);
  os << d.step << ',' << d.time_ps << ',' << d.neg_fraction_pct << ',' << d.pdf_min << ','
     << d.pdf_max << ',' << d.total_charge << '\n';
}

struct RunResult {
  std::vector<Moments> snapshots;
  std::vector<DiagnosticsRow> diagnostics;
  std::size_t steps = 0;
};

struct RunOptions {
  std::optional<std::filesystem::path> out_dir;
  std::ostream* progress = nullptr;
};

/// Advances to t_final, snapshotting at the configured times. Deterministic.
inline RunResult run(const Simulation& sim, const RunOptions& opt = {}) {
  const auto& d = sim.config().device;
  std::vector<double> stops = d.snapshot_times;
  stops.erase(std::remove_if(stops.begin(), stops.end(), [&](double t) { return t > d.t_final; }),
              stops.end());
  stops.push_back(d.t_final);
  std::sort(stops.begin(), stops.end());
  stops.erase(std::unique(stops.begin(), stops.end()), stops.end());
  const auto wanted = [&](double t) {
    return std::find(d.snapshot_times.begin(), d.snapshot_times.end(), t) !=
           d.snapshot_times.end();
  };

  std::ofstream diag_file;
  if (opt.out_dir) {
    std::filesystem::create_directories(*opt.out_dir);
    diag_file.open(*opt.out_dir / "diagnostics.csv");
    write_diagnostics_header(diag_file);
  }
  auto emit_snapshot = [&](RunResult& res, const StateField& s, double t_label) {
    Moments m = sim.compute_moments(s);
    if (opt.out_dir) {
      const std::string label = time_label_ps(t_label);
      std::ofstream mf(*opt.out_dir / ("moments_t" + label + ".csv"));
      write_moments_csv(mf, m);
      std::ofstream pf(*opt.out_dir / ("potential_t" + label + ".csv"));
      write_potential_csv(pf, m);
    }
    res.snapshots.push_back(std::move(m));
  };

  RunResult res;
  StateField s = sim.initialize();
  auto record = [&](std::size_t step, double wall_ms) {
    DiagnosticsRow row = sim.diagnostics(s, step);
    row.wall_ms = wall_ms;
    if (diag_file.is_open()) write_diagnostics_row(diag_file, row);
    res.diagnostics.push_back(row);
  };
  record(0, 0.0);
  if (wanted(0.0)) emit_snapshot(res, s, 0.0);

  std::size_t step = 0;
  for (double stop : stops) {
    if (stop <= 0.0) continue;
    while (s.time < stop) {
      const auto t0 = std::chrono::steady_clock::now();
      try {
        sim.step(s, std::optional<double>(stop));
      } catch (const DivergenceError&) {
        if (opt.out_dir) {
          std::ofstream dump(*opt.out_dir / "divergence_dump.csv");
          dump.precision(17);
          dump << s.values.format(Eigen::IOFormat(Eigen::FullPrecision, 0, ",", "\n"));
        }
        throw;
      }
      ++step;
      const double ms =
          std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
      record(step, ms);
      if (opt.progress && step % d.output_stride == 0) {
        *opt.progress << "step " << step << "  t = " << s.time * 1e12 << " ps\n";
      }
    }
    if (wanted(stop)) emit_snapshot(res, s, stop);
  }
  res.steps = step;
  return res;
}

}  // namespace bpdg
