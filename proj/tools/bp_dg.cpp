#include <CLI11.hpp>

#include <chrono>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "bpdg/bpdg.hpp"

namespace {

using namespace bpdg;

struct Common {
  std::string config = "configs/diode.cfg";
  std::vector<std::string> overrides;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config, "configuration file")->check(CLI::ExistingFile);
  cmd->add_option("--set", c.overrides, "override a key, e.g. --set grid.n_x=200");
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

CollisionMatrix build_oracle(const LoadedConfig& cfg) {
  const Scales sc = build_scales(cfg.material);
  const KaneBand band = KaneBand::from(cfg.material);
  const KGrid grid = build_grid(cfg.device, band, sc);
  OracleOptions opt;
  opt.threads = cfg.device.threads;
  return k_matrix_oracle(grid, band, silicon_mechanisms(cfg.material), sc, opt);
}

int cmd_run(const Common& c, const std::optional<std::string>& kfile, const std::string& out) {
  const LoadedConfig cfg = load_config(c.config, c.overrides);
  const auto t0 = std::chrono::steady_clock::now();
  CollisionMatrix K = kfile ? read_kmatrix(*kfile) : build_oracle(cfg);
  std::cerr << "K matrix ready (" << K.size() << " cells, " << seconds_since(t0) << " s)\n";
  const Simulation sim(cfg, std::move(K));
  RunOptions opt;
  opt.out_dir = out;
  opt.progress = &std::cerr;
  const RunResult res = run(sim, opt);
  std::cerr << res.steps << " steps, " << seconds_since(t0) << " s total\n";
  return 0;
}

int cmd_oracle(const Common& c, const std::string& out) {
  const LoadedConfig cfg = load_config(c.config, c.overrides);
  const auto t0 = std::chrono::steady_clock::now();
  write_kmatrix(out, build_oracle(cfg));
  std::cerr << "wrote " << out << " in " << seconds_since(t0) << " s\n";
  return 0;
}

int cmd_extract(const Common& c, std::size_t particles, const std::string& dt_text,
                std::uint64_t seed, const std::optional<std::string>& ref, const std::string& out,
                const std::optional<std::string>& report) {
  const LoadedConfig cfg = load_config(c.config, c.overrides);
  const Scales sc = build_scales(cfg.material);
  const KaneBand band = KaneBand::from(cfg.material);
  const KGrid grid = build_grid(cfg.device, band, sc);
  const Mechanisms mechs = silicon_mechanisms(cfg.material);

  ExtractOptions opt;
  opt.n_particles = particles;
  opt.seed = seed;
  opt.threads = cfg.device.threads;
  opt.dt = dt_text == "auto" ? 0.0 : detail::parse_double("--dt", dt_text);
  if (dt_text != "auto" && !(opt.dt > 0.0)) throw std::invalid_argument("--dt must be positive");

  std::optional<CollisionMatrix> reference;
  if (ref) reference = read_kmatrix(*ref);
  const Eigen::VectorXd gamma =
      gamma_integrals(grid, band, mechs, sc, OracleOptions{16, cfg.device.threads});

  const auto t0 = std::chrono::steady_clock::now();
  ExtractionReport rep = extract_k_matrix(grid, band, mechs, sc, gamma, opt);
  if (reference) rep.errors = compare_matrices(rep.K_mc.K, reference->K);
  write_kmatrix(out, rep.K_mc);
  std::cerr << "extracted " << grid.size() << " columns with " << particles
            << " particles each in " << seconds_since(t0) << " s\n";
  if (report) {
    const bool fresh = !std::filesystem::exists(*report);
    std::ofstream os(*report, std::ios::app);
    if (fresh) write_error_report_header(os);
    write_error_report_row(os, rep);
  }
  write_error_report_header(std::cout);
  write_error_report_row(std::cout, rep);
  return 0;
}

int cmd_dump_grid(const Common& c, const std::string& out) {
  const LoadedConfig cfg = load_config(c.config, c.overrides);
  const Scales sc = build_scales(cfg.material);
  const KGrid grid = build_grid(cfg.device, KaneBand::from(cfg.material), sc);
  std::ofstream os(out);
  write_grid_csv(os, grid);
  return 0;
}

int cmd_dump_kmatrix(const std::string& in, const std::string& out) {
  const CollisionMatrix cm = read_kmatrix(in);
  std::ofstream os(out);
  write_kmatrix_csv(os, cm);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Boltzmann-Poisson solver with piecewise-constant k-space cells"};
  app.require_subcommand(1);

  Common common;
  std::optional<std::string> kfile;
  std::string out_dir = "out";
  auto* run_cmd = app.add_subcommand("run", "simulate the diode and write moments/diagnostics");
  add_common(run_cmd, common);
  run_cmd->add_option("--kmatrix", kfile, "precomputed K matrix file (default: oracle)");
  run_cmd->add_option("--out", out_dir, "output directory");

  std::string k_out = "k_oracle.bin";
  auto* oracle_cmd = app.add_subcommand("oracle-k", "compute K by deterministic quadrature");
  add_common(oracle_cmd, common);
  oracle_cmd->add_option("--out", k_out, "output matrix file");

  std::size_t particles = 10000;
  std::string dt_text = "auto";
  std::uint64_t seed = 1;
  std::optional<std::string> ref;
  std::string mc_out = "k_mc.bin";
  std::optional<std::string> report;
  auto* extract_cmd = app.add_subcommand("extract-k", "estimate K by short-time DSMC");
  add_common(extract_cmd, common);
  extract_cmd->add_option("--particles", particles, "particles per source cell")
      ->check(CLI::Range(std::size_t{1000}, std::size_t{1} << 40));
  extract_cmd->add_option("--dt", dt_text, "time step in seconds, or 'auto'");
  extract_cmd->add_option("--seed", seed, "master seed");
  extract_cmd->add_option("--ref", ref, "reference matrix for the error report");
  extract_cmd->add_option("--out", mc_out, "output matrix file");
  extract_cmd->add_option("--report", report, "append a row to this CSV error report");

  std::string grid_out = "grid.csv";
  auto* grid_cmd = app.add_subcommand("dump-grid", "write the k-cell table as CSV");
  add_common(grid_cmd, common);
  grid_cmd->add_option("--out", grid_out, "output CSV");

  std::string k_in;
  std::string csv_out = "kmatrix.csv";
  std::string format = "csv";
  auto* dumpk_cmd = app.add_subcommand("dump-kmatrix", "list nonzero K entries as CSV");
  dumpk_cmd->add_option("--in", k_in, "matrix file")->required()->check(CLI::ExistingFile);
  dumpk_cmd->add_option("--out", csv_out, "output CSV");
  dumpk_cmd->add_option("--format", format)->check(CLI::IsMember({"csv"}));

  CLI11_PARSE(app, argc, argv);
  try {
    if (*run_cmd) return cmd_run(common, kfile, out_dir);
    if (*oracle_cmd) return cmd_oracle(common, k_out);
    if (*extract_cmd) return cmd_extract(common, particles, dt_text, seed, ref, mc_out, report);
    if (*grid_cmd) return cmd_dump_grid(common, grid_out);
    if (*dumpk_cmd) return cmd_dump_kmatrix(k_in, csv_out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
