// spde_tumor: run, ensemble, sweep and verify front end.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "spde_tumor/config.hpp"
#include "spde_tumor/ensemble.hpp"
#include "spde_tumor/postproc.hpp"
#include "spde_tumor/verify.hpp"

namespace fs = std::filesystem;
using namespace spde_tumor;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitRuntime = 2;
constexpr int kExitVerify = 3;

struct Flags {
  std::string config;
  std::optional<std::size_t> nx, ny, samples, threads;
  std::optional<double> dt, t_end;
  std::optional<std::string> nu, out, snapshot_times, run_name;
  std::optional<std::uint64_t> seed;
  bool skip_convergence = false;
};

std::vector<double> parse_list(const std::string& text, const char* what) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (item.find_first_not_of(" \t", used) != std::string::npos) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ConfigError(std::string(what) + ": not a number: '" + item + "'");
    }
  }
  if (out.empty()) throw ConfigError(std::string(what) + ": empty list");
  return out;
}

RunConfig build_config(RunMode mode, const Flags& f) {
  RunConfig c;
  if (!f.config.empty()) c = parse_config_file(f.config, c);
  c.mode = mode;
  if (f.nx) c.nx = *f.nx;
  if (f.ny) c.ny = *f.ny;
  if (f.nx && !f.ny) c.ny = *f.nx;
  if (f.dt) c.params.dt = *f.dt;
  if (f.t_end) c.params.t_end = *f.t_end;
  if (f.samples) c.samples = *f.samples;
  if (f.seed) c.seed = *f.seed;
  if (f.threads) c.threads = *f.threads;
  if (f.run_name) c.run_name = *f.run_name;
  if (f.snapshot_times) c.snapshot_times = parse_list(*f.snapshot_times, "--snapshot-times");
  if (f.nu) {
    const auto v = parse_list(*f.nu, "--nu");
    if (mode == RunMode::Sweep) {
      c.sweep_nu = v;
    } else {
      if (v.size() != 1) throw ConfigError("--nu takes a single value outside sweep");
      c.params.noise.nu = v.front();
    }
  }
  if (f.out) {
    c.out_dir = *f.out;
  } else if (c.out_dir.empty()) {
    const char* env = std::getenv("SPDE_TUMOR_OUT");
    c.out_dir = env != nullptr && *env != '\0' ? env : "spde_tumor_out";
  }
  validate(c);
  return c;
}

fs::path run_dir(const RunConfig& c) { return fs::path(c.out_dir) / resolved_run_name(c); }

void write_text(const fs::path& path, const std::string& text) {
  auto out = open_output(path);
  out << text;
  close_output(out, path);
}

std::string time_tag(double t) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "t%.6f", t);
  return buf;
}

void write_trajectory_csv(const fs::path& path, const Trajectory& tr) {
  std::vector<std::pair<std::string, std::vector<double>>> cols;
  for (std::size_t q = 0; q < tr.qoi_names.size(); ++q) {
    std::vector<double> col;
    for (const auto& row : tr.values) col.push_back(row[q]);
    cols.emplace_back(tr.qoi_names[q], std::move(col));
  }
  write_csv_timeseries(path, tr.times, cols);
}

void write_snapshot(const fs::path& dir, const Grid& grid, const State& s) {
  const auto tag = time_tag(s.t);
  write_vtk_field(dir / ("fields_" + tag + ".vtk"), grid, {{"phi", s.phi}, {"mu", s.mu}, {"sigma", s.sigma}});
  write_contour_csv(dir / ("contour_" + tag + ".csv"), extract_contour(grid, s.phi, 0.5));
}

std::vector<std::size_t> snapshot_steps(const RunConfig& c) {
  std::vector<std::size_t> steps;
  if (c.snapshot_times.empty()) {
    steps.push_back(c.params.num_steps());
  } else {
    for (double t : c.snapshot_times) steps.push_back(static_cast<std::size_t>(std::llround(t / c.params.dt)));
  }
  return steps;
}

int cmd_run(const RunConfig& c) {
  const Grid grid = c.grid();
  const fs::path dir = run_dir(c);
  write_text(dir / "config.json", config_echo(c));
  const auto steps = snapshot_steps(c);
  Observers obs;
  obs.on_state = [&](std::size_t n, const State& s) {
    if (std::find(steps.begin(), steps.end(), n) != steps.end()) write_snapshot(dir / "snapshots", grid, s);
  };
  RunOptions ro;
  ro.qois = default_qois(grid);
  ro.qoi_every = c.qoi_every;
  const auto tr = run_simulation(grid, c.params, derive_sample_seed(c.seed, 0), ro, obs);
  write_trajectory_csv(dir / "qoi.csv", tr);
  std::cerr << "run: wrote " << dir.string() << "\n";
  return kExitOk;
}

int cmd_ensemble(const RunConfig& c) {
  const Grid grid = c.grid();
  const fs::path dir = run_dir(c);
  write_text(dir / "config.json", config_echo(c));
  EnsembleOptions eo;
  eo.threads = c.threads;
  eo.qoi_every = c.qoi_every;
  const auto r = run_ensemble(grid, c.params, c.samples, c.seed, eo);

  std::vector<std::pair<std::string, std::vector<double>>> stats;
  for (std::size_t q = 0; q < r.qoi_names.size(); ++q) {
    std::vector<double> m, s;
    for (std::size_t t = 0; t < r.times.size(); ++t) {
      m.push_back(r.mean[t][q]);
      s.push_back(r.std[t][q]);
    }
    stats.emplace_back("mean_" + r.qoi_names[q], std::move(m));
    stats.emplace_back("std_" + r.qoi_names[q], std::move(s));
  }
  write_csv_timeseries(dir / "stats.csv", r.times, stats);

  for (std::size_t s = 0; s < r.num_samples(); ++s) {
    std::vector<std::pair<std::string, std::vector<double>>> cols;
    for (std::size_t q = 0; q < r.qoi_names.size(); ++q) {
      std::vector<double> col;
      for (std::size_t t = 0; t < r.times.size(); ++t) col.push_back(r.samples[s][t][q]);
      cols.emplace_back(r.qoi_names[q], std::move(col));
    }
    char name[32];
    std::snprintf(name, sizeof name, "sample_%04zu.csv", s);
    write_csv_timeseries(dir / "samples" / name, r.times, cols);
  }
  std::ostringstream seeds;
  seeds << "sample,seed\n";
  for (std::size_t s = 0; s < r.seeds.size(); ++s) seeds << s << ',' << r.seeds[s] << '\n';
  write_text(dir / "seeds.csv", seeds.str());
  std::cerr << "ensemble: " << r.num_samples() << " samples, wrote " << dir.string() << "\n";
  return kExitOk;
}

int cmd_sweep(const RunConfig& c) {
  const Grid grid = c.grid();
  const fs::path dir = run_dir(c);
  write_text(dir / "config.json", config_echo(c));
  SweepOptions so;
  so.threads = c.threads;
  so.qoi_every = c.qoi_every;
  for (auto n : snapshot_steps(c)) so.snapshot_times.push_back(static_cast<double>(n) * c.params.dt);
  const std::size_t steps = c.params.num_steps();
  // per-member per-step hash of the raw increments
  std::vector<std::vector<std::uint64_t>> step_hash(c.sweep_nu.size(), std::vector<std::uint64_t>(steps, 0));
  so.on_noise = [&](std::size_t m, std::size_t step, const StepNoise& w) {
    BitHash h;
    h.add(w.xi_phi);
    h.add(w.xi_sigma);
    step_hash[m][step] = h.value();
  };
  const auto members = run_seed_sweep(grid, c.params, c.sweep_nu, derive_sample_seed(c.seed, 0), so);

  std::ostringstream log;
  log << "member,nu,step,noise_hash\n";
  for (std::size_t m = 0; m < members.size(); ++m)
    for (std::size_t s = 0; s < steps; ++s)
      log << m << ',' << format_double(members[m].nu) << ',' << s << ',' << step_hash[m][s] << '\n';
  write_text(dir / "noise_log.csv", log.str());

  bool shared = true;
  std::ostringstream check;
  for (const auto& m : members) {
    check << "nu=" << format_double(m.nu) << " noise_hash=" << m.noise_hash << '\n';
    shared = shared && m.noise_hash == members.front().noise_hash;
  }
  check << (shared ? "PASS" : "FAIL") << " shared raw Gaussian sequence across " << members.size() << " members\n";
  write_text(dir / "shared_noise.log", check.str());

  for (const auto& m : members) {
    char name[48];
    std::snprintf(name, sizeof name, "nu_%g", m.nu);
    write_trajectory_csv(dir / name / "qoi.csv", m.trajectory);
    for (const auto& s : m.snapshots) write_snapshot(dir / name / "snapshots", grid, s);
  }
  std::cerr << "sweep: " << members.size() << " members, wrote " << dir.string() << "\n";
  if (!shared) {
    std::cerr << "sweep: members did not consume the same noise\n";
    return kExitVerify;
  }
  return kExitOk;
}

int cmd_verify(const RunConfig& c, bool skip_convergence, bool write_files) {
  VerifyOptions vo;
  vo.include_convergence = !skip_convergence;
  const auto reports = run_verification_suite(vo);
  print_report_table(std::cout, reports);
  if (write_files) {
    std::ostringstream csv;
    write_report_csv(csv, reports);
    write_text(run_dir(c) / "verify.csv", csv.str());
  }
  const bool ok = all_passed(reports);
  std::cout << (ok ? "verify: all checks passed\n" : "verify: FAILED\n");
  return ok ? kExitOk : kExitVerify;
}

void add_common(CLI::App* cmd, Flags& f) {
  cmd->add_option("--config", f.config, "JSON config file (flat dotted keys)");
  cmd->add_option("--nx", f.nx, "elements in x (also sets ny unless given)");
  cmd->add_option("--ny", f.ny, "elements in y");
  cmd->add_option("--dt", f.dt, "time step");
  cmd->add_option("--t-end", f.t_end, "final time");
  cmd->add_option("--nu", f.nu, "tumor noise intensity; comma list for sweep");
  cmd->add_option("--samples", f.samples, "ensemble size");
  cmd->add_option("--seed", f.seed, "base seed");
  cmd->add_option("--threads", f.threads, "worker threads (0: all cores)");
  cmd->add_option("--out", f.out, "output root directory (fallback: $SPDE_TUMOR_OUT)");
  cmd->add_option("--snapshot-times", f.snapshot_times, "comma list of snapshot times");
  cmd->add_option("--name", f.run_name, "run name (output subdirectory)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Stochastic Cahn-Hilliard tumor growth simulator"};
  app.require_subcommand(1);
  Flags flags;
  std::vector<std::pair<CLI::App*, RunMode>> cmds = {
      {app.add_subcommand("run", "single trajectory"), RunMode::Run},
      {app.add_subcommand("ensemble", "Monte Carlo ensemble with mean/std"), RunMode::Ensemble},
      {app.add_subcommand("sweep", "same-seed noise-level sweep"), RunMode::Sweep},
      {app.add_subcommand("verify", "verification suite"), RunMode::Verify},
  };
  for (auto& [cmd, mode] : cmds) add_common(cmd, flags);
  cmds.back().first->add_flag("--skip-convergence", flags.skip_convergence, "omit the 128^2 convergence study");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitValidation;
  }

  RunMode mode = RunMode::Run;
  for (auto& [cmd, m] : cmds)
    if (cmd->parsed()) mode = m;

  RunConfig config;
  try {
    config = build_config(mode, flags);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  }

  try {
    switch (mode) {
      case RunMode::Run: return cmd_run(config);
      case RunMode::Ensemble: return cmd_ensemble(config);
      case RunMode::Sweep: return cmd_sweep(config);
      case RunMode::Verify: {
        const bool explicit_out = flags.out.has_value() || std::getenv("SPDE_TUMOR_OUT") != nullptr;
        return cmd_verify(config, flags.skip_convergence, explicit_out);
      }
    }
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "runtime error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitOk;
}
