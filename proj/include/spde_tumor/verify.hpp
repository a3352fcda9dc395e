#ifndef SPDE_TUMOR_VERIFY_HPP
#define SPDE_TUMOR_VERIFY_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <ostream>
#include <string>
#include <tuple>
#include <vector>

#include "spde_tumor/assembly.hpp"
#include "spde_tumor/constitutive.hpp"
#include "spde_tumor/mesh.hpp"
#include "spde_tumor/noise.hpp"
#include "spde_tumor/postproc.hpp"
#include "spde_tumor/sparse.hpp"
#include "spde_tumor/stepper.hpp"

namespace spde_tumor {

struct CheckReport {
  std::string name;
  bool passed = false;
  double measured = 0.0;
  double bound = 0.0;
  std::string details;
};

/// passed = measured <= bound (NaN fails).
inline CheckReport bounded_check(std::string name, double measured, double bound, std::string details = {}) {
  return {std::move(name), measured <= bound, measured, bound, std::move(details)};
}

inline bool all_passed(const std::vector<CheckReport>& reports) {
  return std::all_of(reports.begin(), reports.end(), [](const CheckReport& r) { return r.passed; });
}

inline void print_report_table(std::ostream& os, const std::vector<CheckReport>& reports) {
  std::size_t w = 4;
  for (const auto& r : reports) w = std::max(w, r.name.size());
  for (const auto& r : reports) {
    os << (r.passed ? "PASS  " : "FAIL  ") << r.name << std::string(w - r.name.size() + 2, ' ')
       << "measured=" << format_double(r.measured) << "  bound=" << format_double(r.bound);
    if (!r.details.empty()) os << "  " << r.details;
    os << '\n';
  }
}

inline void write_report_csv(std::ostream& os, const std::vector<CheckReport>& reports) {
  os << "name,passed,measured,bound,details\n";
  for (const auto& r : reports) {
    std::string d = r.details;
    std::replace(d.begin(), d.end(), ',', ';');
    os << r.name << ',' << (r.passed ? 1 : 0) << ',' << format_double(r.measured) << ','
       << format_double(r.bound) << ',' << d << '\n';
  }
}

// ---------------------------------------------------------------------------
// Element matrices

namespace detail {

using Mat4 = std::array<std::array<double, 4>, 4>;

/// Single-element matrix in local counterclockwise corner order.
inline Mat4 element_matrix(const Grid& one, const SparseMatrix& a) {
  const auto nodes = one.element_nodes(0);
  Mat4 out{};
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 4; ++j) out[i][j] = a.at(nodes[i], nodes[j]);
  return out;
}

inline double max_diff(const Mat4& a, const Mat4& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 4; ++j) d = std::max(d, std::abs(a[i][j] - b[i][j]));
  return d;
}

inline Mat4 scaled(const Mat4& a, double s) {
  Mat4 out = a;
  for (auto& row : out)
    for (auto& v : row) v *= s;
  return out;
}

}  // namespace detail

inline std::vector<CheckReport> check_element_oracles() {
  using detail::Mat4;
  constexpr double kTol = 1e-14;
  std::vector<CheckReport> out;

  const Grid unit(1, 1, 1.0, 1.0);
  const Mat4 m_unit = detail::scaled({{{4, 2, 1, 2}, {2, 4, 2, 1}, {1, 2, 4, 2}, {2, 1, 2, 4}}}, 1.0 / 36.0);
  const Mat4 k_unit = detail::scaled({{{4, -1, -2, -1}, {-1, 4, -1, -2}, {-2, -1, 4, -1}, {-1, -2, -1, 4}}}, 1.0 / 6.0);
  out.push_back(bounded_check("element_mass_unit",
                              detail::max_diff(detail::element_matrix(unit, assemble_mass(unit)), m_unit), kTol));
  out.push_back(bounded_check("element_stiffness_unit",
                              detail::max_diff(detail::element_matrix(unit, assemble_stiffness(unit)), k_unit), kTol));

  // hx = 2, hy = 1
  const Grid aniso(1, 1, 2.0, 1.0);
  const Mat4 m_aniso = detail::scaled({{{4, 2, 1, 2}, {2, 4, 2, 1}, {1, 2, 4, 2}, {2, 1, 2, 4}}}, 1.0 / 18.0);
  const Mat4 k_aniso =
      detail::scaled({{{10, 2, -5, -7}, {2, 10, -7, -5}, {-5, -7, 10, 2}, {-7, -5, 2, 10}}}, 1.0 / 12.0);
  out.push_back(bounded_check("element_mass_anisotropic",
                              detail::max_diff(detail::element_matrix(aniso, assemble_mass(aniso)), m_aniso), kTol));
  out.push_back(bounded_check(
      "element_stiffness_anisotropic",
      detail::max_diff(detail::element_matrix(aniso, assemble_stiffness(aniso)), k_aniso), kTol));

  const std::vector<double> ones(unit.num_nodes(), 1.0);
  const double id_diff =
      std::max(detail::max_diff(detail::element_matrix(unit, assemble_weighted_mass(unit, ones)), m_unit),
               detail::max_diff(detail::element_matrix(unit, assemble_weighted_stiffness(unit, ones)), k_unit));
  out.push_back(bounded_check("element_identity_weight", id_diff, kTol));

  std::vector<double> wx(unit.num_nodes());
  for (std::size_t id = 0; id < wx.size(); ++id) wx[id] = unit.node_coord(id).x;
  const Mat4 mw = detail::scaled({{{4, 4, 2, 2}, {4, 12, 6, 2}, {2, 6, 12, 4}, {2, 2, 4, 4}}}, 1.0 / 144.0);
  const Mat4 kw = detail::scaled({{{3, -1, -2, 0}, {-1, 5, -2, -2}, {-2, -2, 5, -1}, {0, -2, -1, 3}}}, 1.0 / 12.0);
  out.push_back(bounded_check(
      "element_weighted_mass_x", detail::max_diff(detail::element_matrix(unit, assemble_weighted_mass(unit, wx)), mw),
      kTol));
  out.push_back(bounded_check(
      "element_weighted_stiffness_x",
      detail::max_diff(detail::element_matrix(unit, assemble_weighted_stiffness(unit, wx)), kw), kTol));
  return out;
}

// ---------------------------------------------------------------------------
// Pure Cahn-Hilliard: conservation and dissipation

/// chi = alpha = beta = delta = 0, no noise, Neumann nutrient.
inline ModelParams pure_cahn_hilliard_params(double dt = 0.01) {
  ModelParams p;
  p.chi = p.alpha = p.beta = p.delta = 0.0;
  p.noise.nu = 0.0;
  p.noise.sigma_amp = 0.0;
  p.sigma_bc = SigmaBoundary::NeumannZero;
  p.dt = dt;
  return p;
}

/// mean + amp * sum a_jk cos(j pi x/lx) cos(k pi y/ly) / (1 + j^2 + k^2),
/// a_jk standard normal from `seed`, j, k < modes, (j, k) != (0, 0).
inline std::function<double(double, double)> smooth_random_field(const Grid& grid, std::uint64_t seed,
                                                                 double mean = 0.5, double amp = 0.2,
                                                                 std::size_t modes = 5) {
  RngStream rng(seed);
  std::vector<double> a(modes * modes);
  for (auto& v : a) v = rng.normal();
  const double lx = grid.lx(), ly = grid.ly();
  return [a, mean, amp, modes, lx, ly](double x, double y) {
    double v = mean;
    for (std::size_t j = 0; j < modes; ++j)
      for (std::size_t k = 0; k < modes; ++k) {
        if (j + k == 0) continue;
        const double jj = static_cast<double>(j), kk = static_cast<double>(k);
        v += amp * a[j * modes + k] * std::cos(jj * M_PI * x / lx) * std::cos(kk * M_PI * y / ly) /
             (1.0 + jj * jj + kk * kk);
      }
    return v;
  };
}

struct DissipationRecord {
  double relative_mass_drift = 0.0;  // max_n |1^T M phi_n - 1^T M phi_0| / max(|1^T M phi_0|, tiny)
  double max_energy_increase = 0.0;  // max_n E(phi_{n+1}) - E(phi_n)
  std::vector<double> energies;
  bool finite = true;
};

/// Deterministic run recording tumor mass and the Ginzburg-Landau energy.
/// `hook` may tamper with each assembled system (negative controls).
inline DissipationRecord run_dissipation(const Grid& grid, const ModelParams& params,
                                         const std::function<double(double, double)>& phi0, std::size_t steps,
                                         std::function<void(StepSystem&)> hook = {}) {
  params.validate();
  StepOperators ops(grid, params);
  ops.system_hook = std::move(hook);
  const auto& mass = ops.consistent_mass();
  State s = initialize(grid, params, phi0);
  const StepNoise zero{std::vector<double>(grid.num_nodes(), 0.0), std::vector<double>(grid.num_nodes(), 0.0)};

  DissipationRecord rec;
  const double m0 = field_integral(grid, mass, s.phi);
  const double scale = std::max(std::abs(m0), std::numeric_limits<double>::min());
  rec.energies.push_back(phase_energy(grid, s.phi, params));
  rec.max_energy_increase = -std::numeric_limits<double>::infinity();
  for (std::size_t n = 0; n < steps; ++n) {
    try {
      s = step_with_noise(s, ops, params, zero, n);
    } catch (const StepError&) {
      rec.finite = false;
      rec.max_energy_increase = std::numeric_limits<double>::infinity();
      rec.relative_mass_drift = std::numeric_limits<double>::infinity();
      return rec;
    }
    rec.relative_mass_drift =
        std::max(rec.relative_mass_drift, std::abs(field_integral(grid, mass, s.phi) - m0) / scale);
    rec.energies.push_back(phase_energy(grid, s.phi, params));
    rec.max_energy_increase = std::max(rec.max_energy_increase, rec.energies.back() - rec.energies[n]);
  }
  return rec;
}

/// Negates the mobility block dt K_m1 of the tumor rows: the flux then runs
/// up the chemical-potential gradient.
inline void break_flux_sign(StepSystem& sys) {
  auto& a = sys.matrix;
  const std::size_t n = a.nrows / 3;
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t k = a.row_offsets[r]; k < a.row_offsets[r + 1]; ++k)
      if (a.col_indices[k] >= n && a.col_indices[k] < 2 * n) a.values[k] = -a.values[k];
}

inline std::vector<CheckReport> check_conservation_dissipation(const std::vector<std::size_t>& grid_sizes,
                                                               std::size_t steps, double dt = 0.01,
                                                               std::uint64_t seed = 7) {
  constexpr double kDrift = 1e-9;
  constexpr double kEnergy = 1e-10;
  const ModelParams p = pure_cahn_hilliard_params(dt);
  std::vector<CheckReport> out;
  for (auto n : grid_sizes) {
    const Grid g(n, n, 1.0, 1.0);
    const auto rec = run_dissipation(g, p, smooth_random_field(g, seed), steps);
    const std::string tag = std::to_string(n) + "x" + std::to_string(n);
    out.push_back(bounded_check("mass_conservation_" + tag, rec.relative_mass_drift, kDrift,
                                std::to_string(steps) + " steps"));
    out.push_back(bounded_check("energy_dissipation_" + tag, rec.max_energy_increase, kEnergy,
                                "E0=" + format_double(rec.energies.front()) +
                                    " E_end=" + format_double(rec.energies.back())));
  }

  const Grid g(8, 8, 1.0, 1.0);
  const auto flat = run_dissipation(g, p, [](double, double) { return 0.3; }, 10);
  out.push_back(bounded_check("mass_conservation_constant_field", flat.relative_mass_drift, 1e-14));

  // Self-test: the same checks must reject a scheme with the flux sign flipped.
  const auto broken = run_dissipation(g, p, smooth_random_field(g, seed), 20, break_flux_sign);
  const bool detected = !broken.finite || broken.max_energy_increase > kEnergy;
  out.push_back({"negative_control_broken_sign", detected, broken.max_energy_increase, kEnergy,
                 detected ? "broken scheme rejected" : "broken scheme NOT rejected"});
  return out;
}

// ---------------------------------------------------------------------------
// Energy estimate monitor

/// Discrete surrogates of the energy estimate. V-norm: u^T M u + u^T K u.
struct EnergyEstimateRecord {
  double dt = 0.0;
  double sup_phi_v = 0.0;        // sup_n ||phi_n||_V^2
  double sup_psi_l1 = 0.0;       // sup_n ||Psi(phi_n)||_L1
  double int_grad_mu = 0.0;      // sum_n dt mu^T K mu
  double sup_sigma_h = 0.0;      // sup_n ||sigma_n||^2
  double int_sigma_v = 0.0;      // sum_n dt ||sigma_n||_V^2
  double data = 0.0;             // ||phi0||_V^2 + ||Psi(phi0)||_L1 + ||sigma0||^2
  bool finite = true;

  double lhs() const { return sup_phi_v + sup_psi_l1 + int_grad_mu + sup_sigma_h + int_sigma_v; }
  /// lhs / data; 0 when both vanish, infinity when only the data vanishes.
  double c_emp() const {
    if (data > 0.0) return lhs() / data;
    return lhs() == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  }
};

class EnergyEstimateMonitor {
 public:
  EnergyEstimateMonitor(const Grid& grid, const ModelParams& params)
      : grid_(grid), params_(params), mass_(assemble_mass(grid)), stiff_(assemble_stiffness(grid)) {
    rec_.dt = params.dt;
  }

  void observe(std::size_t step, const State& s) {
    const double m_phi = bilinear(mass_, s.phi, s.phi);
    const double phi_v = m_phi + bilinear(stiff_, s.phi, s.phi);
    const double psi_l1 = energy_parts(grid_, s.phi, s.sigma, params_).potential;
    const double grad_mu = bilinear(stiff_, s.mu, s.mu);
    const double sig_h = bilinear(mass_, s.sigma, s.sigma);
    const double sig_v = sig_h + bilinear(stiff_, s.sigma, s.sigma);
    for (double v : {phi_v, psi_l1, grad_mu, sig_v})
      if (!std::isfinite(v)) rec_.finite = false;
    if (step == 0) rec_.data = phi_v + psi_l1 + sig_h;
    rec_.sup_phi_v = std::max(rec_.sup_phi_v, phi_v);
    rec_.sup_psi_l1 = std::max(rec_.sup_psi_l1, psi_l1);
    rec_.sup_sigma_h = std::max(rec_.sup_sigma_h, sig_h);
    if (step > 0) {
      rec_.int_grad_mu += params_.dt * grad_mu;
      rec_.int_sigma_v += params_.dt * sig_v;
    }
  }

  const EnergyEstimateRecord& record() const { return rec_; }

 private:
  Grid grid_;
  ModelParams params_;
  SparseMatrix mass_, stiff_;
  EnergyEstimateRecord rec_;
};

/// Runs the model and monitors the estimate. A failed step leaves finite=false.
inline EnergyEstimateRecord monitor_energy_estimate(const Grid& grid, const ModelParams& params,
                                                    std::uint64_t seed) {
  EnergyEstimateMonitor mon(grid, params);
  Observers obs;
  obs.on_state = [&](std::size_t step, const State& s) { mon.observe(step, s); };
  try {
    run_simulation(grid, params, seed, RunOptions{}, obs);
  } catch (const StepError&) {
    auto rec = mon.record();
    rec.finite = false;
    return rec;
  }
  return mon.record();
}

/// Finiteness of every monitored quantity for one run.
inline CheckReport check_energy_estimate(const EnergyEstimateRecord& rec, const std::string& name) {
  const bool ok = rec.finite && std::isfinite(rec.c_emp());
  return {name, ok, rec.c_emp(), std::numeric_limits<double>::infinity(),
          "lhs=" + format_double(rec.lhs()) + " data=" + format_double(rec.data)};
}

/// Refinement stability: both runs finite and c_emp(coarse)/c_emp(fine) in [0.5, 2].
inline CheckReport check_energy_estimate(const EnergyEstimateRecord& coarse, const EnergyEstimateRecord& fine,
                                         const std::string& name) {
  const double ratio = coarse.c_emp() / fine.c_emp();
  const bool ok = coarse.finite && fine.finite && std::isfinite(ratio) && ratio >= 0.5 && ratio <= 2.0;
  return {name, ok, ratio, 2.0,
          "c_emp(dt=" + format_double(coarse.dt) + ")=" + format_double(coarse.c_emp()) + " c_emp(dt=" +
              format_double(fine.dt) + ")=" + format_double(fine.c_emp()) + " window [0.5, 2]"};
}

/// Default parameters on an n x n grid: dt and dt/2 refinement pair, plus a
/// nu = 2.5 finiteness run.
inline std::vector<CheckReport> check_energy_estimate_suite(std::size_t n = 32, double dt = 0.01,
                                                            double t_end = 1.0, std::uint64_t seed = 11) {
  const Grid g(n, n, 1.0, 1.0);
  ModelParams p;
  p.dt = dt;
  p.t_end = t_end;
  const auto coarse = monitor_energy_estimate(g, p, seed);
  ModelParams pf = p;
  pf.dt = 0.5 * dt;
  const auto fine = monitor_energy_estimate(g, pf, seed);
  ModelParams ph = p;
  ph.noise.nu = 2.5;
  const auto loud = monitor_energy_estimate(g, ph, seed);
  return {check_energy_estimate(coarse, "energy_estimate_finite"),
          check_energy_estimate(coarse, fine, "energy_estimate_refinement"),
          check_energy_estimate(loud, "energy_estimate_finite_nu2.5")};
}

// ---------------------------------------------------------------------------
// Yosida regularisation

using Resolvent = std::function<double(double r, double lam)>;

inline Resolvent default_resolvent(const PotentialSpec& spec = {}) {
  return [spec](double r, double lam) { return yosida_resolvent(r, lam, spec); };
}

/// Residual, Lipschitz bound, monotonicity, |gamma_lambda| <= |gamma| and
/// monotone convergence as lambda decreases. `lambdas` must be decreasing.
inline std::vector<CheckReport> check_yosida_with(const Resolvent& resolvent, const std::vector<double>& lambdas,
                                                  std::size_t samples, std::uint64_t seed,
                                                  const std::string& prefix, const PotentialSpec& spec = {}) {
  RngStream rng(seed);
  std::vector<double> pts(samples), pair(samples);
  for (std::size_t i = 0; i < samples; ++i) {
    pts[i] = -2.0 + 5.0 * rng.uniform();
    pair[i] = -2.0 + 5.0 * rng.uniform();
  }

  double worst_residual = 0.0, worst_lipschitz = 0.0, worst_monotone = 0.0, worst_bound = 0.0;
  std::vector<double> sup_err;
  bool decreasing_lambdas = true;
  for (std::size_t l = 0; l < lambdas.size(); ++l) {
    const double lam = lambdas[l];
    if (l > 0 && !(lam < lambdas[l - 1])) decreasing_lambdas = false;
    auto gl = [&](double r) { return (r - resolvent(r, lam)) / lam; };
    double err = 0.0;
    for (std::size_t i = 0; i < samples; ++i) {
      const double a = pts[i], b = pair[i];
      const double ya = resolvent(a, lam);
      const double res = std::abs(ya + lam * yosida_gamma(ya, spec) - a) / std::max(1.0, std::abs(a));
      worst_residual = std::max(worst_residual, res);
      const double ga = (a - ya) / lam, gb = gl(b);
      // Slack: the resolvent tolerance perturbs gamma_lambda by up to tol/lam.
      const double slack = 2e-12 * std::max({1.0, std::abs(a), std::abs(b)}) / lam;
      worst_lipschitz = std::max(worst_lipschitz, std::abs(ga - gb) - std::abs(a - b) / lam - slack);
      worst_monotone = std::max(worst_monotone, -(ga - gb) * (a - b) - slack * std::abs(a - b));
      worst_bound = std::max(worst_bound, std::abs(ga) - std::abs(yosida_gamma(a, spec)) - slack);
      err = std::max(err, std::abs(ga - yosida_gamma(a, spec)));
    }
    sup_err.push_back(err);
  }
  double worst_increase = decreasing_lambdas ? -std::numeric_limits<double>::infinity()
                                            : std::numeric_limits<double>::infinity();
  for (std::size_t l = 1; l < sup_err.size(); ++l) worst_increase = std::max(worst_increase, sup_err[l] - sup_err[l - 1]);
  std::string errs = "sup|g_l-g|:";
  for (double e : sup_err) errs += " " + format_double(e);

  return {bounded_check(prefix + "resolvent_residual", worst_residual, 1e-12),
          bounded_check(prefix + "lipschitz_bound", worst_lipschitz, 0.0, "max excess over |a-b|/lambda"),
          bounded_check(prefix + "monotone", worst_monotone, 0.0),
          bounded_check(prefix + "bounded_by_gamma", worst_bound, 0.0),
          {prefix + "convergence_monotone", worst_increase < 0.0, worst_increase, 0.0, errs}};
}

inline std::vector<CheckReport> check_yosida(const std::vector<double>& lambdas = {1.0, 0.1, 0.01, 0.001},
                                             std::size_t samples = 1000, std::uint64_t seed = 3) {
  auto out = check_yosida_with(default_resolvent(), lambdas, samples, seed, "yosida_");
  // Self-test: a resolvent solving with the wrong lambda must be rejected.
  const auto broken = check_yosida_with(
      [](double r, double lam) { return yosida_resolvent(r, 0.5 * lam); }, lambdas, samples, seed, "broken_");
  const bool detected = !all_passed(broken);
  out.push_back({"yosida_negative_control", detected, broken.front().measured, 1e-12,
                 detected ? "broken resolvent rejected" : "broken resolvent NOT rejected"});
  return out;
}

// ---------------------------------------------------------------------------
// Spatial convergence

/// Bilinear interpolation of a coarse nodal field onto a nested fine grid.
inline std::vector<double> prolongate(const Grid& coarse, const Grid& fine, std::span<const double> u) {
  require_size(u.size(), coarse.num_nodes(), "prolongate");
  if (fine.nx() % coarse.nx() != 0 || fine.ny() % coarse.ny() != 0 || fine.lx() != coarse.lx() ||
      fine.ly() != coarse.ly())
    throw std::invalid_argument("prolongate: grids are not nested");
  const std::size_t rx = fine.nx() / coarse.nx(), ry = fine.ny() / coarse.ny();
  std::vector<double> out(fine.num_nodes());
  for (std::size_t id = 0; id < out.size(); ++id) {
    const std::size_t i = fine.node_i(id), j = fine.node_j(id);
    const std::size_t ci = std::min(i / rx, coarse.nx() - 1), cj = std::min(j / ry, coarse.ny() - 1);
    const double tx = static_cast<double>(i - ci * rx) / static_cast<double>(rx);
    const double ty = static_cast<double>(j - cj * ry) / static_cast<double>(ry);
    out[id] = (1 - tx) * (1 - ty) * u[coarse.node_id(ci, cj)] + tx * (1 - ty) * u[coarse.node_id(ci + 1, cj)] +
              tx * ty * u[coarse.node_id(ci + 1, cj + 1)] + (1 - tx) * ty * u[coarse.node_id(ci, cj + 1)];
  }
  return out;
}

struct ConvergenceOptions {
  std::vector<std::size_t> sizes = {16, 32, 64};
  std::size_t reference = 128;
  double t_end = 0.1;
  double dt = 1e-3;
  double ratio_lo = 3.0;
  double ratio_hi = 5.0;
};

struct ConvergenceResult {
  std::vector<double> phi_errors, sigma_errors;  // L2 error of the prolongated solution
  std::vector<double> phi_ratios, sigma_ratios;
};

/// Deterministic coupled runs (nu = sigma_amp = 0) from the same initial
/// datum. `params` supplies everything else.
inline ConvergenceResult spatial_convergence(const ModelParams& params, const ConvergenceOptions& opt,
                                             const std::function<double(double, double)>& phi0 = initial_phi0) {
  ModelParams p = params;
  p.noise.nu = 0.0;
  p.noise.sigma_amp = 0.0;
  p.dt = opt.dt;
  p.t_end = opt.t_end;
  auto final_state = [&](std::size_t n) {
    const Grid g(n, n, 1.0, 1.0);
    return run_simulation(g, p, 0, RunOptions{}, {}, initialize(g, p, phi0)).final_state;
  };
  const Grid gref(opt.reference, opt.reference, 1.0, 1.0);
  const State ref = final_state(opt.reference);
  const auto mass = assemble_mass(gref);
  ConvergenceResult r;
  for (auto n : opt.sizes) {
    const Grid g(n, n, 1.0, 1.0);
    const State s = final_state(n);
    auto err = [&](const std::vector<double>& u, const std::vector<double>& uref) {
      auto d = prolongate(g, gref, u);
      for (std::size_t i = 0; i < d.size(); ++i) d[i] -= uref[i];
      return std::sqrt(std::max(0.0, bilinear(mass, d, d)));
    };
    r.phi_errors.push_back(err(s.phi, ref.phi));
    r.sigma_errors.push_back(err(s.sigma, ref.sigma));
  }
  for (std::size_t k = 1; k < opt.sizes.size(); ++k) {
    r.phi_ratios.push_back(r.phi_errors[k - 1] / r.phi_errors[k]);
    r.sigma_ratios.push_back(r.sigma_errors[k - 1] / r.sigma_errors[k]);
  }
  return r;
}

/// Tumor volume at t_end for dt, dt/2, dt/4 on one grid; the ratio of
/// successive differences should be 2 for a first-order scheme.
inline CheckReport check_time_richardson(std::size_t n = 32, double dt = 4e-3, double t_end = 0.1) {
  const Grid g(n, n, 1.0, 1.0);
  ModelParams p;
  p.noise.nu = 0.0;
  p.noise.sigma_amp = 0.0;
  p.t_end = t_end;
  const auto mass = assemble_mass(g);
  std::array<double, 3> q{};
  for (std::size_t k = 0; k < 3; ++k) {
    p.dt = dt / static_cast<double>(1u << k);
    q[k] = field_integral(g, mass, run_simulation(g, p, 0, RunOptions{}).final_state.phi);
  }
  const double ratio = (q[0] - q[1]) / (q[1] - q[2]);
  return {"time_richardson_ratio", ratio >= 1.0 && ratio <= 3.0, ratio, 3.0,
          "tumor volume at t=" + format_double(t_end) + " for dt=" + format_double(dt) + "/{1,2,4}; window [1, 3]"};
}

inline std::vector<CheckReport> check_spatial_convergence(const ConvergenceOptions& opt = {}) {
  std::vector<CheckReport> out;
  const ModelParams defaults;
  const auto r = spatial_convergence(defaults, opt);
  for (std::size_t k = 0; k < r.phi_ratios.size(); ++k) {
    const std::string tag = std::to_string(opt.sizes[k]) + "_" + std::to_string(opt.sizes[k + 1]);
    for (auto [field, ratio, errs] : {std::tuple{"phi", r.phi_ratios[k], &r.phi_errors},
                                      std::tuple{"sigma", r.sigma_ratios[k], &r.sigma_errors}}) {
      const bool ok = ratio >= opt.ratio_lo && ratio <= opt.ratio_hi;
      out.push_back({std::string("convergence_ratio_") + field + "_" + tag, ok, ratio, opt.ratio_hi,
                     "L2 errors " + format_double((*errs)[k]) + " -> " + format_double((*errs)[k + 1]) +
                         "; window [" + format_double(opt.ratio_lo) + ", " + format_double(opt.ratio_hi) + "]"});
    }
  }

  // A steady constant state must be reproduced exactly on every grid.
  ConvergenceOptions small = opt;
  small.sizes = {4, 8};
  small.reference = 16;
  small.t_end = 10 * opt.dt;
  const auto flat = spatial_convergence(defaults, small, [](double, double) { return 0.0; });
  double worst = 0.0;
  for (double e : flat.phi_errors) worst = std::max(worst, e);
  for (double e : flat.sigma_errors) worst = std::max(worst, e);
  out.push_back(bounded_check("convergence_constant_state", worst, 1e-12));

  out.push_back(check_time_richardson());
  return out;
}

// ---------------------------------------------------------------------------
// Splitting consistency

/// Runs to t_end with the convex split and with a fully explicit potential;
/// the difference at t_end must shrink like dt (ratio 2 under halving).
inline CheckReport check_splitting_consistency(std::size_t n = 16, double dt = 1e-3, double t_end = 0.02) {
  const Grid g(n, n, 1.0, 1.0);
  ModelParams p;
  p.noise.nu = 0.0;
  p.noise.sigma_amp = 0.0;
  p.t_end = t_end;
  const auto mass = assemble_mass(g);
  auto diff = [&](double h) {
    ModelParams split = p, expl = p;
    split.dt = expl.dt = h;
    expl.potential_treatment = PotentialTreatment::FullyExplicit;
    const auto a = run_simulation(g, split, 0, RunOptions{}).final_state;
    const auto b = run_simulation(g, expl, 0, RunOptions{}).final_state;
    std::vector<double> d(a.phi.size());
    for (std::size_t i = 0; i < d.size(); ++i) d[i] = a.phi[i] - b.phi[i];
    return std::sqrt(bilinear(mass, d, d));
  };
  const double d1 = diff(dt), d2 = diff(0.5 * dt);
  const double ratio = d1 / d2;
  return {"splitting_consistency_ratio", ratio >= 1.0 && ratio <= 3.0, ratio, 3.0,
          "split vs explicit difference at t=" + format_double(t_end) + ": " + format_double(d1) + " -> " +
              format_double(d2) + "; window [1, 3]"};
}

// ---------------------------------------------------------------------------

struct VerifyOptions {
  bool include_convergence = true;  // the 128^2 reference run dominates the cost
};

inline std::vector<CheckReport> run_verification_suite(const VerifyOptions& opt = {}) {
  std::vector<CheckReport> out;
  auto append = [&](std::vector<CheckReport> r) { out.insert(out.end(), r.begin(), r.end()); };
  append(check_element_oracles());
  append(check_conservation_dissipation({16, 32}, 200));
  append(check_energy_estimate_suite());
  append(check_yosida());
  out.push_back(check_splitting_consistency());
  if (opt.include_convergence) append(check_spatial_convergence());
  return out;
}

}  // namespace spde_tumor

#endif  // SPDE_TUMOR_VERIFY_HPP
