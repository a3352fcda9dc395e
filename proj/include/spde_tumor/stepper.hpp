#ifndef SPDE_TUMOR_STEPPER_HPP
#define SPDE_TUMOR_STEPPER_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "spde_tumor/assembly.hpp"
#include "spde_tumor/constitutive.hpp"
#include "spde_tumor/linalg.hpp"
#include "spde_tumor/mesh.hpp"
#include "spde_tumor/noise.hpp"
#include "spde_tumor/sparse.hpp"

namespace spde_tumor {

enum class SigmaBoundary { NeumannZero, DirichletConstant };

/// How Psi' enters the chemical potential row.
enum class PotentialTreatment {
  ConvexSplit,    // 0.75 phi implicit, Psi_e'(phi_n) explicit
  FullyExplicit,  // Psi'(phi_n) explicit
};

/// Mobility weighting the chemotaxis cross term -chi K phi of the nutrient row.
enum class NutrientCrossWeight {
  TumorMobility,     // K_{m1(phi_n)}
  NutrientMobility,  // K_{m2(sigma_n)}
};

enum class Coupling {
  Monolithic,  // one 3N solve per step
  Decoupled,   // alternate (phi, mu) and sigma solves until the update stalls
};

struct ModelParams {
  double epsilon = 0.01;
  double chi = 5.0;
  double alpha = 1.0;
  double beta = 15.0;
  double delta = 100.0;
  MobilitySpec m1 = MobilitySpec::quartic_interface(1e-16);
  MobilitySpec m2 = MobilitySpec::constant(10.0);
  GrowthSpec f{};
  PotentialSpec potential{};
  NoiseSpec noise{};
  SigmaBoundary sigma_bc = SigmaBoundary::DirichletConstant;
  double sigma_boundary_value = 1.0;
  double dt = 0.01;
  double t_end = 1.0;

  PotentialTreatment potential_treatment = PotentialTreatment::ConvexSplit;
  NutrientCrossWeight nutrient_cross_weight = NutrientCrossWeight::TumorMobility;
  Coupling coupling = Coupling::Monolithic;
  double decoupling_tol = 1e-8;
  std::size_t decoupling_max_iter = 200;
  bool lumped_mass = false;
  SolverKind solver = SolverKind::SparseLU;
  double solver_tol = 1e-10;
  std::size_t solver_max_iter = 0;  // 0: 10 * system size

  std::size_t num_steps() const {
    return static_cast<std::size_t>(std::llround(t_end / dt));
  }

  void validate() const {
    auto fail = [](const std::string& m) { throw std::invalid_argument("ModelParams: " + m); };
    if (!(epsilon > 0.0) || !std::isfinite(epsilon)) fail("epsilon must be positive");
    if (!(dt > 0.0) || !std::isfinite(dt)) fail("dt must be positive");
    if (!(t_end >= 0.0) || !std::isfinite(t_end)) fail("t_end must be nonnegative");
    for (auto [name, v] : {std::pair{"chi", chi}, std::pair{"alpha", alpha}, std::pair{"beta", beta},
                           std::pair{"delta", delta}, std::pair{"nu", noise.nu},
                           std::pair{"sigma_amp", noise.sigma_amp}})
      if (!(v >= 0.0) || !std::isfinite(v)) fail(std::string(name) + " must be nonnegative");
    for (const auto* m : {&m1, &m2})
      if (!(m->value > 0.0) || !std::isfinite(m->value)) fail("mobility constants must be positive");
    if (potential.c_psi < 0.25) fail("c_psi must be at least 1/4 for the quartic potential");
    for (double qk : noise.q)
      if (!(qk >= 0.0)) fail("noise mode variances must be nonnegative");
    if (!(solver_tol > 0.0)) fail("solver tolerance must be positive");
    if (!std::isfinite(sigma_boundary_value)) fail("sigma boundary value must be finite");
  }
};

struct State {
  double t = 0.0;
  NodalField phi, mu, sigma;
};

class StepError : public std::runtime_error {
 public:
  StepError(const std::string& what, std::size_t step) : std::runtime_error(what), step_(step) {}
  std::size_t step() const { return step_; }

 private:
  std::size_t step_;
};

/// Linear system of one semi-implicit Euler-Maruyama step, before solving.
/// Unknowns are ordered [phi, mu, sigma].
struct StepSystem {
  SparseMatrix matrix;
  std::vector<double> rhs;
};

/// Operators that live as long as the grid: M, K and the shared pattern,
/// plus scratch for the weighted matrices frozen at the old time level.
class StepOperators {
  Q1Pattern pattern_;
  SparseMatrix mass_consistent_;
  SparseMatrix mass_;
  SparseMatrix stiffness_;

 public:
  StepOperators(const Grid& grid, const ModelParams& params)
      : pattern_(grid),
        mass_consistent_(assemble_mass(pattern_)),
        stiffness_(assemble_stiffness(pattern_)),
        solver_(params.solver, params.solver_tol, params.solver_max_iter),
        sub_solver_(params.solver, params.solver_tol, params.solver_max_iter) {
    if (params.lumped_mass) {
      mass_ = pattern_.zero_matrix();
      const auto lumped = lump(mass_consistent_);
      for (std::size_t i = 0; i < mass_.nrows; ++i) mass_.values[mass_.find(i, i)] = lumped.values[i];
    } else {
      mass_ = mass_consistent_;
    }
    km1_ = km2_ = mf_ = pattern_.zero_matrix();
    auto order = nested_dissection_positions(grid);
    solver_.set_node_ordering(order);
    sub_solver_.set_node_ordering(std::move(order));
  }

  const Grid& grid() const { return pattern_.grid(); }
  const Q1Pattern& pattern() const { return pattern_; }
  const SparseMatrix& mass() const { return mass_; }
  const SparseMatrix& consistent_mass() const { return mass_consistent_; }
  const SparseMatrix& stiffness() const { return stiffness_; }

  /// Applied to every assembled monolithic system before the solve. Used by
  /// the verification suite for negative controls; empty in normal runs.
  std::function<void(StepSystem&)> system_hook;

  // Weighted matrices K_m1(phi_n), K_m2(sigma_n), M_f(phi_n); rebuilt each step.
  SparseMatrix km1_, km2_, mf_;
  LinearSolver solver_;
  LinearSolver sub_solver_;
};

namespace detail {

struct BlockTerm {
  const SparseMatrix* matrix;
  double coeff;
};
using Block = std::vector<BlockTerm>;

/// Block matrix whose nonempty blocks share the N x N pattern `proto`.
/// layout[br][bc] lists the terms summed into block (br, bc).
inline SparseMatrix build_block(const SparseMatrix& proto, const std::vector<std::vector<Block>>& layout) {
  const std::size_t n = proto.nrows;
  const std::size_t nb_rows = layout.size();
  const std::size_t nb_cols = layout.front().size();
  SparseMatrix a;
  a.nrows = n * nb_rows;
  a.ncols = n * nb_cols;
  a.row_offsets.assign(a.nrows + 1, 0);
  std::size_t nnz = 0;
  for (const auto& row : layout)
    for (const auto& blk : row)
      if (!blk.empty()) nnz += proto.nnz();
  a.col_indices.reserve(nnz);
  a.values.reserve(nnz);
  for (std::size_t br = 0; br < nb_rows; ++br)
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t bc = 0; bc < nb_cols; ++bc) {
        const Block& blk = layout[br][bc];
        if (blk.empty()) continue;
        for (std::size_t k = proto.row_offsets[i]; k < proto.row_offsets[i + 1]; ++k) {
          double v = 0.0;
          for (const auto& term : blk) v += term.coeff * term.matrix->values[k];
          a.col_indices.push_back(bc * n + proto.col_indices[k]);
          a.values.push_back(v);
        }
      }
      a.row_offsets[br * n + i + 1] = a.values.size();
    }
  return a;
}

/// Replaces row `row` by the identity row (pattern kept, off-diagonals zeroed).
inline void set_identity_row(SparseMatrix& a, std::size_t row) {
  for (std::size_t k = a.row_offsets[row]; k < a.row_offsets[row + 1]; ++k)
    a.values[k] = a.col_indices[k] == row ? 1.0 : 0.0;
}

inline void require_finite(std::span<const double> v, const char* what, std::size_t step) {
  for (double x : v)
    if (!std::isfinite(x)) throw StepError(std::string("non-finite value in ") + what, step);
}

}  // namespace detail

inline std::vector<std::size_t> boundary_nodes(const Grid& grid) {
  std::vector<std::size_t> b;
  for (std::size_t id = 0; id < grid.num_nodes(); ++id)
    if (grid.is_boundary_node(id)) b.push_back(id);
  return b;
}

/// phi: nodal interpolant of the bump; sigma: zero, boundary set to the
/// Dirichlet value when configured; mu solves M mu = eps^2 K phi + M Psi'(phi).
inline State initialize(const Grid& grid, const ModelParams& params,
                        const std::function<double(double, double)>& phi0 = initial_phi0) {
  const std::size_t n = grid.num_nodes();
  State s;
  s.t = 0.0;
  s.phi.resize(n);
  for (std::size_t id = 0; id < n; ++id) {
    const auto p = grid.node_coord(id);
    s.phi[id] = phi0(p.x, p.y);
  }
  s.sigma.assign(n, 0.0);
  if (params.sigma_bc == SigmaBoundary::DirichletConstant)
    for (auto id : boundary_nodes(grid)) s.sigma[id] = params.sigma_boundary_value;

  const Q1Pattern pattern(grid);
  const auto mass = assemble_mass(pattern);
  const auto stiff = assemble_stiffness(pattern);
  std::vector<double> dpsi(n);
  for (std::size_t k = 0; k < n; ++k) dpsi[k] = psi_prime(s.phi[k], params.potential);
  auto rhs = spmv(mass, dpsi);
  spmv_add(stiff, params.epsilon * params.epsilon, s.phi, rhs);
  LinearSolver solver(params.solver == SolverKind::Gmres ? SolverKind::Gmres : SolverKind::SparseLU,
                      params.solver_tol, params.solver_max_iter);
  s.mu = solver.solve(mass, rhs);
  return s;
}

/// Raw Gaussian increments of one step, tumor modes then nutrient modes.
struct StepNoise {
  std::vector<double> xi_phi;
  std::vector<double> xi_sigma;
};

inline StepNoise draw_step_noise(RngStream& rng, std::size_t n, double dt) {
  StepNoise w;
  w.xi_phi = wiener_increment(rng, n, dt);
  w.xi_sigma = wiener_increment(rng, n, dt);
  return w;
}

/// Right-hand side pieces that depend only on the old state and the noise.
struct StepLoads {
  std::vector<double> phi, mu, sigma;
};

inline StepLoads step_loads(const State& s, StepOperators& ops, const ModelParams& p, const StepNoise& noise) {
  const Grid& g = ops.grid();
  const std::size_t n = g.num_nodes();
  const auto& mass = ops.mass();

  std::vector<double> fvals(n), m1vals(n), m2vals(n), psi_load(n);
  for (std::size_t k = 0; k < n; ++k) {
    fvals[k] = growth_f(s.phi[k], p.f);
    m1vals[k] = mobility(s.phi[k], p.m1);
    m2vals[k] = mobility(s.sigma[k], p.m2);
    psi_load[k] = p.potential_treatment == PotentialTreatment::ConvexSplit ? psi_expansive_prime(s.phi[k])
                                                                           : psi_prime(s.phi[k], p.potential);
  }
  assemble_weighted_stiffness(ops.pattern(), m1vals, ops.km1_);
  assemble_weighted_stiffness(ops.pattern(), m2vals, ops.km2_);
  assemble_weighted_mass(ops.pattern(), fvals, ops.mf_);

  StepLoads loads;
  // (1) M phi_n + dt (beta M_f sigma_n - alpha M f(phi_n)) + G1 dW1
  loads.phi = spmv(mass, s.phi);
  spmv_add(ops.mf_, p.dt * p.beta, s.sigma, loads.phi);
  spmv_add(mass, -p.dt * p.alpha, fvals, loads.phi);
  const auto nphi = noise_load_phi(g, mass, s.phi, p.noise, noise.xi_phi);
  for (std::size_t k = 0; k < n; ++k) loads.phi[k] += nphi[k];
  // (2) M Psi_e'(phi_n)
  loads.mu = spmv(mass, psi_load);
  // (3) M sigma_n - dt delta M_f sigma_n + G2 dW2
  loads.sigma = spmv(mass, s.sigma);
  spmv_add(ops.mf_, -p.dt * p.delta, s.sigma, loads.sigma);
  const auto nsig = noise_load_sigma(g, mass, p.noise, noise.xi_sigma);
  for (std::size_t k = 0; k < n; ++k) loads.sigma[k] += nsig[k];
  if (p.sigma_bc == SigmaBoundary::DirichletConstant)
    for (auto id : boundary_nodes(g)) loads.sigma[id] = p.sigma_boundary_value;
  return loads;
}

inline const SparseMatrix& cross_weight(const StepOperators& ops, const ModelParams& p) {
  return p.nutrient_cross_weight == NutrientCrossWeight::TumorMobility ? ops.km1_ : ops.km2_;
}

inline double implicit_potential_coeff(const ModelParams& p) {
  return p.potential_treatment == PotentialTreatment::ConvexSplit ? kContractiveCoeff : 0.0;
}

/// Assembles the monolithic 3N system:
///   M phi + dt K_m1 mu - dt chi K_m1 sigma            = loads.phi
///   -(eps^2 K + c M) phi + M mu                         = loads.mu
///   -dt chi K_w phi + (M + dt K_m2) sigma               = loads.sigma
/// where K_w is K_m1 or K_m2 per nutrient_cross_weight,
/// with Dirichlet sigma rows replaced by identity rows.
inline StepSystem build_step_system(const State& s, StepOperators& ops, const ModelParams& p,
                                    const StepNoise& noise) {
  const std::size_t n = ops.grid().num_nodes();
  auto loads = step_loads(s, ops, p, noise);
  const double eps2 = p.epsilon * p.epsilon;
  const double c = implicit_potential_coeff(p);
  using detail::Block;
  const auto* m = &ops.mass();
  const auto* k = &ops.stiffness();
  std::vector<std::vector<Block>> layout = {
      {Block{{m, 1.0}}, Block{{&ops.km1_, p.dt}}, Block{{&ops.km1_, -p.dt * p.chi}}},
      {Block{{k, -eps2}, {m, -c}}, Block{{m, 1.0}}, Block{}},
      {Block{{&cross_weight(ops, p), -p.dt * p.chi}}, Block{}, Block{{m, 1.0}, {&ops.km2_, p.dt}}},
  };
  StepSystem sys;
  sys.matrix = detail::build_block(ops.pattern().prototype(), layout);
  if (p.sigma_bc == SigmaBoundary::DirichletConstant)
    for (auto id : boundary_nodes(ops.grid())) detail::set_identity_row(sys.matrix, 2 * n + id);
  sys.rhs.resize(3 * n);
  std::copy(loads.phi.begin(), loads.phi.end(), sys.rhs.begin());
  std::copy(loads.mu.begin(), loads.mu.end(), sys.rhs.begin() + static_cast<std::ptrdiff_t>(n));
  std::copy(loads.sigma.begin(), loads.sigma.end(), sys.rhs.begin() + static_cast<std::ptrdiff_t>(2 * n));
  return sys;
}

namespace detail {

inline State decoupled_solve(const State& s, StepOperators& ops, const ModelParams& p, const StepNoise& noise,
                             std::size_t step_index) {
  const std::size_t n = ops.grid().num_nodes();
  const auto loads = step_loads(s, ops, p, noise);
  const double eps2 = p.epsilon * p.epsilon;
  const double c = implicit_potential_coeff(p);
  const auto* m = &ops.mass();
  const auto* k = &ops.stiffness();
  const auto& proto = ops.pattern().prototype();

  const auto a_pm = build_block(proto, {{Block{{m, 1.0}}, Block{{&ops.km1_, p.dt}}},
                                        {Block{{k, -eps2}, {m, -c}}, Block{{m, 1.0}}}});
  auto a_s = build_block(proto, {{Block{{m, 1.0}, {&ops.km2_, p.dt}}}});
  const auto bnodes = boundary_nodes(ops.grid());
  const bool dirichlet = p.sigma_bc == SigmaBoundary::DirichletConstant;
  if (dirichlet)
    for (auto id : bnodes) set_identity_row(a_s, id);

  State next = s;
  std::vector<double> rhs_pm(2 * n), rhs_s(n);
  for (std::size_t it = 0; it < p.decoupling_max_iter; ++it) {
    auto rhs_phi = loads.phi;
    spmv_add(ops.km1_, p.dt * p.chi, next.sigma, rhs_phi);
    std::copy(rhs_phi.begin(), rhs_phi.end(), rhs_pm.begin());
    std::copy(loads.mu.begin(), loads.mu.end(), rhs_pm.begin() + static_cast<std::ptrdiff_t>(n));
    std::vector<double> guess(2 * n);
    std::copy(next.phi.begin(), next.phi.end(), guess.begin());
    std::copy(next.mu.begin(), next.mu.end(), guess.begin() + static_cast<std::ptrdiff_t>(n));
    const auto z = ops.solver_.solve(a_pm, rhs_pm, guess);

    rhs_s = loads.sigma;
    std::vector<double> phi_new(z.begin(), z.begin() + static_cast<std::ptrdiff_t>(n));
    spmv_add(cross_weight(ops, p), p.dt * p.chi, phi_new, rhs_s);
    if (dirichlet)
      for (auto id : bnodes) rhs_s[id] = loads.sigma[id];
    const auto sig = ops.sub_solver_.solve(a_s, rhs_s, next.sigma);

    double change = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      change = std::max(change, std::abs(z[i] - next.phi[i]));
      change = std::max(change, std::abs(sig[i] - next.sigma[i]));
    }
    next.phi = std::move(phi_new);
    next.mu.assign(z.begin() + static_cast<std::ptrdiff_t>(n), z.end());
    next.sigma = sig;
    if (change <= p.decoupling_tol) return next;
  }
  throw StepError("decoupling iteration did not converge", step_index);
}

}  // namespace detail

/// One semi-implicit Euler-Maruyama step using pre-drawn increments.
inline State step_with_noise(const State& s, StepOperators& ops, const ModelParams& p, const StepNoise& noise,
                             std::size_t step_index = 0) {
  const std::size_t n = ops.grid().num_nodes();
  if (s.phi.size() != n || s.mu.size() != n || s.sigma.size() != n)
    throw DimensionError("step: state does not match grid");
  detail::require_finite(s.phi, "phi", step_index);
  detail::require_finite(s.mu, "mu", step_index);
  detail::require_finite(s.sigma, "sigma", step_index);

  State next;
  try {
    if (p.coupling == Coupling::Decoupled) {
      next = detail::decoupled_solve(s, ops, p, noise, step_index);
    } else {
      auto sys = build_step_system(s, ops, p, noise);
      if (ops.system_hook) ops.system_hook(sys);
      std::vector<double> guess(3 * n);
      std::copy(s.phi.begin(), s.phi.end(), guess.begin());
      std::copy(s.mu.begin(), s.mu.end(), guess.begin() + static_cast<std::ptrdiff_t>(n));
      std::copy(s.sigma.begin(), s.sigma.end(), guess.begin() + static_cast<std::ptrdiff_t>(2 * n));
      const auto z = ops.solver_.solve(sys.matrix, sys.rhs, guess);
      next.phi.assign(z.begin(), z.begin() + static_cast<std::ptrdiff_t>(n));
      next.mu.assign(z.begin() + static_cast<std::ptrdiff_t>(n), z.begin() + static_cast<std::ptrdiff_t>(2 * n));
      next.sigma.assign(z.begin() + static_cast<std::ptrdiff_t>(2 * n), z.end());
    }
  } catch (const NonConvergence& e) {
    throw StepError(std::string("step ") + std::to_string(step_index) + ": " + e.what(), step_index);
  }
  if (p.sigma_bc == SigmaBoundary::DirichletConstant)
    for (auto id : boundary_nodes(ops.grid())) next.sigma[id] = p.sigma_boundary_value;
  next.t = static_cast<double>(step_index + 1) * p.dt;
  detail::require_finite(next.phi, "phi", step_index + 1);
  detail::require_finite(next.mu, "mu", step_index + 1);
  detail::require_finite(next.sigma, "sigma", step_index + 1);
  return next;
}

/// Draws 2N normals from `rng` (tumor modes first) and advances one step.
inline State step(const State& s, StepOperators& ops, const ModelParams& p, RngStream& rng,
                  std::size_t step_index = 0, StepNoise* drawn = nullptr) {
  auto noise = draw_step_noise(rng, ops.grid().num_nodes(), p.dt);
  auto next = step_with_noise(s, ops, p, noise, step_index);
  if (drawn != nullptr) *drawn = std::move(noise);
  return next;
}

// ---------------------------------------------------------------------------
// Trajectories

/// Callbacks invoked by run_simulation. Any of them may be empty.
struct Observers {
  /// Every step including step 0, after the state is available.
  std::function<void(std::size_t step, const State&)> on_state;
  /// Raw increments consumed by step `step` (producing step+1).
  std::function<void(std::size_t step, const StepNoise&)> on_noise;
};

struct QoI {
  std::string name;
  std::function<double(const State&)> eval;
};

struct Trajectory {
  std::vector<double> times;
  std::vector<std::string> qoi_names;
  std::vector<std::vector<double>> values;  // [time][qoi]
  State final_state;
};

struct RunOptions {
  std::vector<QoI> qois;
  std::size_t qoi_every = 1;
};

inline Trajectory run_simulation(const Grid& grid, const ModelParams& params, std::uint64_t seed,
                                 const RunOptions& options, const Observers& observers = {},
                                 const std::optional<State>& initial = std::nullopt) {
  params.validate();
  StepOperators ops(grid, params);
  RngStream rng(seed);
  State s = initial ? *initial : initialize(grid, params);
  Trajectory tr;
  for (const auto& q : options.qois) tr.qoi_names.push_back(q.name);
  const std::size_t every = std::max<std::size_t>(1, options.qoi_every);
  const std::size_t steps = params.num_steps();

  auto record = [&](std::size_t n) {
    if (observers.on_state) observers.on_state(n, s);
    if (n % every != 0 && n != steps) return;
    tr.times.push_back(s.t);
    std::vector<double> row;
    row.reserve(options.qois.size());
    for (const auto& q : options.qois) row.push_back(q.eval(s));
    tr.values.push_back(std::move(row));
  };

  record(0);
  StepNoise drawn;
  for (std::size_t n = 0; n < steps; ++n) {
    s = step(s, ops, params, rng, n, observers.on_noise ? &drawn : nullptr);
    if (observers.on_noise) observers.on_noise(n, drawn);
    record(n + 1);
  }
  tr.final_state = std::move(s);
  return tr;
}

}  // namespace spde_tumor

#endif  // SPDE_TUMOR_STEPPER_HPP
