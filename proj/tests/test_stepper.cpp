#include <gtest/gtest.h>

#include <array>
#include <cmath>

#include "spde_tumor/postproc.hpp"
#include "spde_tumor/stepper.hpp"
#include "spde_tumor/verify.hpp"

using namespace spde_tumor;

namespace {

// Dense reference for one step, built without the library's assembly, block
// or solver code: 3x3 Gauss quadrature, its own shape functions and Gaussian
// elimination with partial pivoting.
struct DenseRef {
  std::size_t nx, ny, n;
  double hx, hy;

  DenseRef(std::size_t nx_, std::size_t ny_)
      : nx(nx_), ny(ny_), n((nx_ + 1) * (ny_ + 1)), hx(1.0 / static_cast<double>(nx_)),
        hy(1.0 / static_cast<double>(ny_)) {}

  std::size_t id(std::size_t i, std::size_t j) const { return j * (nx + 1) + i; }

  bool boundary(std::size_t k) const {
    const std::size_t i = k % (nx + 1), j = k / (nx + 1);
    return i == 0 || j == 0 || i == nx || j == ny;
  }

  // stiff = false: mass. w: nodal weight, empty for 1.
  std::vector<double> assemble(bool stiff, const std::vector<double>& w = {}) const {
    const std::array<double, 3> gp = {0.5 - 0.5 * std::sqrt(0.6), 0.5, 0.5 + 0.5 * std::sqrt(0.6)};
    const std::array<double, 3> gw = {5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0};
    std::vector<double> out(n * n, 0.0);
    for (std::size_t ey = 0; ey < ny; ++ey)
      for (std::size_t ex = 0; ex < nx; ++ex)
        for (int qa = 0; qa < 3; ++qa)
          for (int qb = 0; qb < 3; ++qb) {
            const double s = gp[qa], t = gp[qb], wq = gw[qa] * gw[qb] * hx * hy;
            std::array<std::size_t, 4> node;
            std::array<double, 4> v, gx, gy;
            for (int c = 0; c < 4; ++c) {
              const int di = c % 2, dj = c / 2;
              node[c] = id(ex + di, ey + dj);
              const double fs = di ? s : 1 - s, ft = dj ? t : 1 - t;
              v[c] = fs * ft;
              gx[c] = (di ? 1.0 : -1.0) / hx * ft;
              gy[c] = fs * (dj ? 1.0 : -1.0) / hy;
            }
            double weight = 1.0;
            if (!w.empty()) {
              weight = 0.0;
              for (int c = 0; c < 4; ++c) weight += w[node[c]] * v[c];
            }
            for (int a = 0; a < 4; ++a)
              for (int b = 0; b < 4; ++b) {
                const double val = stiff ? gx[a] * gx[b] + gy[a] * gy[b] : v[a] * v[b];
                out[node[a] * n + node[b]] += wq * weight * val;
              }
          }
    return out;
  }

  std::vector<double> mul(const std::vector<double>& a, const std::vector<double>& x) const {
    std::vector<double> y(n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) y[i] += a[i * n + j] * x[j];
    return y;
  }

  static std::vector<double> gauss_solve(std::vector<double> a, std::vector<double> b) {
    const std::size_t m = b.size();
    for (std::size_t c = 0; c < m; ++c) {
      std::size_t p = c;
      for (std::size_t r = c + 1; r < m; ++r)
        if (std::abs(a[r * m + c]) > std::abs(a[p * m + c])) p = r;
      if (p != c) {
        for (std::size_t k = 0; k < m; ++k) std::swap(a[c * m + k], a[p * m + k]);
        std::swap(b[c], b[p]);
      }
      for (std::size_t r = c + 1; r < m; ++r) {
        const double f = a[r * m + c] / a[c * m + c];
        for (std::size_t k = c; k < m; ++k) a[r * m + k] -= f * a[c * m + k];
        b[r] -= f * b[c];
      }
    }
    std::vector<double> x(m);
    for (std::size_t r = m; r-- > 0;) {
      double s = b[r];
      for (std::size_t k = r + 1; k < m; ++k) s -= a[r * m + k] * x[k];
      x[r] = s / a[r * m + r];
    }
    return x;
  }

  State step(const State& s, const ModelParams& p, const StepNoise& w) const {
    auto f = [](double x) { const double y = std::clamp(x, 0.0, 1.0); return y * (1 - y); };
    auto m1 = [](double x) { const double q = (x >= 0 && x <= 1) ? x * x * (1 - x) * (1 - x) : 0.0; return 1e-16 + q; };
    std::vector<double> fv(n), m1v(n), m2v(n, 10.0), dpsi(n), g1(n), g2(n);
    for (std::size_t k = 0; k < n; ++k) {
      const double x = s.phi[k];
      fv[k] = f(x);
      m1v[k] = m1(x);
      dpsi[k] = x * x * x - 1.5 * x * x - 0.25 * x;
      g1[k] = p.noise.nu * f(x) * w.xi_phi[k];
      g2[k] = p.noise.sigma_amp * w.xi_sigma[k];
    }
    const auto mm = assemble(false), kk = assemble(true), km1 = assemble(true, m1v), km2 = assemble(true, m2v),
               mf = assemble(false, fv);
    const auto& kw = p.nutrient_cross_weight == NutrientCrossWeight::TumorMobility ? km1 : km2;
    const double dt = p.dt, chi = p.chi, e2 = p.epsilon * p.epsilon;
    const std::size_t m = 3 * n;
    std::vector<double> a(m * m, 0.0), b(m, 0.0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        const std::size_t ij = i * n + j;
        a[i * m + j] = mm[ij];
        a[i * m + n + j] = dt * km1[ij];
        a[i * m + 2 * n + j] = -dt * chi * km1[ij];
        a[(n + i) * m + j] = -e2 * kk[ij] - 0.75 * mm[ij];
        a[(n + i) * m + n + j] = mm[ij];
        a[(2 * n + i) * m + j] = -dt * chi * kw[ij];
        a[(2 * n + i) * m + 2 * n + j] = mm[ij] + dt * km2[ij];
      }
    const auto mphi = mul(mm, s.phi), mfs = mul(mf, s.sigma), mf_ = mul(mm, fv), mpsi = mul(mm, dpsi),
               msig = mul(mm, s.sigma), mg1 = mul(mm, g1), mg2 = mul(mm, g2);
    for (std::size_t i = 0; i < n; ++i) {
      b[i] = mphi[i] + dt * (p.beta * mfs[i] - p.alpha * mf_[i]) + mg1[i];
      b[n + i] = mpsi[i];
      b[2 * n + i] = msig[i] - dt * p.delta * mfs[i] + mg2[i];
      if (boundary(i)) {
        for (std::size_t j = 0; j < m; ++j) a[(2 * n + i) * m + j] = 0.0;
        a[(2 * n + i) * m + 2 * n + i] = 1.0;
        b[2 * n + i] = 1.0;
      }
    }
    const auto z = gauss_solve(a, b);
    State out;
    out.phi.assign(z.begin(), z.begin() + static_cast<std::ptrdiff_t>(n));
    out.mu.assign(z.begin() + static_cast<std::ptrdiff_t>(n), z.begin() + static_cast<std::ptrdiff_t>(2 * n));
    out.sigma.assign(z.begin() + static_cast<std::ptrdiff_t>(2 * n), z.end());
    return out;
  }
};

State random_state(const Grid& g, std::uint64_t seed) {
  RngStream rng(seed);
  State s;
  for (std::size_t k = 0; k < g.num_nodes(); ++k) {
    s.phi.push_back(-0.1 + 1.2 * rng.uniform());
    s.mu.push_back(rng.normal());
    s.sigma.push_back(rng.uniform());
  }
  for (auto id : boundary_nodes(g)) s.sigma[id] = 1.0;
  return s;
}

StepNoise random_noise(std::size_t n, std::uint64_t seed, double dt) {
  RngStream rng(seed);
  return draw_step_noise(rng, n, dt);
}

StepNoise zero_noise(std::size_t n) { return {std::vector<double>(n, 0.0), std::vector<double>(n, 0.0)}; }

}  // namespace

TEST(Step, MatchesDenseReference) {
  const Grid g(4, 4, 1.0, 1.0);
  const DenseRef ref(4, 4);
  for (auto cross : {NutrientCrossWeight::TumorMobility, NutrientCrossWeight::NutrientMobility}) {
    ModelParams p;
    p.nutrient_cross_weight = cross;
    p.noise.nu = 2.5;
    const auto s = random_state(g, 31);
    const auto w = random_noise(g.num_nodes(), 32, p.dt);
    StepOperators ops(g, p);
    const auto got = step_with_noise(s, ops, p, w, 0);
    const auto want = ref.step(s, p, w);
    for (std::size_t k = 0; k < g.num_nodes(); ++k) {
      EXPECT_NEAR(got.phi[k], want.phi[k], 1e-10);
      EXPECT_NEAR(got.mu[k], want.mu[k], 1e-10);
      EXPECT_NEAR(got.sigma[k], want.sigma[k], 1e-10);
    }
  }
}

TEST(Step, GmresAndDenseLuAgreeWithSparseLu) {
  const Grid g(6, 6, 1.0, 1.0);
  ModelParams p;
  const auto s = random_state(g, 4);
  const auto w = random_noise(g.num_nodes(), 5, p.dt);
  StepOperators o1(g, p);
  const auto a = step_with_noise(s, o1, p, w);
  for (auto kind : {SolverKind::Gmres, SolverKind::DenseLU}) {
    ModelParams q = p;
    q.solver = kind;
    q.solver_tol = 1e-13;
    StepOperators o2(g, q);
    const auto b = step_with_noise(s, o2, q, w);
    for (std::size_t k = 0; k < g.num_nodes(); ++k) EXPECT_NEAR(a.phi[k], b.phi[k], 1e-8) << to_string(kind);
  }
}

TEST(Step, ZeroStateIsFixedPoint) {
  const Grid g(5, 5, 1.0, 1.0);
  ModelParams p;
  p.noise.nu = 0.0;
  p.noise.sigma_amp = 0.0;
  p.alpha = 0.0;
  p.sigma_bc = SigmaBoundary::NeumannZero;
  const std::size_t n = g.num_nodes();
  State s{0.0, std::vector<double>(n, 0.0), std::vector<double>(n, 0.0), std::vector<double>(n, 0.0)};
  StepOperators ops(g, p);
  const auto next = step_with_noise(s, ops, p, zero_noise(n));
  for (std::size_t k = 0; k < n; ++k) {
    EXPECT_EQ(next.phi[k], 0.0);
    EXPECT_EQ(next.mu[k], 0.0);
    EXPECT_EQ(next.sigma[k], 0.0);
  }
  EXPECT_DOUBLE_EQ(next.t, p.dt);
}

TEST(Step, ConstantStateIsEquilibriumOfPureCahnHilliard) {
  const Grid g(6, 6, 1.0, 1.0);
  const auto p = pure_cahn_hilliard_params();
  const std::size_t n = g.num_nodes();
  const double c = 0.3;
  State s = initialize(g, p, [c](double, double) { return c; });
  StepOperators ops(g, p);
  for (int it = 0; it < 3; ++it) s = step_with_noise(s, ops, p, zero_noise(n), it);
  for (std::size_t k = 0; k < n; ++k) {
    EXPECT_NEAR(s.phi[k], c, 1e-13);
    EXPECT_NEAR(s.mu[k], psi_prime(c), 1e-12);
  }
}

TEST(Step, DirichletRowsHoldExactly) {
  const Grid g(8, 8, 1.0, 1.0);
  ModelParams p;
  p.sigma_boundary_value = 0.8;
  p.noise.nu = 1.0;
  StepOperators ops(g, p);
  RngStream rng(9);
  State s = initialize(g, p);
  for (std::size_t n = 0; n < 3; ++n) {
    s = step(s, ops, p, rng, n);
    for (auto id : boundary_nodes(g)) EXPECT_EQ(s.sigma[id], 0.8);
  }
}

TEST(Step, RejectsNonFiniteState) {
  const Grid g(3, 3, 1.0, 1.0);
  ModelParams p;
  StepOperators ops(g, p);
  State s = initialize(g, p);
  s.phi[4] = std::nan("");
  try {
    step_with_noise(s, ops, p, zero_noise(g.num_nodes()), 17);
    FAIL() << "expected StepError";
  } catch (const StepError& e) {
    EXPECT_EQ(e.step(), 17u);
  }
}

TEST(Step, RejectsMismatchedState) {
  const Grid g(3, 3, 1.0, 1.0);
  ModelParams p;
  StepOperators ops(g, p);
  State s = initialize(Grid(2, 2, 1.0, 1.0), p);
  EXPECT_THROW(step_with_noise(s, ops, p, zero_noise(g.num_nodes())), DimensionError);
}

TEST(Step, DecoupledIterationMatchesMonolithic) {
  const Grid g(8, 8, 1.0, 1.0);
  ModelParams p;
  p.chi = 0.5;
  const auto s = initialize(g, p);
  const auto w = random_noise(g.num_nodes(), 2, p.dt);
  StepOperators o1(g, p);
  const auto a = step_with_noise(s, o1, p, w);
  ModelParams q = p;
  q.coupling = Coupling::Decoupled;
  StepOperators o2(g, q);
  const auto b = step_with_noise(s, o2, q, w);
  for (std::size_t k = 0; k < g.num_nodes(); ++k) {
    EXPECT_NEAR(a.phi[k], b.phi[k], 1e-7);
    EXPECT_NEAR(a.sigma[k], b.sigma[k], 1e-7);
  }
}

TEST(Initialize, BumpAndNutrient) {
  const Grid g(10, 10, 1.0, 1.0);
  ModelParams p;
  const auto s = initialize(g, p);
  EXPECT_DOUBLE_EQ(s.phi[g.node_id(5, 5)], 1.0);
  for (std::size_t id = 0; id < g.num_nodes(); ++id) EXPECT_EQ(s.sigma[id], g.is_boundary_node(id) ? 1.0 : 0.0);
  // M mu = eps^2 K phi + M Psi'(phi)
  const auto m = assemble_mass(g), k = assemble_stiffness(g);
  auto lhs = spmv(m, s.mu);
  std::vector<double> dpsi(g.num_nodes());
  for (std::size_t i = 0; i < dpsi.size(); ++i) dpsi[i] = psi_prime(s.phi[i]);
  auto rhs = spmv(m, dpsi);
  spmv_add(k, p.epsilon * p.epsilon, s.phi, rhs);
  for (std::size_t i = 0; i < lhs.size(); ++i) EXPECT_NEAR(lhs[i], rhs[i], 1e-12);
}

TEST(Initialize, VolumeMatchesQuadratureOracle) {
  const Grid g(100, 100, 1.0, 1.0);
  const auto s = initialize(g, ModelParams{});
  const double oracle = 0.0792570100704747550591;
  EXPECT_NEAR(field_integral(g, assemble_mass(g), s.phi), oracle, 1e-3);
}

TEST(Run, ZeroEndTimeEmitsInitialOnly) {
  const Grid g(4, 4, 1.0, 1.0);
  ModelParams p;
  p.t_end = 0.0;
  RunOptions ro;
  ro.qois = {{"phi_sum", [](const State& s) { double t = 0; for (double v : s.phi) t += v; return t; }}};
  const auto tr = run_simulation(g, p, 1, ro);
  ASSERT_EQ(tr.times.size(), 1u);
  EXPECT_EQ(tr.times[0], 0.0);
}

TEST(Run, SameSeedBitwiseIdentical) {
  const Grid g(8, 8, 1.0, 1.0);
  ModelParams p;
  p.t_end = 0.05;
  p.noise.nu = 1.0;
  RunOptions ro;
  ro.qois = {{"tumor", [](const State& s) { return s.phi[40]; }}};
  const auto a = run_simulation(g, p, 77, ro), b = run_simulation(g, p, 77, ro);
  EXPECT_EQ(a.values, b.values);
  EXPECT_EQ(a.final_state.phi, b.final_state.phi);
  const auto c = run_simulation(g, p, 78, ro);
  EXPECT_NE(a.final_state.phi, c.final_state.phi);
}

TEST(Run, QoiCadence) {
  const Grid g(4, 4, 1.0, 1.0);
  ModelParams p;
  p.t_end = 0.1;
  RunOptions ro;
  ro.qoi_every = 3;
  const auto tr = run_simulation(g, p, 1, ro);
  const std::vector<double> want = {0.0, 0.03, 0.06, 0.09, 0.1};
  ASSERT_EQ(tr.times.size(), want.size());
  for (std::size_t i = 0; i < want.size(); ++i) EXPECT_NEAR(tr.times[i], want[i], 1e-14);
}

TEST(Run, DeterministicReflectionSymmetry) {
  const Grid g(24, 24, 1.0, 1.0);
  ModelParams p;
  p.noise.nu = 0.0;
  p.noise.sigma_amp = 0.0;
  p.t_end = 0.1;
  double worst = 0.0;
  Observers obs;
  obs.on_state = [&](std::size_t, const State& s) {
    for (std::size_t j = 0; j <= 24; ++j)
      for (std::size_t i = 0; i <= 24; ++i)
        worst = std::max(worst, std::abs(s.phi[g.node_id(i, j)] - s.phi[g.node_id(j, i)]));
  };
  run_simulation(g, p, 0, RunOptions{}, obs);
  EXPECT_LE(worst, 1e-6);
}

TEST(Run, StepErrorCarriesIndex) {
  const Grid g(4, 4, 1.0, 1.0);
  ModelParams p;
  p.t_end = 0.05;
  Observers obs;
  State bad = initialize(g, p);
  bad.mu[3] = std::numeric_limits<double>::infinity();
  EXPECT_THROW(run_simulation(g, p, 0, RunOptions{}, obs, bad), StepError);
}

TEST(Params, Validation) {
  ModelParams p;
  EXPECT_NO_THROW(p.validate());
  p.dt = -0.01;
  EXPECT_THROW(p.validate(), std::invalid_argument);
  p = ModelParams{};
  p.chi = -1.0;
  EXPECT_THROW(p.validate(), std::invalid_argument);
  p = ModelParams{};
  p.epsilon = 0.0;
  EXPECT_THROW(p.validate(), std::invalid_argument);
  p = ModelParams{};
  p.potential.c_psi = 0.1;
  EXPECT_THROW(p.validate(), std::invalid_argument);
  EXPECT_EQ(ModelParams{}.num_steps(), 100u);
}
