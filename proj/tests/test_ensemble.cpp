#include <gtest/gtest.h>

#include <cmath>

#include "spde_tumor/ensemble.hpp"

using namespace spde_tumor;

namespace {

ModelParams small_params() {
  ModelParams p;
  p.t_end = 0.05;
  return p;
}

}  // namespace

TEST(Ensemble, DeterministicModelHasZeroSpread) {
  const Grid g(8, 8, 1.0, 1.0);
  auto p = small_params();
  p.noise.nu = 0.0;
  p.noise.sigma_amp = 0.0;
  const auto r = run_ensemble(g, p, 3, 5);
  for (const auto& row : r.std)
    for (double s : row) EXPECT_EQ(s, 0.0);
}

TEST(Ensemble, ForcedSameSeedHasZeroSpread) {
  const Grid g(8, 8, 1.0, 1.0);
  EnsembleOptions o;
  o.force_same_seed = true;
  const auto r = run_ensemble(g, small_params(), 3, 5, o);
  for (const auto& row : r.std)
    for (double s : row) EXPECT_EQ(s, 0.0);
}

TEST(Ensemble, StatisticsMatchRecomputation) {
  const Grid g(8, 8, 1.0, 1.0);
  const auto r = run_ensemble(g, small_params(), 4, 9);
  EXPECT_EQ(r.num_samples(), 4u);
  const std::size_t q = r.qoi_index("tumor_volume");
  for (std::size_t t = 0; t < r.times.size(); ++t) {
    double m = 0.0;
    for (std::size_t s = 0; s < 4; ++s) m += r.sample(s, t, q);
    m /= 4.0;
    double v = 0.0;
    for (std::size_t s = 0; s < 4; ++s) v += (r.sample(s, t, q) - m) * (r.sample(s, t, q) - m);
    EXPECT_NEAR(r.mean[t][q], m, 1e-15);
    EXPECT_NEAR(r.std[t][q], std::sqrt(v / 3.0), 1e-15);
  }
  // Noise spreads the samples after the first step.
  EXPECT_GT(r.std.back()[q], 0.0);
  EXPECT_EQ(r.std.front()[q], 0.0);
  EXPECT_THROW(r.qoi_index("nope"), std::out_of_range);
}

TEST(Ensemble, SeedsFollowDerivation) {
  const Grid g(4, 4, 1.0, 1.0);
  const auto r = run_ensemble(g, small_params(), 3, 42);
  for (std::size_t s = 0; s < 3; ++s) EXPECT_EQ(r.seeds[s], derive_sample_seed(42, s));
}

TEST(Ensemble, ThreadCountDoesNotChangeResults) {
  const Grid g(8, 8, 1.0, 1.0);
  EnsembleOptions one, four;
  one.threads = 1;
  four.threads = 4;
  const auto a = run_ensemble(g, small_params(), 5, 3, one);
  const auto b = run_ensemble(g, small_params(), 5, 3, four);
  EXPECT_EQ(a.samples, b.samples);
  EXPECT_EQ(a.mean, b.mean);
  EXPECT_EQ(a.std, b.std);
}

TEST(Ensemble, RejectsTooFewSamples) {
  const Grid g(4, 4, 1.0, 1.0);
  EXPECT_THROW(run_ensemble(g, small_params(), 1, 0), std::invalid_argument);
}

TEST(Ensemble, FailureCarriesSampleIndex) {
  const Grid g(4, 4, 1.0, 1.0);
  auto p = small_params();
  p.solver = SolverKind::Gmres;
  p.solver_max_iter = 1;
  p.solver_tol = 1e-300;
  try {
    run_ensemble(g, p, 2, 0);
    FAIL() << "expected EnsembleError";
  } catch (const EnsembleError& e) {
    EXPECT_EQ(e.sample(), 0u);
    EXPECT_NE(std::string(e.what()).find("sample 0"), std::string::npos);
  }
}

TEST(ParallelFor, RethrowsLowestIndex) {
  try {
    parallel_for_samples(6, 3, [](std::size_t i) {
      if (i == 2 || i == 4) throw std::runtime_error(std::to_string(i));
    });
    FAIL();
  } catch (const std::runtime_error& e) {
    EXPECT_STREQ(e.what(), "2");
  }
}

TEST(Sweep, SharesNoiseAcrossMembers) {
  const Grid g(8, 8, 1.0, 1.0);
  const auto m = run_seed_sweep(g, small_params(), {0.0, 0.5, 2.5}, 11);
  ASSERT_EQ(m.size(), 3u);
  EXPECT_EQ(m[0].noise_hash, m[1].noise_hash);
  EXPECT_EQ(m[0].noise_hash, m[2].noise_hash);
  EXPECT_NE(m[0].trajectory.final_state.phi, m[2].trajectory.final_state.phi);
}

TEST(Sweep, EqualLevelsGiveIdenticalTrajectories) {
  const Grid g(8, 8, 1.0, 1.0);
  const auto m = run_seed_sweep(g, small_params(), {0.5, 0.5}, 11);
  EXPECT_EQ(m[0].trajectory.values, m[1].trajectory.values);
  EXPECT_EQ(m[0].trajectory.final_state.phi, m[1].trajectory.final_state.phi);
}

TEST(Sweep, DeterministicMemberIgnoresSeed) {
  const Grid g(8, 8, 1.0, 1.0);
  auto p = small_params();
  p.noise.sigma_amp = 0.0;
  const auto a = run_seed_sweep(g, p, {0.0}, 1);
  const auto b = run_seed_sweep(g, p, {0.0}, 2);
  EXPECT_EQ(a[0].trajectory.final_state.phi, b[0].trajectory.final_state.phi);
  EXPECT_NE(a[0].noise_hash, b[0].noise_hash);
}

TEST(Sweep, Snapshots) {
  const Grid g(4, 4, 1.0, 1.0);
  SweepOptions o;
  o.snapshot_times = {0.0, 0.03};
  const auto m = run_seed_sweep(g, small_params(), {1.0}, 1, o);
  ASSERT_EQ(m[0].snapshots.size(), 2u);
  EXPECT_NEAR(m[0].snapshot_times[1], 0.03, 1e-14);
  EXPECT_THROW(run_seed_sweep(g, small_params(), {}, 1), std::invalid_argument);
}

TEST(BitHash, SensitiveToEveryBit) {
  BitHash a, b, c;
  a.add(std::vector<double>{1.0, 2.0});
  b.add(std::vector<double>{1.0, 2.0});
  c.add(std::vector<double>{1.0, std::nextafter(2.0, 3.0)});
  EXPECT_EQ(a.value(), b.value());
  EXPECT_NE(a.value(), c.value());
}
