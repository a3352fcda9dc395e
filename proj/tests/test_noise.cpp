#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "spde_tumor/assembly.hpp"
#include "spde_tumor/noise.hpp"

using namespace spde_tumor;

TEST(Seeds, DistinctAndDeterministic) {
  for (std::uint64_t s : {0ull, 1ull, 42ull, 0xFFFFFFFFFFFFFFFFull}) EXPECT_NE(derive_sample_seed(s, 0), derive_sample_seed(s, 1));
  EXPECT_EQ(derive_sample_seed(7, 3), derive_sample_seed(7, 3));
}

TEST(Seeds, NoCollisions) {
  std::set<std::uint64_t> seen;
  for (std::uint64_t i = 0; i < 10000; ++i) seen.insert(derive_sample_seed(2024, i));
  EXPECT_EQ(seen.size(), 10000u);
}

TEST(Seeds, DocumentedFormula) {
  const std::uint64_t base = 99, idx = 4;
  EXPECT_EQ(derive_sample_seed(base, idx), splitmix64_mix(base ^ ((idx + 1) * 0x9E3779B97F4A7C15ULL)));
}

TEST(NormalQuantile, KnownValues) {
  EXPECT_NEAR(normal_quantile(0.5), 0.0, 1e-15);
  EXPECT_NEAR(normal_quantile(0.975), 1.959963984540054, 1e-14);
  EXPECT_NEAR(normal_quantile(0.025), -1.959963984540054, 1e-14);
  EXPECT_NEAR(normal_quantile(1e-10), -6.361340902404056, 1e-12);
}

TEST(Wiener, FixedSeedReproducible) {
  RngStream a(5), b(5);
  EXPECT_EQ(wiener_increment(a, 1000, 0.01), wiener_increment(b, 1000, 0.01));
  EXPECT_EQ(a.position(), 1000u);
}

TEST(Wiener, MeanWithinClt) {
  const std::size_t n = 100000;
  const double dt = 0.01;
  RngStream rng(77);
  const auto xi = wiener_increment(rng, n, dt);
  double mean = 0;
  for (double v : xi) mean += v;
  mean /= static_cast<double>(n);
  EXPECT_LE(std::abs(mean), 4.0 * std::sqrt(dt / static_cast<double>(n)));
}

TEST(Wiener, StdScalesWithSqrtDt) {
  const std::size_t n = 100000;
  auto sample_std = [&](double dt, std::uint64_t seed) {
    RngStream rng(seed);
    const auto xi = wiener_increment(rng, n, dt);
    double m = 0, s = 0;
    for (double v : xi) m += v;
    m /= static_cast<double>(n);
    for (double v : xi) s += (v - m) * (v - m);
    return std::sqrt(s / static_cast<double>(n - 1));
  };
  const double r = sample_std(4e-4, 1) / sample_std(1e-4, 2);
  // Relative std error of a sample std is 1/sqrt(2n); the ratio has twice the variance.
  EXPECT_NEAR(r, 2.0, 2.0 * 3.0 * std::sqrt(2.0 / (2.0 * n)));
}

TEST(Wiener, RejectsBadDt) {
  RngStream rng(1);
  EXPECT_THROW(wiener_increment(rng, 3, 0.0), std::invalid_argument);
}

TEST(NoiseLoad, VanishingCases) {
  const Grid g(3, 3, 1.0, 1.0);
  const auto m = assemble_mass(g);
  const std::size_t n = g.num_nodes();
  std::vector<double> xi(n, 0.3), half(n, 0.5), one(n, 1.0), zero(n, 0.0);
  NoiseSpec s;
  s.nu = 0.0;
  for (double v : noise_load_phi(g, m, half, s, xi)) EXPECT_EQ(v, 0.0);
  s.nu = 2.0;
  for (double v : noise_load_phi(g, m, one, s, xi)) EXPECT_EQ(v, 0.0);
  for (double v : noise_load_phi(g, m, zero, s, xi)) EXPECT_EQ(v, 0.0);
  s.sigma_amp = 0.0;
  for (double v : noise_load_sigma(g, m, s, xi)) EXPECT_EQ(v, 0.0);
  s.sigma_amp = 1.0;
  s.q.assign(n, 0.0);
  for (double v : noise_load_sigma(g, m, s, xi)) EXPECT_EQ(v, 0.0);
}

TEST(NoiseLoad, DirectFormulas) {
  const Grid g(4, 2, 1.0, 1.0);
  const auto m = assemble_mass(g);
  const std::size_t n = g.num_nodes();
  RngStream rng(3);
  std::vector<double> xi(n), half(n, 0.5);
  for (auto& v : xi) v = rng.normal();
  NoiseSpec s;
  s.nu = 1.7;
  s.sigma_amp = 0.4;
  s.mass_project = false;
  const auto a = noise_load_phi(g, m, half, s, xi);
  const auto b = noise_load_sigma(g, m, s, xi);
  for (std::size_t k = 0; k < n; ++k) {
    EXPECT_DOUBLE_EQ(a[k], 0.25 * 1.7 * xi[k]);
    EXPECT_DOUBLE_EQ(b[k], 0.4 * xi[k]);
  }
  s.mass_project = true;
  const auto pb = noise_load_sigma(g, m, s, xi);
  const auto mb = spmv(m, b);
  for (std::size_t k = 0; k < n; ++k) EXPECT_NEAR(pb[k], mb[k], 1e-15);
}

TEST(NoiseLoad, LengthMismatch) {
  const Grid g(2, 2, 1.0, 1.0);
  const auto m = assemble_mass(g);
  NoiseSpec s;
  EXPECT_THROW(noise_load_sigma(g, m, s, std::vector<double>(4, 0.0)), DimensionError);
  EXPECT_THROW(noise_load_phi(g, m, std::vector<double>(9, 0.5), s, std::vector<double>(4, 0.0)), DimensionError);
}

TEST(CosineModes, ConstantModeIsUniform) {
  const Grid g(6, 6, 1.0, 1.0);
  NoiseSpec s;
  s.modes = NoiseModes::Cosine;
  std::vector<double> xi(g.num_nodes(), 0.0);
  xi[0] = 1.0;  // (j, k) = (0, 0)
  const auto f = wiener_field(g, s, xi);
  for (double v : f) EXPECT_NEAR(v, f.front(), 1e-14);
}
