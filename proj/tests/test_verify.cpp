#include <gtest/gtest.h>

#include <sstream>

#include "spde_tumor/verify.hpp"

using namespace spde_tumor;

TEST(Verify, ElementOraclesPass) {
  const auto r = check_element_oracles();
  EXPECT_EQ(r.size(), 7u);
  for (const auto& c : r) EXPECT_TRUE(c.passed) << c.name << " " << c.measured;
}

TEST(Verify, YosidaPassesAndNegativeControlIsCaught) {
  const auto r = check_yosida();
  for (const auto& c : r) EXPECT_TRUE(c.passed) << c.name << " " << c.measured;
  // A resolvent at the wrong lambda must fail the residual check.
  const auto bad = check_yosida_with(
      [](double x, double lam) { return yosida_resolvent(x, 0.5 * lam); }, {1.0, 0.1}, 200, 1, "bad_");
  EXPECT_FALSE(all_passed(bad));
}

TEST(Verify, ConservationOnSmallGrid) {
  const auto r = check_conservation_dissipation({12}, 20);
  for (const auto& c : r) EXPECT_TRUE(c.passed) << c.name << " " << c.measured;
}

TEST(Verify, BrokenFluxSignIsDetected) {
  const Grid g(12, 12, 1.0, 1.0);
  const auto p = pure_cahn_hilliard_params();
  const auto rec = run_dissipation(g, p, smooth_random_field(g, 7), 20, break_flux_sign);
  EXPECT_GT(rec.max_energy_increase, 1e-10);
}

TEST(Verify, SmoothRandomFieldIsDeterministicWithPrescribedMean) {
  const Grid g(64, 64, 1.0, 1.0);
  const auto a = smooth_random_field(g, 3), b = smooth_random_field(g, 3), c = smooth_random_field(g, 4);
  EXPECT_EQ(a(0.3, 0.7), b(0.3, 0.7));
  EXPECT_NE(a(0.3, 0.7), c(0.3, 0.7));
  // Every cosine mode has zero mean on the unit square.
  std::vector<double> u(g.num_nodes());
  for (std::size_t id = 0; id < u.size(); ++id) {
    const auto p = g.node_coord(id);
    u[id] = a(p.x, p.y);
  }
  EXPECT_NEAR(field_integral(g, assemble_mass(g), u), 0.5, 1e-3);
}

TEST(Verify, ProlongationIsExactForBilinear) {
  const Grid coarse(4, 4, 1.0, 1.0), fine(16, 16, 1.0, 1.0);
  std::vector<double> u(coarse.num_nodes());
  for (std::size_t id = 0; id < u.size(); ++id) {
    const auto p = coarse.node_coord(id);
    u[id] = 1 + 2 * p.x - p.y + 3 * p.x * p.y;
  }
  const auto v = prolongate(coarse, fine, u);
  for (std::size_t id = 0; id < v.size(); ++id) {
    const auto p = fine.node_coord(id);
    EXPECT_NEAR(v[id], 1 + 2 * p.x - p.y + 3 * p.x * p.y, 1e-14);
  }
}

TEST(Verify, ReportTable) {
  std::vector<CheckReport> r = {bounded_check("a", 1.0, 2.0), bounded_check("b", 3.0, 2.0)};
  EXPECT_TRUE(r[0].passed);
  EXPECT_FALSE(r[1].passed);
  EXPECT_FALSE(all_passed(r));
  std::ostringstream os;
  print_report_table(os, r);
  EXPECT_NE(os.str().find("PASS"), std::string::npos);
  EXPECT_NE(os.str().find("FAIL"), std::string::npos);
  EXPECT_FALSE(bounded_check("nan", std::nan(""), 1.0).passed);
}
