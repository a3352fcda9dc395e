#include <gtest/gtest.h>

#include "spde_tumor/config.hpp"

using namespace spde_tumor;

TEST(Config, EmptyGivesDefaults) {
  const auto c = parse_config_text("");
  const auto& p = c.params;
  EXPECT_EQ(p.epsilon, 0.01);
  EXPECT_EQ(p.chi, 5.0);
  EXPECT_EQ(p.alpha, 1.0);
  EXPECT_EQ(p.beta, 15.0);
  EXPECT_EQ(p.delta, 100.0);
  EXPECT_EQ(p.m2.value, 10.0);
  EXPECT_EQ(p.m1.kind, MobilityKind::QuarticInterface);
  EXPECT_EQ(p.noise.nu, 0.5);
  EXPECT_EQ(p.noise.sigma_amp, 1.0);
  EXPECT_EQ(p.dt, 0.01);
  EXPECT_EQ(p.t_end, 1.0);
  EXPECT_EQ(c.nx, 100u);
  EXPECT_EQ(c.samples, 50u);
  EXPECT_NO_THROW(validate(c));
  EXPECT_EQ(config_echo(c), config_echo(parse_config_text("{}")));
}

TEST(Config, Overrides) {
  const auto c = parse_config_text(R"({"noise": {"nu": 0}, "grid.nx": 32, "sigma_bc": {"kind": "neumann"},
                                       "solver": {"kind": "gmres"}, "scheme.cross_weight": "nutrient_mobility"})");
  EXPECT_EQ(c.params.noise.nu, 0.0);
  EXPECT_EQ(c.nx, 32u);
  EXPECT_EQ(c.params.sigma_bc, SigmaBoundary::NeumannZero);
  EXPECT_EQ(c.params.solver, SolverKind::Gmres);
  EXPECT_EQ(c.params.nutrient_cross_weight, NutrientCrossWeight::NutrientMobility);
}

TEST(Config, ValidationErrors) {
  EXPECT_THROW(validate(parse_config_text(R"({"dt": -0.01})")), ConfigError);
  EXPECT_THROW(validate(parse_config_text(R"({"grid.nx": 0})")), ConfigError);
  EXPECT_THROW(validate(parse_config_text(R"({"snapshot_times": [2.0]})")), ConfigError);
  EXPECT_THROW(validate(parse_config_text(R"({"run_name": "../x"})")), ConfigError);
  auto c = parse_config_text(R"({"mode": "ensemble", "samples": 1})");
  EXPECT_THROW(validate(c), ConfigError);
}

TEST(Config, RejectsUnknownKeysAndBadValues) {
  try {
    parse_config_text(R"({"bogus": 1})");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("bogus"), std::string::npos);
  }
  EXPECT_THROW(parse_config_text(R"({"dt": "fast"})"), ConfigError);
  EXPECT_THROW(parse_config_text(R"({"solver.kind": "magic"})"), ConfigError);
  EXPECT_THROW(parse_config_text("[1, 2]"), ConfigError);
}

TEST(Config, ParseErrorNamesLine) {
  try {
    parse_config_text("{\n  \"dt\": ,\n}");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
  }
}

TEST(Config, EchoRoundTrip) {
  auto c = parse_config_text(R"({"epsilon": 0.02, "noise.nu": 2.5, "snapshot_times": [0.1, 0.5],
                                 "sweep.nu": [0, 1], "seed": 123456789012, "threads": 8, "out": "/tmp/x"})");
  const auto echo = config_echo(c);
  const auto back = parse_config_text(echo);
  EXPECT_EQ(config_echo(back), echo);
  EXPECT_EQ(back.params.epsilon, 0.02);
  EXPECT_EQ(back.seed, 123456789012u);
  EXPECT_EQ(back.snapshot_times, (std::vector<double>{0.1, 0.5}));
  // Execution settings stay out of the echo.
  EXPECT_EQ(echo.find("threads"), std::string::npos);
  EXPECT_EQ(echo.find("/tmp/x"), std::string::npos);
  c.threads = 1;
  EXPECT_EQ(config_echo(c), echo);
}

TEST(Config, NestedAndDottedAgree) {
  const auto a = parse_config_text(R"({"m2": {"kind": "constant", "value": 3}})");
  const auto b = parse_config_text(R"({"m2.kind": "constant", "m2.value": 3})");
  EXPECT_EQ(config_echo(a), config_echo(b));
  EXPECT_EQ(a.params.m2.value, 3.0);
}

TEST(Config, RunName) {
  RunConfig c;
  c.mode = RunMode::Sweep;
  EXPECT_EQ(resolved_run_name(c), "sweep");
  c.run_name = "trial";
  EXPECT_EQ(resolved_run_name(c), "trial");
}
