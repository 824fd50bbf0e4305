#include <doctest.h>

#include <cmath>

#include "focal/errors.hpp"
#include "focal/synthgen.hpp"
#include "focal/tape.hpp"
#include "focal/theoremlab.hpp"

using namespace focal;

TEST_SUITE_BEGIN("theoremlab");

TEST_CASE("logit distributions: parsing and exp-mean oracles") {
  LogitDistribution pm = LogitDistribution::parse("point_mass(1.5)");
  CHECK(pm.mean_exp() == doctest::Approx(std::exp(1.5)).epsilon(1e-15));

  // lognormal mean e^{mu + sigma^2/2}
  LogitDistribution nm = LogitDistribution::parse("normal(0,1)");
  CHECK(nm.mean_exp() == doctest::Approx(std::exp(0.5)).epsilon(1e-15));

  // uniform: (e^b - e^a)/(b - a), checked against midpoint-rule quadrature
  LogitDistribution un = LogitDistribution::parse("uniform(-1,2)");
  double quad = 0.0;
  const int steps = 200000;
  for (int i = 0; i < steps; ++i)
    quad += std::exp(-1.0 + 3.0 * (i + 0.5) / steps) * (3.0 / steps);
  quad /= 3.0;
  CHECK(un.mean_exp() == doctest::Approx(quad).epsilon(1e-8));

  CHECK_THROWS_AS(LogitDistribution::parse("cauchy(0,1)"), parse_error);
  CHECK_THROWS_AS(LogitDistribution::parse("normal(0)"), parse_error);
}

TEST_CASE("dilution: equal point-mass logits give A* = n*/(n*+m) exactly") {
  DilutionTrialConfig cfg;
  cfg.n_star = 1;
  cfg.m_values = {9};
  cfg.primary = LogitDistribution::point_mass(0.7);
  cfg.secondary = LogitDistribution::point_mass(0.7);
  cfg.trials = 3;
  cfg.seed = 1;
  TheoremReport rep = verify_dilution(cfg);
  REQUIRE(!rep.checks.empty());
  CHECK(rep.checks[0].measured == doctest::Approx(0.1).epsilon(1e-13));
  CHECK(std::abs(rep.checks[0].measured - 0.1) <= 1e-12);
}

TEST_CASE("dilution: normal logits track the lognormal-mean prediction") {
  DilutionTrialConfig cfg;
  cfg.n_star = 4;
  cfg.m_values = {256, 512, 1024};
  cfg.trials = 2000;
  cfg.seed = 0;
  TheoremReport rep = verify_dilution(cfg);
  CAPTURE(rep.to_text());
  CHECK(rep.pass);
  // slope check present and inside [-1.1, -0.9]
  bool found_slope = false;
  for (const TheoremCheck& c : rep.checks)
    if (c.name == "loglog_slope") {
      found_slope = true;
      CHECK(c.measured >= -1.1);
      CHECK(c.measured <= -0.9);
    }
  CHECK(found_slope);
  CHECK(rep.curves.size() == 2);
}

TEST_CASE("dilution negative control: m-dependent drift breaks the fit") {
  DilutionTrialConfig cfg;
  cfg.n_star = 4;
  cfg.m_values = {64, 256, 1024};
  cfg.trials = 400;
  cfg.seed = 2;
  cfg.secondary_drift = 1.0;
  TheoremReport rep = verify_dilution(cfg);
  CHECK_FALSE(rep.pass);
}

TEST_CASE("dilution config validation") {
  DilutionTrialConfig cfg;
  cfg.m_values = {64, 64};
  CHECK_THROWS_AS(verify_dilution(cfg), validation_error);
  cfg.m_values = {64};
  cfg.trials = 0;
  CHECK_THROWS_AS(verify_dilution(cfg), validation_error);
}

TEST_CASE("gradient attenuation bound holds on sampled trials") {
  GradAttenuationConfig cfg;
  cfg.trials = 800;
  cfg.trend_trials = 300;
  cfg.seed = 3;
  TheoremReport rep = verify_grad_attenuation(cfg);
  CAPTURE(rep.to_text());
  CHECK(rep.pass);
}

TEST_CASE("gradient attenuation: single primary neighbor at full mass") {
  // L = 1, alpha = 1: the gradient norm is exactly ||w|| |sigma(z) - 1|.
  Tape tape;
  Tensor msg = Tensor::from_rows({{0.3, -0.4}});
  Tensor w = Tensor::from_rows({{0.6, 0.2}});
  VarId m = tape.param(msg);
  VarId z = tape.matmul(m, tape.transpose(tape.constant(w)));
  VarId loss = tape.sum_all(tape.log1p_exp(tape.scale(z, -1.0)));
  tape.backward(loss);
  const Tensor& g = tape.grad(m);
  const double zv = 0.3 * 0.6 - 0.4 * 0.2;
  const double sig = 1.0 / (1.0 + std::exp(-zv));
  const double expect = std::sqrt(0.6 * 0.6 + 0.2 * 0.2) * std::abs(sig - 1.0);
  CHECK(std::sqrt(g[0] * g[0] + g[1] * g[1]) == doctest::Approx(expect).epsilon(1e-12));
  CHECK(expect <= std::sqrt(0.6 * 0.6 + 0.2 * 0.2));
}

TEST_CASE("loss amplification bound and equality case") {
  LossAmplificationConfig cfg;
  cfg.trials = 800;
  cfg.seed = 4;
  TheoremReport rep = verify_loss_amplification(cfg);
  CAPTURE(rep.to_text());
  CHECK(rep.pass);
  bool saw_equality = false;
  for (const TheoremCheck& c : rep.checks)
    if (c.name == "zero_astar_equality") {
      saw_equality = true;
      CHECK(c.pass);
    }
  CHECK(saw_equality);
}

TEST_CASE("meta-path mass bound, uniform case, and decay") {
  MetapathMassConfig cfg;
  cfg.m_total = {8, 32, 128};
  cfg.draws = 800;
  cfg.seed = 5;
  TheoremReport rep = verify_metapath_mass(cfg);
  CAPTURE(rep.to_text());
  CHECK(rep.pass);
  CHECK(rep.curves[0].y.front() > rep.curves[0].y.back());
  CHECK_THROWS_AS(verify_metapath_mass(MetapathMassConfig{{2}, 2, 10, 0}), validation_error);
}

TEST_CASE("loss floor bound with exact B*=0 equalities") {
  LossFloorConfig cfg;
  cfg.draws = 800;
  cfg.seed = 6;
  TheoremReport rep = verify_loss_floor(cfg);
  CAPTURE(rep.to_text());
  CHECK(rep.pass);
}

TEST_CASE("focal guarantees on a small planted graph with random parameters") {
  TheoremReport rep = verify_focal_guarantees(7);
  CAPTURE(rep.to_text());
  CHECK(rep.pass);
  // the AOA invariance check must be exactly zero
  for (const TheoremCheck& c : rep.checks)
    if (c.name == "aoa_max_abs_diff_after_augmentation") CHECK(c.measured == 0.0);
}

TEST_CASE("oversmoothing runner produces one curve per arm and is deterministic") {
  SynthConfig sc = planted_benchmark_synth(80, 0.4, 0.1, 8);
  sc.secondary_degree = 6;
  HetGraph g = generate(sc);
  FocalConfig cfg = planted_benchmark_config(8);
  cfg.hidden_dim = 8;
  cfg.out_dim = 8;
  cfg.coa_heads = 2;
  cfg.aoa_heads = 2;
  cfg.max_epoch = 6;
  TheoremReport a = run_oversmoothing(g, cfg, {2, 3});
  TheoremReport b = run_oversmoothing(g, cfg, {2, 3});
  REQUIRE(a.curves.size() == 2);
  CHECK(a.curves[0].y == b.curves[0].y);
  CHECK(a.curves[1].y == b.curves[1].y);
  CHECK(a.checks.size() == 1);
}

TEST_CASE("theorem report text lists every check") {
  DilutionTrialConfig cfg;
  cfg.n_star = 2;
  cfg.m_values = {16, 32};
  cfg.primary = LogitDistribution::point_mass(0.0);
  cfg.secondary = LogitDistribution::point_mass(0.0);
  cfg.trials = 2;
  TheoremReport rep = verify_dilution(cfg);
  const std::string text = rep.to_text();
  CHECK(text.find("theorem = attention_dilution") != std::string::npos);
  CHECK(text.find("check.mean_astar_m16.measured") != std::string::npos);
  CHECK(text.find("check.loglog_slope.pass") != std::string::npos);
}

TEST_SUITE_END();
