#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <memory>
#include <numbers>
#include <vector>

#include "mgsde/ergodicity.hpp"
#include "mgsde/game_params.hpp"
#include "mgsde/overlaps.hpp"
#include "mgsde/rng.hpp"
#include "mgsde/sde.hpp"
#include "mgsde/strategy_table.hpp"

using namespace mgsde;

namespace {

// Root of x tanh(x) = beta by Newton iteration from x = 1 + beta.
double newton_root(double beta) {
  double x = 1.0 + beta;
  for (int it = 0; it < 100; ++it) {
    const double t = std::tanh(x);
    const double f = x * t - beta;
    const double df = t + x * (1.0 - t * t);
    x -= f / df;
  }
  return x;
}

DriftSpec spec_for(std::size_t n, std::uint64_t seed) {
  const auto table = sample_strategies(make_game_params(n, 1.0, 1.0, seed));
  return DriftSpec(std::make_shared<const OverlapData>(compute_overlaps(table)), table.n_states());
}

}  // namespace

TEST(InitialCondition, WeakestAsymmetryMatchesNewton) {
  EXPECT_NEAR(weakest_asymmetry(1.0), newton_root(1.0), 1e-12);
  EXPECT_NEAR(weakest_asymmetry(1.0), 1.19968, 1e-5);
  EXPECT_NEAR(weakest_asymmetry(0.3), newton_root(0.3), 1e-12);
  EXPECT_NEAR(weakest_asymmetry(7.0), newton_root(7.0), 1e-10);
  EXPECT_EQ(weakest_asymmetry(0.0), 0.0);
}

TEST(InitialCondition, FiniteFullFractionRespectsBeta) {
  ScenarioSpec spec;
  spec.kind = ScenarioKind::finite_asymmetric;
  spec.beta = 1.0;
  spec.gamma_frac = 1.0;
  Rng rng(3);
  const auto y = make_initial_condition(spec, 200, rng);
  const double x_star = newton_root(1.0);
  for (double v : y) EXPECT_GE(std::abs(v), x_star - 1e-12);
}

TEST(InitialCondition, FiniteHalfFractionCount) {
  ScenarioSpec spec;
  spec.gamma_frac = 0.5;
  Rng rng(4);
  const auto y = make_initial_condition(spec, 100, rng);
  EXPECT_EQ(std::count_if(y.begin(), y.end(), [](double v) { return v != 0.0; }), 50);
}

TEST(InitialCondition, ProducerHasOneSaturatedAgent) {
  ScenarioSpec spec;
  spec.kind = ScenarioKind::producer;
  spec.y_max = 50.0;
  Rng rng(5);
  const auto y = make_initial_condition(spec, 8, rng);
  EXPECT_EQ(std::count_if(y.begin(), y.end(), [](double v) { return v != 0.0; }), 1);
  EXPECT_EQ(std::count_if(y.begin(), y.end(), [](double v) { return std::abs(v) == 50.0; }), 1);
}

TEST(InitialCondition, BetaPropertyHoldsAcrossSettings) {
  Rng rng(6);
  for (double beta : {0.2, 0.5, 1.0, 2.0}) {
    for (double gamma : {0.1, 0.5, 1.0 / beta > 1.0 ? 1.0 : 1.0 / beta}) {
      ScenarioSpec spec;
      spec.beta = beta;
      spec.gamma_frac = gamma;
      spec.spread = 1.0;
      const auto y = make_initial_condition(spec, 64, rng);
      for (double v : y) {
        if (v != 0.0) {
          EXPECT_GE(v * std::tanh(v), beta * (1.0 - 1e-12));
        }
      }
    }
  }
}

TEST(InitialCondition, RejectsUnreachableBeta) {
  ScenarioSpec spec;
  spec.beta = 1.0;
  spec.y_max = 1.0;  // x* is about 1.2
  Rng rng(1);
  EXPECT_THROW(make_initial_condition(spec, 10, rng), Error);
  spec.y_max = 50.0;
  spec.beta = 2.0;
  spec.gamma_frac = 1.0;  // beta gamma > 1
  EXPECT_THROW(make_initial_condition(spec, 10, rng), Error);
}

TEST(Lln, StatisticsMatchOverlapMatrices) {
  const auto table = sample_strategies(make_game_params(48, 1.0, 1.0, 2));
  const auto ov = compute_overlaps(table);
  const auto cell = lln_statistics(table, 10);
  double xt = 0.0, x2 = 0.0, cross = 0.0;
  for (int i = 0; i < 10; ++i) {
    xt += std::abs(ov.xi_theta(i));
    x2 += std::abs(ov.xi_xi(i, i) - 0.5);
    cross += std::abs(ov.xi_xi.row(i).sum() - ov.xi_xi(i, i));
  }
  EXPECT_NEAR(cell.mean_abs_xi_theta, xt / 10, 1e-12);
  EXPECT_NEAR(cell.mean_abs_xi2_dev, x2 / 10, 1e-12);
  EXPECT_NEAR(cell.mean_abs_cross_sum, cross / 10, 1e-12);
}

TEST(Lln, FitLineRecoversExactLine) {
  const std::vector<double> x{1, 2, 3, 4};
  const std::vector<double> y{1.5, 1.0, 0.5, 0.0};
  const auto f = fit_line(x, y);
  EXPECT_NEAR(f.slope, -0.5, 1e-12);
  EXPECT_NEAR(f.intercept, 2.0, 1e-12);
  EXPECT_NEAR(f.r2, 1.0, 1e-12);
}

TEST(Lln, Xi2DeviationDecaysAtCltRate) {
  LlnSettings s;
  s.n_grid = {256, 1024, 4096};
  s.seeds = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  const auto r = lln_suite(s);
  EXPECT_GE(r.xi2_decay.slope, -0.7);
  EXPECT_LE(r.xi2_decay.slope, -0.3);
  const auto& top = r.levels.back();
  EXPECT_LE(top.mean_abs_xi2_dev, 5.0 / std::sqrt(2.0 * 4096));
  EXPECT_GE(r.trend_seeds, 8u);
}

TEST(Lln, XiThetaStaysOrderOneAtAlphaOne) {
  // xi_i Theta sums P terms, each zero unless xi_i != 0, then Theta has
  // variance (N - 1) / 2: sd of the average is sqrt((N - 1) / (4 P)).
  LlnSettings s;
  s.n_grid = {256, 1024};
  s.seeds = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  const auto r = lln_suite(s);
  for (const auto& level : r.levels) {
    const double sd = std::sqrt((level.n_agents - 1.0) / (4.0 * level.n_states));
    EXPECT_NEAR(level.mean_abs_xi_theta, std::sqrt(2.0 / std::numbers::pi) * sd, 0.15 * sd) << level.n_agents;
  }
}

TEST(Lln, GlobalFlipLeavesStatisticsInDistribution) {
  // xi and theta both flip sign, so xi_theta and xi_xi are unchanged exactly.
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto t = sample_strategies(make_game_params(128, 1.0, 1.0, seed));
    const auto a = lln_statistics(t, 32);
    const auto b = lln_statistics(t.negated(), 32);
    EXPECT_DOUBLE_EQ(a.mean_xi_theta, b.mean_xi_theta);
    EXPECT_DOUBLE_EQ(a.mean_xi2_dev, b.mean_xi2_dev);
    EXPECT_DOUBLE_EQ(a.mean_cross_sum, b.mean_cross_sum);
  }
}

TEST(Lln, SuiteIndependentOfJobs) {
  LlnSettings s;
  s.n_grid = {64, 128};
  s.seeds = {3, 1, 2};
  s.jobs = 1;
  const auto a = lln_suite(s);
  s.jobs = 3;
  const auto b = lln_suite(s);
  ASSERT_EQ(a.cells.size(), b.cells.size());
  for (std::size_t k = 0; k < a.cells.size(); ++k) EXPECT_EQ(a.cells[k].mean_abs_cross_sum, b.cells[k].mean_abs_cross_sum);
  EXPECT_EQ(a.cross_decay.slope, b.cross_decay.slope);
}

TEST(Radial, MaximalProbesPassAtModerateN) {
  const auto spec = spec_for(256, 1);
  const auto rc = rescale_constant(256, ScenarioKind::producer);
  RadialCheckSettings s;
  s.n_probes = 200;
  const auto r = radial_drift_check(spec, rc, s);
  EXPECT_TRUE(r.pass);
  ASSERT_TRUE(r.m0_empirical.has_value());
  EXPECT_GE(r.profile.back().normalized_pass_fraction, 0.99);
  EXPECT_DOUBLE_EQ(r.target, 127.0);
  EXPECT_DOUBLE_EQ(r.r_required, 129.0);
  EXPECT_GT(r.r_achieved, r.r_required);
}

TEST(Radial, TargetScalesWithBetaGamma) {
  const auto spec = spec_for(64, 2);
  RadialCheckSettings s;
  s.n_probes = 20;
  s.family = ProbeFamily::sparse_finite;
  const auto full = radial_drift_check(spec, rescale_constant(64, ScenarioKind::finite_asymmetric, 1.0, 1.0), s);
  const auto quarter = radial_drift_check(spec, rescale_constant(64, ScenarioKind::finite_asymmetric, 0.5, 0.5), s);
  EXPECT_DOUBLE_EQ(full.target, 31.0);
  EXPECT_DOUBLE_EQ(quarter.target, full.target / 4.0);
}

TEST(Radial, LargerScaleNeverLowersAchievedRadius) {
  const auto spec = spec_for(32, 3);
  RadialCheckSettings s;
  s.n_probes = 10;
  double last = 0.0;
  for (double bg : {1.0, 0.8, 0.5, 0.25}) {
    const auto rc = rescale_constant(32, ScenarioKind::finite_asymmetric, bg, 1.0);
    const auto r = radial_drift_check(spec, rc, s);
    EXPECT_GE(r.r_achieved, last);
    last = r.r_achieved;
  }
}

TEST(Radial, RejectsUnsortedRadii) {
  const auto spec = spec_for(16, 1);
  RadialCheckSettings s;
  s.radii = {5.0, 2.0};
  EXPECT_THROW(radial_drift_check(spec, rescale_constant(16, ScenarioKind::producer), s), Error);
}

TEST(DriftOracle, SmallGameAgrees) {
  const auto table = sample_strategies(make_game_params(16, 1.0, 0.1, 5));
  DriftOracleSettings s;
  s.test_points = 3;
  s.samples = 20000;
  const auto r = drift_oracle_check(table, 0.1, s);
  EXPECT_EQ(r.total, 48u);
  EXPECT_GE(r.coverage, 0.9);
}

TEST(Exponents, TenAgentsMaximal) {
  const auto e = exponent_ranges(10, ScenarioKind::producer);
  EXPECT_DOUBLE_EQ(e.k_range.lo, 0.0);
  EXPECT_DOUBLE_EQ(e.k_range.hi, 0.5);
  EXPECT_DOUBLE_EQ(e.k, 0.25);
  EXPECT_DOUBLE_EQ(e.l_range.lo, 2.5);
  EXPECT_DOUBLE_EQ(e.l_range.hi, 3.0);
}

TEST(Exponents, LargeNLimits) {
  for (auto kind : {ScenarioKind::producer, ScenarioKind::finite_asymmetric}) {
    const auto e = exponent_ranges(1000000, kind, 1.0, 1.0);
    EXPECT_NEAR(e.k, 0.0, 1e-5);
    EXPECT_NEAR(e.l, 2.0, 1e-5);
  }
}

TEST(Exponents, SatisfyConstraintChain) {
  for (std::size_t n : {6u, 10u, 32u, 256u, 4096u}) {
    for (double bg : {1.0, 0.7, 0.3}) {
      const auto kind = bg == 1.0 ? ScenarioKind::producer : ScenarioKind::finite_asymmetric;
      const auto rc = rescale_constant(n, kind, bg, 1.0);
      const auto e = exponent_ranges(n, kind, bg, 1.0);
      const double half = static_cast<double>(n) / 2.0;
      EXPECT_GT(e.k, 0.0);
      EXPECT_LT(e.k, rc.r - half - 1.0 + 1e-12);
      EXPECT_GT(e.l, 2.0 * e.k + 2.0);
      EXPECT_LT(e.l, 2.0 * rc.r - static_cast<double>(n) + 1e-9);
    }
  }
}

TEST(WaitingBound, ZeroWhenBracketIsOne) {
  const double m = 0.7, c = 1.1, l = 2.3, y0 = 3.0;
  const double eps = m * (1.0 + std::pow(c * y0, l));
  EXPECT_EQ(waiting_time_bound(eps, 1.0, y0, c, 0.1, l, m), 0.0);
  EXPECT_EQ(waiting_time_bound(2.0 * eps, 1.0, y0, c, 0.1, l, m), 0.0);
}

TEST(WaitingBound, InverseInGamma) {
  const double a = waiting_time_bound(0.05, 1.0, 4.0, 1.2, 0.1, 2.4, 1.5);
  const double b = waiting_time_bound(0.05, 2.0, 4.0, 1.2, 0.1, 2.4, 1.5);
  EXPECT_NEAR(b, a / 2.0, 1e-12 * a);
}

TEST(WaitingBound, QuadraticLimit) {
  const double m = 0.8, eps = 0.05, gamma = 1.5;
  const double y0 = 1e4;
  const double t = waiting_time_bound(eps, gamma, y0, 1.0, 0.0, 2.0, m);
  EXPECT_NEAR(t, ((m / eps) * (1.0 + y0 * y0) - 1.0) / gamma, 1e-9 * t);
  EXPECT_NEAR(t / (y0 * y0), m / (eps * gamma), 1e-6 * m / (eps * gamma));
}

TEST(WaitingBound, Monotone) {
  double last = -1.0;
  for (double y0 : {0.0, 1.0, 2.0, 5.0, 10.0}) {
    const double t = waiting_time_bound(0.05, 1.0, y0, 1.1, 0.2, 2.5, 1.0);
    EXPECT_GE(t, last);
    last = t;
  }
  EXPECT_LT(waiting_time_bound(0.1, 1.0, 3.0, 1.1, 0.2, 2.5, 1.0), waiting_time_bound(0.05, 1.0, 3.0, 1.1, 0.2, 2.5, 1.0));
  EXPECT_LT(waiting_time_bound(0.05, 1.0, 3.0, 1.1, 0.2, 2.5, 1.0), waiting_time_bound(0.05, 1.0, 3.0, 1.1, 0.2, 2.5, 2.0));
  EXPECT_GT(waiting_time_bound(0.05, 1.0, 3.0, 1.1, 0.2, 2.5, 1.0), waiting_time_bound(0.05, 3.0, 3.0, 1.1, 0.2, 2.5, 1.0));
  EXPECT_THROW(waiting_time_bound(0.0, 1.0, 3.0, 1.1, 0.2, 2.5, 1.0), Error);
  EXPECT_THROW(waiting_time_bound(0.1, 1.0, 3.0, 1.1, 0.2, 2.5, 0.0), Error);
}

TEST(MPrime, RecoversGenerator) {
  const double k = 0.1, l = 2.2, c = 1.05, y0 = 2.0;
  std::vector<TvSample> pairs;
  for (double t : {0.0, 1.0, 3.0, 10.0, 30.0, 100.0})
    pairs.push_back({t, 2.0 * (1.0 + std::pow(c * y0, l)) * std::pow(1.0 + t, -(k + 1.0))});
  const auto fit = calibrate_m_prime(pairs, k, l, c, y0);
  EXPECT_NEAR(fit.m_prime, 2.0, 1e-6);
  EXPECT_NEAR(fit.m_prime_ls, 2.0, 1e-6);
  EXPECT_DOUBLE_EQ(envelope_coverage(pairs, fit.m_prime, k, l, c, y0), 1.0);
}

TEST(MPrime, FlatTvIsAnError) {
  const std::vector<TvSample> pairs{{0.0, 1.0}, {1.0, 1.0}, {2.0, 1.0}, {3.0, 1.0}};
  try {
    calibrate_m_prime(pairs, 0.1, 2.2, 1.0, 1.0);
    FAIL() << "expected check_failed";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::check_failed);
  }
  EXPECT_THROW(calibrate_m_prime(std::vector<TvSample>{{0.0, 1.0}, {1.0, 0.5}}, 0.1, 2.2, 1.0, 1.0), Error);
}

TEST(MPrime, EnvelopeDominatesFittedPairs) {
  Rng rng(2);
  std::vector<TvSample> pairs;
  for (int k = 0; k < 40; ++k) {
    const double t = 2.0 * k;
    pairs.push_back({t, std::min(1.0, 0.9 * std::exp(-0.05 * t) + 0.02 * rng.uniform())});
  }
  const auto fit = calibrate_m_prime(pairs, 0.05, 2.1, 1.0, 1.5);
  EXPECT_GT(fit.m_prime, 0.0);
  EXPECT_GE(fit.m_prime, fit.m_prime_ls);
  EXPECT_DOUBLE_EQ(envelope_coverage(pairs, fit.m_prime, 0.05, 2.1, 1.0, 1.5), 1.0);
}
