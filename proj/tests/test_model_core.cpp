#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <vector>

#include "mgsde/error.hpp"
#include "mgsde/game_params.hpp"
#include "mgsde/overlaps.hpp"
#include "mgsde/rng.hpp"
#include "mgsde/strategy_table.hpp"
#include "test_util.hpp"

using namespace mgsde;
using mgsde::testing::table_from_actions;
using mgsde::testing::table_from_xi;

TEST(GameParams, AlphaRecomputedFromIntegers) {
  const auto p = make_game_params(30, 0.5, 1.0, 1);
  EXPECT_EQ(p.n_states, 15u);
  EXPECT_DOUBLE_EQ(p.alpha, 0.5);
  const auto q = make_game_params(7, 1.0 / 3.0, 1.0, 1);
  EXPECT_EQ(q.n_states, 2u);
  EXPECT_DOUBLE_EQ(q.alpha, 2.0 / 7.0);
}

TEST(GameParams, AsymmetricPhaseFlag) {
  EXPECT_TRUE(make_game_params(100, 1.0, 1.0, 1).asymmetric_phase_ok());
  EXPECT_FALSE(make_game_params(100, 0.3, 1.0, 1).asymmetric_phase_ok());
}

TEST(GameParams, RejectsBadInput) {
  EXPECT_THROW(make_game_params(0, 1.0, 1.0, 1), Error);
  EXPECT_THROW(make_game_params(10, 0.01, 1.0, 1), Error);
  EXPECT_THROW(make_game_params(10, 1.0, -1.0, 1), Error);
  EXPECT_THROW(make_game_params(10, 1.0, INFINITY, 1), Error);
  EXPECT_THROW(make_game_params(10, NAN, 1.0, 1), Error);
}

TEST(StrategyTable, SingleAgentSubstitution) {
  const auto t = table_from_actions(1, 1, {+1}, {-1});
  EXPECT_EQ(t.xi(0, 0), 1);
  EXPECT_EQ(t.theta(0), 0);
}

TEST(StrategyTable, RejectsEmptyDimensions) {
  GameParams p;
  p.n_agents = 0;
  p.n_states = 3;
  EXPECT_THROW(sample_strategies(p), Error);
  p.n_agents = 3;
  p.n_states = 0;
  EXPECT_THROW(sample_strategies(p), Error);
}

TEST(StrategyTable, XiFrequenciesMatchEnumeration) {
  // The four equiprobable (a+, a-) pairs give xi = -1, 0, 0, +1.
  const auto table = sample_strategies(make_game_params(1000, 1.0, 1.0, 17));
  const double n = 1e6;
  double counts[3] = {0, 0, 0};
  for (std::size_t mu = 0; mu < 1000; ++mu)
    for (std::size_t i = 0; i < 1000; ++i) counts[table.xi(mu, i) + 1] += 1;
  const double expected[3] = {0.25, 0.5, 0.25};
  for (int k = 0; k < 3; ++k) {
    const double sd = std::sqrt(expected[k] * (1 - expected[k]) / n);
    EXPECT_NEAR(counts[k] / n, expected[k], 3 * sd) << "xi = " << k - 1;
  }
  // mean of xi^2
  const double m2 = (counts[0] + counts[2]) / n;
  EXPECT_NEAR(m2, 0.5, 3 * std::sqrt(0.25 / n));
}

TEST(StrategyTable, XiRecomputableAndThetaParity) {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    for (std::size_t n : {5u, 8u}) {
      const auto t = sample_strategies(make_game_params(n, 1.5, 1.0, seed));
      EXPECT_TRUE(t.consistent());
      for (std::size_t mu = 0; mu < t.n_states(); ++mu) {
        int theta = 0, undecided = 0;
        for (std::size_t i = 0; i < n; ++i) {
          const int ap = t.action(mu, i, Side::plus), am = t.action(mu, i, Side::minus);
          ASSERT_TRUE(ap == 1 || ap == -1);
          ASSERT_TRUE(am == 1 || am == -1);
          EXPECT_EQ(2 * t.xi(mu, i), ap - am);
          theta += ap + am;
          undecided += ap == am;
        }
        EXPECT_EQ(2 * t.theta(mu), theta);
        EXPECT_LE(std::abs(t.theta(mu)), static_cast<int>(n));
        EXPECT_EQ((t.theta(mu) - undecided) % 2, 0);
      }
    }
  }
}

TEST(StrategyTable, DeterministicForSeed) {
  const auto p = make_game_params(64, 1.0, 1.0, 99);
  EXPECT_EQ(sample_strategies(p), sample_strategies(p));
  auto q = p;
  q.seed = 100;
  EXPECT_FALSE(sample_strategies(p) == sample_strategies(q));
}

TEST(StrategyTable, BinaryCacheRoundTrip) {
  const auto dir = mgsde::testing::scratch_dir("table");
  const auto t = sample_strategies(make_game_params(37, 1.3, 1.0, 5));
  save_table(t, dir / "t.bin");
  const auto back = load_table(dir / "t.bin");
  EXPECT_EQ(back, t);
  EXPECT_EQ(back.seed(), 5u);
  EXPECT_THROW(load_table(dir / "missing.bin"), Error);
}

TEST(StrategyTable, NegatedFlipsThetaKeepsXiSquared) {
  const auto t = sample_strategies(make_game_params(16, 1.0, 1.0, 3));
  const auto f = t.negated();
  for (std::size_t mu = 0; mu < 16; ++mu) {
    EXPECT_EQ(f.theta(mu), -t.theta(mu));
    for (std::size_t i = 0; i < 16; ++i) EXPECT_EQ(f.xi(mu, i), -t.xi(mu, i));
  }
}

TEST(Overlaps, SingleStateTwoAgents) {
  const auto t = table_from_xi(2, 1, {+1, -1});
  const auto o = compute_overlaps(t);
  EXPECT_DOUBLE_EQ(o.xi_xi(0, 0), 1.0);
  EXPECT_DOUBLE_EQ(o.xi_xi(0, 1), -1.0);
  EXPECT_DOUBLE_EQ(o.xi_xi(1, 0), -1.0);
  EXPECT_DOUBLE_EQ(o.xi_xi(1, 1), 1.0);
}

TEST(Overlaps, MatchDefinitionsByLoops) {
  const auto t = sample_strategies(make_game_params(9, 2.0, 1.0, 8));
  const auto o = compute_overlaps(t);
  const double p = static_cast<double>(t.n_states());
  for (std::size_t i = 0; i < 9; ++i) {
    double xt = 0.0;
    for (std::size_t mu = 0; mu < t.n_states(); ++mu) xt += t.xi(mu, i) * t.theta(mu);
    EXPECT_NEAR(o.xi_theta(i), xt / p, 1e-14);
    for (std::size_t j = 0; j < 9; ++j) {
      double xx = 0.0;
      for (std::size_t mu = 0; mu < t.n_states(); ++mu) xx += t.xi(mu, i) * t.xi(mu, j);
      EXPECT_NEAR(o.xi_xi(i, j), xx / p, 1e-14);
    }
  }
}

TEST(Overlaps, SymmetricPsdAndDiagonalInUnitInterval) {
  const auto t = sample_strategies(make_game_params(40, 0.5, 1.0, 4));  // P < N, singular
  const auto o = compute_overlaps(t);
  EXPECT_EQ((o.xi_xi - o.xi_xi.transpose()).cwiseAbs().maxCoeff(), 0.0);
  for (Eigen::Index i = 0; i < 40; ++i) {
    EXPECT_GE(o.xi_xi(i, i), 0.0);
    EXPECT_LE(o.xi_xi(i, i), 1.0);
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(o.xi_xi);
  EXPECT_GE(es.eigenvalues().minCoeff(), -1e-10);
  Rng rng(1);
  for (int k = 0; k < 1000; ++k) {
    Eigen::VectorXd x(40);
    for (auto& v : x) v = rng.normal();
    EXPECT_GE(x.dot(o.xi_xi * x), -1e-10);
  }
}

TEST(Overlaps, LargeTableDiagonalAndCrossSums) {
  const std::size_t n = 1024;
  const auto t = sample_strategies(make_game_params(n, 1.0, 1.0, 21));
  const auto o = compute_overlaps(t);
  const double tol = 5.0 / std::sqrt(2.0 * n);
  std::size_t inside = 0;
  for (std::size_t i = 0; i < n; ++i) inside += std::abs(o.xi_xi(i, i) - 0.5) <= tol;
  EXPECT_GE(inside, static_cast<std::size_t>(std::ceil(0.99 * n)));

  // Cross sums: centred on zero within three standard errors of their mean.
  std::vector<double> cross(n);
  double mean = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    cross[i] = o.xi_xi.row(i).sum() - o.xi_xi(i, i);
    mean += cross[i];
  }
  mean /= n;
  double var = 0.0;
  for (double c : cross) var += (c - mean) * (c - mean);
  var /= (n - 1);
  EXPECT_LE(std::abs(mean), 3.0 * std::sqrt(var / n));
}

TEST(Overlaps, MaxDiagonalDeviationShrinksWithN) {
  // Computed straight from the table so the largest size stays cheap.
  auto max_dev = [](std::size_t n, std::uint64_t seed) {
    const auto t = sample_strategies(make_game_params(n, 1.0, 1.0, seed));
    double worst = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double s = 0.0;
      for (std::size_t mu = 0; mu < n; ++mu) s += t.xi(mu, i) * t.xi(mu, i);
      worst = std::max(worst, std::abs(s / n - 0.5));
    }
    return worst;
  };
  int monotone = 0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const double a = max_dev(256, seed), b = max_dev(1024, seed), c = max_dev(4096, seed);
    monotone += (b <= a && c <= b);
  }
  EXPECT_GE(monotone, 8);
}
