// Copyright 2026 The epgame Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "epg/solver.hpp"

#include <random>

#include <gtest/gtest.h>

#include "epg/game.hpp"
#include "epg/gradcheck.hpp"

namespace epg {
namespace {

LinearLeastSquares identity_1d() { return LinearLeastSquares(Eigen::MatrixXd::Ones(1, 1), Eigen::VectorXd::Zero(1)); }

TEST(LmStep, GaussNewtonExactOnLinearResidual) {
  const VectorStep s = lm_step(identity_1d(), Eigen::VectorXd::Ones(1), 0.0, 1.0);
  EXPECT_NEAR(s.delta(0), -1.0, 1e-7);
  EXPECT_NEAR(s.next(0), 0.0, 1e-7);
}

TEST(LmStep, DampedClosedForm) {
  const VectorStep s = lm_step(identity_1d(), Eigen::VectorXd::Ones(1), 1.0, 0.3);
  EXPECT_NEAR(s.delta(0), -0.5, 1e-8);
  EXPECT_NEAR(s.next(0), 0.85, 1e-8);
}

TEST(LmStep, ZeroResidualIsFixedPoint) {
  const VectorStep s = lm_step(identity_1d(), Eigen::VectorXd::Zero(1), 10.0, 0.3);
  EXPECT_EQ(s.delta(0), 0.0);
  EXPECT_EQ(s.next(0), 0.0);
}

TEST(LmStep, NegativeDampingRejected) {
  EXPECT_THROW(lm_step(identity_1d(), Eigen::VectorXd::Ones(1), -1.0, 0.3), InvalidInput);
}

TEST(LmStep, NoFloorSingularSystemIsNumericalError) {
  const LinearLeastSquares zero(Eigen::MatrixXd::Zero(1, 2), Eigen::VectorXd::Ones(1));
  EXPECT_THROW(lm_step(zero, Eigen::VectorXd::Zero(2), 1.0, 1.0, 0.0), NumericalError);
}

TEST(SolverConfig, Validation) {
  SolverConfig c;
  c.validate();
  EXPECT_EQ(c.steps, 2);
  EXPECT_EQ(c.step_size, 0.3);
  EXPECT_EQ(c.damping, 10.0);
  c.step_size = 0.0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = SolverConfig{};
  c.step_size = 1.5;
  EXPECT_THROW(c.validate(), ConfigError);
  c = SolverConfig{};
  c.steps = -1;
  EXPECT_THROW(c.validate(), ConfigError);
  c = SolverConfig{};
  c.damping = -1e-3;
  EXPECT_THROW(c.validate(), ConfigError);
}

Scenario head_on(int horizon = 40, double y_offset = 0.0) {
  Scenario sc;
  sc.initial.agents = {{-2, y_offset, 1, 0}, {2, -y_offset, 1, 3.14159265358979323846}};
  sc.histories = {{{-2, y_offset}}, {{2, -y_offset}}};
  sc.radii = Eigen::Vector2d(0.25, 0.25);
  sc.dt = 0.1;
  sc.horizon = horizon;
  sc.features.own_features = {Feature::goal, Feature::vel, Feature::acc, Feature::turnr};
  return sc;
}

GameParams head_on_params(const Scenario& sc) {
  GameParams p = uniform_params(sc.features, 2, 1.0, 10.0, 0.25);
  p.goals << 2, -2, sc.initial.agents[0].y, sc.initial.agents[1].y;
  p.own_weights.col(1).setConstant(0.5);
  return p;
}

TEST(Solve, ZeroStepsReturnsInit) {
  const Scenario sc = head_on();
  const auto sys = build_system(sc, head_on_params(sc));
  JointStrategy init(2, 40, 0.1);
  init.vector().setLinSpaced(-1, 1);
  for (SolverMode mode : {SolverMode::fixed, SolverMode::adaptive}) {
    SolverConfig cfg;
    cfg.steps = 0;
    cfg.mode = mode;
    const SolveResult r = solve(sys, init, cfg);
    EXPECT_TRUE(r.solution == init);
    EXPECT_EQ(r.report.energies.size(), 1u);
  }
}

TEST(Solve, FixedModeTakesExactlySSteps) {
  const Scenario sc = head_on();
  const auto sys = build_system(sc, head_on_params(sc));
  SolverConfig cfg;
  cfg.steps = 5;
  const SolveResult r = solve(sys, JointStrategy(2, 40, 0.1), cfg);
  EXPECT_EQ(r.report.accepted_steps, 5);
  EXPECT_EQ(r.report.energies.size(), 6u);
  // replaying lm_step reproduces it
  JointStrategy u(2, 40, 0.1);
  for (int s = 0; s < 5; ++s) u = lm_step(sys, u, cfg.damping, cfg.step_size).next;
  EXPECT_TRUE(u == r.solution);
}

TEST(Solve, LinearProblemReachesOptimum) {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> nd;
  for (int t = 0; t < 20; ++t) {
    const int rows = 5 + t % 7;
    const int cols = 2 + t % 4;
    Eigen::MatrixXd a(rows, cols);
    Eigen::VectorXd b(rows);
    for (Eigen::Index k = 0; k < a.size(); ++k) a.data()[k] = nd(rng);
    for (Eigen::Index k = 0; k < b.size(); ++k) b(k) = nd(rng);
    const LinearLeastSquares prob(a, b);
    // Small initial damping: each accepted step leaves a gradient near lambda * D * step,
    // and steps below the convergence tolerance are never taken.
    const VectorSolve res = solve(prob, Eigen::VectorXd::Zero(cols), SolverConfig::adaptive(200, 1.0, 1e-6));
    EXPECT_LT(res.report.gradient_inf_norm, 1e-8);
    EXPECT_LT((res.x - prob.optimum()).lpNorm<Eigen::Infinity>(), 1e-7);
  }
}

// Independent oracle: plain gradient descent on the same energy.
double gradient_descent_energy(const ResidualSystem& sys, JointStrategy u, int steps, double rate) {
  Eigen::VectorXd r;
  Eigen::MatrixXd jac;
  for (int s = 0; s < steps; ++s) {
    sys.evaluate(u, &r, &jac);
    u.vector() -= rate * (jac.transpose() * r);
  }
  return energy(sys, u);
}

TEST(Solve, HeadOnMatchesGradientDescentOracle) {
  const Scenario sc = head_on(40, 0.05);
  const auto sys = build_system(sc, head_on_params(sc));
  const SolveResult lm = solve(sys, JointStrategy(2, 40, 0.1), SolverConfig::adaptive(50));
  const double oracle = gradient_descent_energy(sys, JointStrategy(2, 40, 0.1), 100000, 1e-3);
  EXPECT_NEAR(lm.report.final_energy, oracle, 0.01 * oracle);
}

class RandomSolve : public ::testing::TestWithParam<int> {};

TEST_P(RandomSolve, AdaptiveEnergiesNonIncreasing) {
  std::mt19937_64 rng(GetParam());
  const RandomGame g = random_game(rng);
  const auto sys = build_system(g.scenario, g.params);
  const SolveResult r = solve(sys, g.u, SolverConfig::adaptive(40));
  ASSERT_EQ(r.report.energies.size(), static_cast<std::size_t>(r.report.accepted_steps) + 1);
  for (std::size_t s = 1; s < r.report.energies.size(); ++s) {
    EXPECT_LT(r.report.energies[s], r.report.energies[s - 1]);
  }
  for (const auto& rec : r.report.log) {
    if (!rec.accepted) continue;
    EXPECT_TRUE(std::isfinite(rec.trial_energy));
  }
}

TEST_P(RandomSolve, LargeDampingFollowsScaledGradient) {
  std::mt19937_64 rng(50 + GetParam());
  const RandomGame g = random_game(rng);
  const auto sys = build_system(g.scenario, g.params);
  const Linearization lin = sys.linearize(g.u.vector());
  const Eigen::VectorXd delta = lm_direction(lin, 1e6, 1e-8);
  const Eigen::VectorXd scale = (lin.gram.diagonal().array() + 1e-8 / 1e6).matrix();
  const Eigen::VectorXd target = -(lin.gradient().array() / scale.array()).matrix();
  if (target.norm() == 0.0) GTEST_SKIP() << "stationary start";
  EXPECT_GT(delta.dot(target) / (delta.norm() * target.norm()), 0.999);
  // and it is a descent direction for the energy
  EXPECT_LT(delta.dot(lin.gradient()), 0.0);
}

TEST_P(RandomSolve, StationaryWhenConverged) {
  std::mt19937_64 rng(100 + GetParam());
  const RandomGame g = random_game(rng);
  const auto sys = build_system(g.scenario, g.params);
  const SolveResult r = solve(sys, g.u, SolverConfig::adaptive(500));
  if (!r.report.converged) GTEST_SKIP() << "no convergence within budget";
  EXPECT_LT(r.report.gradient_inf_norm, 1e-6);
}

INSTANTIATE_TEST_SUITE_P(Seeds, RandomSolve, ::testing::Range(0, 40));

TEST(SolveModes, MatchesStandaloneBitForBit) {
  const Scenario sc = head_on(30, 0.0);
  std::vector<ResidualSystem> systems;
  std::vector<JointStrategy> inits = lateral_inits(sc, 4);
  GameParams p = head_on_params(sc);
  for (int m = 0; m < 4; ++m) {
    p.own_weights(0, 0) = 1.0 + 0.25 * m;
    systems.push_back(build_system(sc, p));
  }
  const SolverConfig cfg = SolverConfig::adaptive(30);
  const auto modes = solve_modes(systems, inits, cfg);
  ASSERT_EQ(modes.size(), 4u);
  for (int m = 0; m < 4; ++m) {
    ASSERT_TRUE(modes[m].ok());
    const SolveResult alone = solve(systems[m], inits[m], cfg);
    EXPECT_TRUE(modes[m].result->solution == alone.solution);
    EXPECT_EQ(modes[m].result->report.energies, alone.report.energies);
  }
}

TEST(SolveModes, IdenticalModesIdenticalOutputs) {
  const Scenario sc = head_on(20, 0.1);
  const auto sys = build_system(sc, head_on_params(sc));
  const JointStrategy init(2, 20, 0.1);
  const auto modes = solve_modes({sys, sys}, {init, init}, SolverConfig::adaptive(20));
  ASSERT_TRUE(modes[0].ok() && modes[1].ok());
  EXPECT_TRUE(modes[0].result->solution == modes[1].result->solution);
}

TEST(SolveModes, FailingModeDoesNotAbortSiblings) {
  const Scenario sc = head_on(20, 0.1);
  const auto sys = build_system(sc, head_on_params(sc));
  JointStrategy bad(2, 20, 0.1);
  bad.vector()(3) = std::numeric_limits<double>::quiet_NaN();
  const auto modes = solve_modes({sys, sys}, {JointStrategy(2, 20, 0.1), bad}, SolverConfig::adaptive(20));
  EXPECT_TRUE(modes[0].ok());
  EXPECT_FALSE(modes[1].ok());
  EXPECT_FALSE(modes[1].error.empty());
}

TEST(SolveModes, CountMismatchRejected) {
  const Scenario sc = head_on(20, 0.1);
  const auto sys = build_system(sc, head_on_params(sc));
  EXPECT_THROW(solve_modes({sys, sys}, {JointStrategy(2, 20, 0.1)}, SolverConfig::adaptive(5)), DimensionMismatch);
}

}  // namespace
}  // namespace epg
