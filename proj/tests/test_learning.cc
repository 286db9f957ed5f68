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

#include "epg/learning.hpp"

#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "epg/gradcheck.hpp"
#include "epg/metrics.hpp"

namespace epg {
namespace {

constexpr double kPi = 3.14159265358979323846;

JointTrajectory straight_line(int horizon, double y) {
  JointTrajectory t(1, horizon);
  for (int k = 0; k <= horizon; ++k) t.set_state(0, k, {0.1 * k, y, 1.0, 0.0});
  return t;
}

TEST(ImitationLoss, ExactModeIsZero) {
  const JointTrajectory gt = straight_line(40, 0.0);
  EXPECT_EQ(loss_imitation(std::vector<JointTrajectory>{gt}, gt), 0.0);
}

TEST(ImitationLoss, UnitOffsetOverFortySteps) {
  const JointTrajectory gt = straight_line(40, 0.0);
  EXPECT_DOUBLE_EQ(loss_imitation(std::vector<JointTrajectory>{straight_line(40, 1.0)}, gt), 40.0);
}

TEST(ImitationLoss, MinPicksExactMode) {
  const JointTrajectory gt = straight_line(40, 0.0);
  EXPECT_EQ(loss_imitation(std::vector<JointTrajectory>{straight_line(40, 1.0), gt}, gt), 0.0);
}

TEST(ProbLoss, Examples) {
  const JointTrajectory gt = straight_line(5, 0.0);
  const std::vector<JointTrajectory> far_first{straight_line(5, 1.0), gt};
  EXPECT_NEAR(loss_prob(Eigen::VectorXd(Eigen::Vector2d(0.5, 0.5)), far_first, gt), 0.693147, 1e-6);
  EXPECT_EQ(loss_prob(Eigen::VectorXd(Eigen::Vector2d(0.0, 1.0)), far_first, gt), 0.0);
  EXPECT_NEAR(loss_prob(Eigen::VectorXd(Eigen::Vector2d(0.9, 0.1)), far_first, gt), 2.302585, 1e-6);
}

TEST(GoalLoss, Examples) {
  Eigen::Matrix2Xd gt(2, 1);
  gt << 1, 2;
  Eigen::Matrix2Xd off(2, 1);
  off << 4, 6;
  EXPECT_EQ(loss_goal(std::vector<Eigen::Matrix2Xd>{gt}, gt), 0.0);
  EXPECT_DOUBLE_EQ(loss_goal(std::vector<Eigen::Matrix2Xd>{off}, gt), 25.0);
  EXPECT_EQ(loss_goal(std::vector<Eigen::Matrix2Xd>{off, gt}, gt), 0.0);
}

TEST(Softmax, MatchesModeProbabilities) {
  const Eigen::VectorXd e = Eigen::Vector3d(1.0, 4.0, 2.5);
  EXPECT_LT((softmax_neg(e, 0.7) - mode_probabilities(e, 0.7)).lpNorm<Eigen::Infinity>(), 1e-15);
}

// Randomized head-on swap between x = -2 and x = 2.
struct SwapFamily {
  FeatureSpec spec;
  GameParams truth;
  int horizon = 20;

  SwapFamily() {
    spec.own_features = {Feature::goal, Feature::vel, Feature::acc, Feature::turnr};
    truth = uniform_params(spec, 2, 1.0, 20.0, 0.3);
    for (int i = 0; i < 2; ++i) truth.own_weights.row(i) << 2.0, 0.3, 0.5, 0.5;
  }

  Demonstration sample(std::mt19937_64& rng, int source) const {
    std::uniform_real_distribution<double> jit(-0.3, 0.3), speed(0.5, 1.5);
    Demonstration d;
    Scenario& sc = d.scenario;
    sc.initial.agents = {{-2 + jit(rng), jit(rng), speed(rng), 0.0}, {2 + jit(rng), jit(rng), speed(rng), kPi}};
    for (const auto& a : sc.initial.agents) sc.histories.push_back({Eigen::Vector2d(a.x, a.y)});
    sc.radii = Eigen::Vector2d(0.25, 0.25);
    sc.horizon = horizon;
    sc.features = spec;
    d.gt_goals.resize(2, 2);
    d.gt_goals << 2 + jit(rng), -2 + jit(rng), jit(rng), jit(rng);
    GameParams p = truth;
    p.goals = d.gt_goals;
    const JointStrategy init = propose_inits(sc, p, 1).front();
    const SolveResult sol = solve(build_system(sc, p), init, SolverConfig::adaptive(100));
    d.gt_futures = {rollout(sc.initial, sol.solution)};
    d.gt_strategies = {sol.solution};
    d.source = source;
    return d;
  }
};

LearnConfig unrolled_config() {
  LearnConfig c;
  c.inner.steps = 2;
  c.inner.step_size = 1.0;
  c.inner.damping = 1e-2;
  return c;
}

TEST(LearnConfig, Validation) {
  LearnConfig c = unrolled_config();
  c.validate();
  EXPECT_EQ(c.lambda_imit, 1.0);
  EXPECT_EQ(c.lambda_goal, 0.1);
  EXPECT_EQ(c.lambda_prob, 0.1);
  c.inner.mode = SolverMode::adaptive;
  EXPECT_THROW(c.validate(), ConfigError);
  c = unrolled_config();
  c.learning_rate = -0.1;
  EXPECT_THROW(c.validate(), ConfigError);
  c = unrolled_config();
  c.batch_size = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = unrolled_config();
  c.lambda_prob = -1;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(ParameterLayout, RoundTripAndNames) {
  SwapFamily fam;
  Model m;
  m.params = fam.truth;
  m.modes = 2;
  m.inits = {JointStrategy(2, 20, 0.1), JointStrategy(2, 20, 0.1)};
  LearnableSet all{true, true, true, true};
  const ParameterLayout layout(all, m);
  EXPECT_EQ(layout.size(), 8 + 1 + 4 + 2 * 80);
  const Eigen::VectorXd theta = layout.encode(m);
  EXPECT_NEAR(theta(0), std::log(2.0), 1e-15);
  const Model back = layout.decode(theta, m);
  EXPECT_LT((back.params.own_weights - m.params.own_weights).cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_LT((back.params.pair_weights - m.params.pair_weights).cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_FALSE(layout.name(0).empty());
  EXPECT_NE(layout.name(0), layout.name(layout.size() - 1));
}

TEST(OuterGradient, ZeroLossWeightsZeroGradient) {
  SwapFamily fam;
  std::mt19937_64 rng(1);
  const Demonstration d = fam.sample(rng, 0);
  Model m;
  m.params = fam.truth;
  m.params.own_weights *= 0.5;
  LearnConfig c = unrolled_config();
  c.lambda_imit = c.lambda_goal = c.lambda_prob = 0.0;
  c.learnable = {true, true, false, false};
  const OuterGradient g = outer_gradient(d, m, c, starting_inits(d, m, c));
  EXPECT_EQ(g.loss.total, 0.0);
  EXPECT_TRUE((g.gradient.array() == 0.0).all());
}

TEST(OuterGradient, IdentitySolverGivesDirectInitGradient) {
  SwapFamily fam;
  std::mt19937_64 rng(2);
  const Demonstration d = fam.sample(rng, 0);
  Model m;
  m.params = fam.truth;
  std::normal_distribution<double> nd(0, 0.3);
  JointStrategy init(2, fam.horizon, 0.1);
  for (Eigen::Index k = 0; k < init.size(); ++k) init.vector()(k) = nd(rng);
  m.inits = {init};
  LearnConfig c = unrolled_config();
  c.inner.steps = 0;
  c.lambda_goal = c.lambda_prob = 0.0;
  c.learnable = {false, false, false, true};
  const OuterGradient g = outer_gradient(d, m, c, {});
  const Eigen::MatrixXd fd = central_difference(
      [&](const Eigen::VectorXd& u) {
        const JointStrategy s(2, fam.horizon, 0.1, u);
        return Eigen::VectorXd::Constant(1, imitation_error(rollout(d.scenario.initial, s), d.gt_futures[0]));
      },
      init.vector(), 1e-6);
  EXPECT_LT(max_relative_error(g.gradient.transpose(), fd), 1e-6);
}

TEST(OuterGradient, LossDecomposition) {
  SwapFamily fam;
  std::mt19937_64 rng(3);
  const Demonstration d = fam.sample(rng, 0);
  Model m;
  m.params = fam.truth;
  m.params.own_weights *= 0.7;
  m.modes = 2;
  LearnConfig c = unrolled_config();
  c.lambda_imit = 0.8;
  c.lambda_goal = 0.3;
  c.lambda_prob = 0.2;
  c.learnable = {true, false, true, false};
  m.params.goals = d.gt_goals;
  m.params.goals(0, 0) += 0.4;
  const OuterGradient g = outer_gradient(d, m, c, starting_inits(d, m, c));
  EXPECT_GT(g.loss.goal, 0.0);
  EXPECT_GT(g.loss.prob, 0.0);
  EXPECT_DOUBLE_EQ(g.loss.total, 0.8 * g.loss.imitation + 0.3 * g.loss.goal + 0.2 * g.loss.prob);
}

TEST(OuterGradient, MissingGroundTruthGoalsIsConfigError) {
  SwapFamily fam;
  std::mt19937_64 rng(4);
  Demonstration d = fam.sample(rng, 0);
  d.gt_goals.resize(2, 0);
  Model m;
  m.params = fam.truth;
  LearnConfig c = unrolled_config();
  c.lambda_goal = 0.1;
  c.learnable = {true, false, true, false};
  EXPECT_THROW(outer_gradient(d, m, c, lateral_inits(d.scenario, 1)), ConfigError);
}

TEST(OuterGradient, MatchesFiniteDifferences) {
  for (int seed = 0; seed < 10; ++seed) {
    std::mt19937_64 rng(seed);
    const OuterCheck r = check_outer_gradient(rng);
    EXPECT_LT(r.max_rel_err, 1e-4) << "seed " << seed << " S=" << r.steps << " P=" << r.parameters;
  }
}

TEST(Fit, ZeroLearningRateKeepsParams) {
  SwapFamily fam;
  std::mt19937_64 rng(5);
  const std::vector<Demonstration> data{fam.sample(rng, 0), fam.sample(rng, 1)};
  Model m;
  m.params = fam.truth;
  LearnConfig c = unrolled_config();
  c.learning_rate = 0.0;
  c.outer_steps = 3;
  for (OuterOptimizer opt : {OuterOptimizer::sgd, OuterOptimizer::adam}) {
    c.optimizer = opt;
    const FitResult r = fit(data, m, c);
    EXPECT_EQ(r.model.params.own_weights, m.params.own_weights);
    EXPECT_EQ(r.loss_curve.size(), 3u);
  }
}

TEST(Fit, ZeroEpochs) {
  SwapFamily fam;
  std::mt19937_64 rng(5);
  const std::vector<Demonstration> data{fam.sample(rng, 0)};
  Model m;
  m.params = fam.truth;
  LearnConfig c = unrolled_config();
  c.outer_steps = 0;
  const FitResult r = fit(data, m, c);
  EXPECT_TRUE(r.loss_curve.empty());
  EXPECT_EQ(r.epochs, 0);
  EXPECT_EQ(r.model.params.own_weights, m.params.own_weights);
}

TEST(Fit, EmptyDatasetRejected) {
  SwapFamily fam;
  Model m;
  m.params = fam.truth;
  EXPECT_THROW(fit({}, m, unrolled_config()), InvalidInput);
}

TEST(Fit, DeterministicGivenSeed) {
  SwapFamily fam;
  std::mt19937_64 rng(6);
  std::vector<Demonstration> data;
  for (int s = 0; s < 4; ++s) data.push_back(fam.sample(rng, s));
  Model m;
  m.params = fam.truth;
  m.params.own_weights.col(1) *= 3.0;
  LearnConfig c = unrolled_config();
  c.outer_steps = 3;
  c.batch_size = 2;
  const FitResult a = fit(data, m, c);
  const FitResult b = fit(data, m, c);
  EXPECT_EQ(a.loss_curve, b.loss_curve);
  EXPECT_EQ(a.model.params.own_weights, b.model.params.own_weights);
}

// S = 0 turns learning into direct strategy regression.
TEST(Fit, IdentitySolverRegressesDemo) {
  SwapFamily fam;
  fam.horizon = 10;
  std::mt19937_64 rng(7);
  const Demonstration d = fam.sample(rng, 0);
  Model m;
  m.params = fam.truth;
  m.inits = {JointStrategy(2, fam.horizon, 0.1)};
  LearnConfig c = unrolled_config();
  c.inner.steps = 0;
  c.lambda_goal = c.lambda_prob = 0.0;
  c.learnable = {false, false, false, true};
  c.optimizer = OuterOptimizer::sgd;
  c.learning_rate = 5.0;
  c.outer_steps = 3000;
  const FitResult r = fit({d}, m, c);
  EXPECT_LT(r.loss_curve.back(), 1e-6);
  c.outer_steps = 0;
  const OuterGradient g = outer_gradient(d, r.model, c, {});
  EXPECT_LT(g.loss.imitation, 1e-6);
}

// Recovery from demonstrations generated with known weights.
TEST(Fit, RecoversSwapWeights) {
  SwapFamily fam;
  std::mt19937_64 rng(7);
  std::vector<Demonstration> train, held_out;
  for (int s = 0; s < 50; ++s) (s < 40 ? train : held_out).push_back(fam.sample(rng, s));

  Model m;
  m.params = fam.truth;
  m.modes = 2;
  const Eigen::RowVector4d factors(0.3, 3.0, 0.3, 3.0);
  for (int i = 0; i < 2; ++i) m.params.own_weights.row(i) = m.params.own_weights.row(i).cwiseProduct(factors);
  LearnConfig c = unrolled_config();
  c.outer_steps = 15;
  c.batch_size = 8;
  c.learning_rate = 0.05;

  auto held_out_sade = [&](const Model& model) {
    std::vector<SampleMetrics> s;
    for (const auto& d : held_out) s.push_back(sample_metrics(predict_demo(d, model, c), d.gt_futures, d.scenario.radii));
    return summarize(s).min_sade;
  };
  const double before = held_out_sade(m);
  const FitResult r = fit(train, m, c);
  const double after = held_out_sade(r.model);
  EXPECT_GT(before, 0.5);
  EXPECT_LT(after, 0.05);
  EXPECT_LT(r.loss_curve.back(), 0.5 * r.loss_curve.front());
  EXPECT_TRUE((r.model.params.own_weights.array() > 0.0).all());
}

}  // namespace
}  // namespace epg
