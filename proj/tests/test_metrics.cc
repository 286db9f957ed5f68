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

#include "epg/metrics.hpp"

#include <random>

#include <gtest/gtest.h>

#include "metric_oracle.hpp"

namespace epg {
namespace {

JointTrajectory straight(int n, int horizon, const std::vector<double>& y) {
  JointTrajectory t(n, horizon);
  for (int i = 0; i < n; ++i) {
    for (int k = 0; k <= horizon; ++k) t.set_state(i, k, {0.1 * k, y[i], 1.0, 0.0});
  }
  return t;
}

ModeSet modes_of(const std::vector<JointTrajectory>& trajs) {
  ModeSet m;
  for (const auto& t : trajs) {
    Mode mode;
    mode.trajectory = t;
    m.modes.push_back(mode);
  }
  m.probabilities = Eigen::VectorXd::Constant(static_cast<int>(trajs.size()), 1.0 / trajs.size());
  return m;
}

JointTrajectory relabel(const JointTrajectory& t, const std::vector<int>& perm) {
  JointTrajectory out(t.n_agents(), t.horizon());
  for (int i = 0; i < t.n_agents(); ++i) out.agent(i) = t.agent(perm[i]);
  return out;
}

TEST(Displacement, ExactModeGivesZero) {
  const JointTrajectory gt = straight(2, 5, {0, 1});
  const ModeSet m = modes_of({straight(2, 5, {3, 3}), gt});
  EXPECT_EQ(min_ade_fde(m, gt), std::make_pair(0.0, 0.0));
  EXPECT_EQ(min_sade_sfde(m, gt), std::make_pair(0.0, 0.0));
}

TEST(Displacement, ConstantOffset) {
  const auto [ade, fde] = min_ade_fde(modes_of({straight(1, 8, {1})}), straight(1, 8, {0}));
  EXPECT_DOUBLE_EQ(ade, 1.0);
  EXPECT_DOUBLE_EQ(fde, 1.0);
}

TEST(Displacement, MarginalVersusJoint) {
  const JointTrajectory gt = straight(2, 5, {0, 1});
  const ModeSet m = modes_of({straight(2, 5, {0, 5}), straight(2, 5, {4, 1})});
  EXPECT_EQ(min_ade_fde(m, gt).first, 0.0);
  EXPECT_GT(min_sade_sfde(m, gt).first, 0.0);
}

TEST(Displacement, SceneAverageOverAgents) {
  const auto [sade, sfde] = min_sade_sfde(modes_of({straight(2, 6, {1, 4})}), straight(2, 6, {0, 1}));
  EXPECT_DOUBLE_EQ(sade, 2.0);
  EXPECT_DOUBLE_EQ(sfde, 2.0);
}

TEST(Displacement, InitialStateIsExcluded) {
  JointTrajectory p = straight(1, 4, {0});
  p.set_state(0, 0, {10, 10, 1, 0});
  EXPECT_EQ(min_ade_fde(modes_of({p}), straight(1, 4, {0})).first, 0.0);
}

TEST(Displacement, ShapeErrors) {
  EXPECT_THROW(min_ade_fde(std::vector<JointTrajectory>{}, straight(1, 3, {0})), InvalidInput);
  EXPECT_THROW(min_sade_sfde(modes_of({straight(1, 4, {0})}), straight(1, 3, {0})), DimensionMismatch);
  EXPECT_THROW(min_sade_sfde(modes_of({straight(2, 3, {0, 0})}), straight(1, 3, {0})), DimensionMismatch);
}

TEST(Overlap, FarApartIsZero) {
  EXPECT_EQ(overlap(straight(2, 10, {0, 1.0}), Eigen::Vector2d(0.25, 0.25)), 0);
}

TEST(Overlap, CoincidentAtOneStep) {
  JointTrajectory t = straight(2, 10, {0, 1.0});
  t.set_state(1, 4, t.state(0, 4));
  EXPECT_EQ(overlap(t, Eigen::Vector2d(0.25, 0.25)), 1);
}

TEST(Overlap, TangencyDoesNotCount) {
  EXPECT_EQ(overlap(straight(2, 10, {0, 0.5}), Eigen::Vector2d(0.25, 0.25)), 0);
}

TEST(Overlap, UsesMostLikelyModeOnly) {
  ModeSet m = modes_of({straight(2, 5, {0, 1.0}), straight(2, 5, {0, 0.1})});
  const Eigen::Vector2d r(0.25, 0.25);
  m.probabilities << 0.7, 0.3;
  EXPECT_EQ(overlap_rate(m, r), 0);
  m.probabilities << 0.3, 0.7;
  EXPECT_EQ(overlap_rate(m, r), 1);
}

TEST(ConstantVelocity, StraightLine) {
  Scenario sc;
  sc.initial.agents = {{0, 0, 1, 0}};
  sc.histories = {{{0, 0}}};
  sc.radii = Eigen::VectorXd::Constant(1, 0.25);
  sc.horizon = 40;
  sc.features.own_features = {Feature::vel};
  const ModeSet cv = cv_baseline(sc);
  ASSERT_EQ(cv.size(), 1);
  EXPECT_EQ(cv.probabilities(0), 1.0);
  EXPECT_NEAR(cv.modes[0].trajectory.position(0, 40).x(), 4.0, 1e-12);
  EXPECT_EQ(cv.modes[0].trajectory.position(0, 40).y(), 0.0);
}

TEST(ConstantVelocity, ZeroSpeedStaysPut) {
  Scenario sc;
  sc.initial.agents = {{1, 2, 0, 0.7}, {-1, 0, 0, 0}};
  sc.histories = {{{1, 2}}, {{-1, 0}}};
  sc.radii = Eigen::Vector2d(0.25, 0.25);
  sc.horizon = 12;
  sc.features.own_features = {Feature::vel};
  const JointTrajectory t = cv_baseline(sc).modes[0].trajectory;
  for (int k = 0; k <= 12; ++k) {
    EXPECT_EQ(t.position(0, k), Eigen::Vector2d(1, 2));
    EXPECT_EQ(t.position(1, k), Eigen::Vector2d(-1, 0));
  }
}

TEST(Summary, AveragesSamples) {
  const MetricReport r = summarize({{1, 2, 3, 4, 0}, {3, 4, 5, 6, 1}});
  EXPECT_EQ(r.sample_count, 2);
  EXPECT_EQ(r.min_ade, 2.0);
  EXPECT_EQ(r.min_sfde, 5.0);
  EXPECT_EQ(r.overlap_rate, 0.5);
  EXPECT_EQ(r.samples.size(), 2u);
  EXPECT_EQ(summarize({}).sample_count, 0);
}

TEST(Summary, MultipleFuturesAreAveraged) {
  const ModeSet m = modes_of({straight(1, 4, {0})});
  const SampleMetrics s = sample_metrics(m, {straight(1, 4, {1}), straight(1, 4, {3})}, Eigen::VectorXd::Ones(1));
  EXPECT_DOUBLE_EQ(s.min_sade, 2.0);
  EXPECT_THROW(sample_metrics(m, {}, Eigen::VectorXd::Ones(1)), InvalidInput);
}

class RandomMetrics : public ::testing::TestWithParam<int> {};

TEST_P(RandomMetrics, MatchesBruteForce) {
  std::mt19937_64 rng(GetParam());
  const oracle::Instance in = oracle::random_instance(rng);
  const oracle::Values want = oracle::brute_force(in);
  const auto [ade, fde] = min_ade_fde(in.pred, in.gt);
  const auto [sade, sfde] = min_sade_sfde(in.pred, in.gt);
  EXPECT_EQ(ade, want.ade);
  EXPECT_EQ(fde, want.fde);
  EXPECT_EQ(sade, want.sade);
  EXPECT_EQ(sfde, want.sfde);
  EXPECT_EQ(overlap_rate(in.pred, in.radii), want.overlap);
}

TEST_P(RandomMetrics, SingleModeMarginalEqualsJoint) {
  std::mt19937_64 rng(GetParam());
  oracle::Instance in = oracle::random_instance(rng);
  in.pred.modes.resize(1);
  in.pred.probabilities = Eigen::VectorXd::Ones(1);
  const auto marginal = min_ade_fde(in.pred, in.gt);
  const auto joint = min_sade_sfde(in.pred, in.gt);
  EXPECT_NEAR(marginal.first, joint.first, 1e-12);
  EXPECT_NEAR(marginal.second, joint.second, 1e-12);
}

TEST_P(RandomMetrics, JointIsNeverBelowMarginal) {
  std::mt19937_64 rng(GetParam());
  const oracle::Instance in = oracle::random_instance(rng);
  EXPECT_GE(min_sade_sfde(in.pred, in.gt).first + 1e-12, min_ade_fde(in.pred, in.gt).first);
  EXPECT_GE(min_sade_sfde(in.pred, in.gt).second + 1e-12, min_ade_fde(in.pred, in.gt).second);
}

TEST_P(RandomMetrics, RelabelingAgentsLeavesMetricsUnchanged) {
  std::mt19937_64 rng(GetParam());
  const oracle::Instance in = oracle::random_instance(rng);
  const int n = in.gt.n_agents();
  std::vector<int> perm(n);
  for (int i = 0; i < n; ++i) perm[i] = (i + 1) % n;
  oracle::Instance p = in;
  p.gt = relabel(in.gt, perm);
  for (auto& m : p.pred.modes) m.trajectory = relabel(m.trajectory, perm);
  for (int i = 0; i < n; ++i) p.radii(i) = in.radii(perm[i]);
  EXPECT_NEAR(min_ade_fde(p.pred, p.gt).first, min_ade_fde(in.pred, in.gt).first, 1e-12);
  EXPECT_NEAR(min_ade_fde(p.pred, p.gt).second, min_ade_fde(in.pred, in.gt).second, 1e-12);
  EXPECT_NEAR(min_sade_sfde(p.pred, p.gt).first, min_sade_sfde(in.pred, in.gt).first, 1e-12);
  EXPECT_NEAR(min_sade_sfde(p.pred, p.gt).second, min_sade_sfde(in.pred, in.gt).second, 1e-12);
  EXPECT_EQ(overlap_rate(p.pred, p.radii), overlap_rate(in.pred, in.radii));
}

INSTANTIATE_TEST_SUITE_P(Seeds, RandomMetrics, ::testing::Range(0, 50));

}  // namespace
}  // namespace epg
