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

#include "epg/dynamics.hpp"

#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "epg/gradcheck.hpp"

namespace epg {
namespace {

constexpr double kPi = 3.14159265358979323846;

TEST(Step, StraightConstantSpeed) {
  const AgentState s = step({0, 0, 1, 0}, {0, 0}, 0.1);
  EXPECT_DOUBLE_EQ(s.x, 0.1);
  EXPECT_DOUBLE_EQ(s.y, 0.0);
  EXPECT_DOUBLE_EQ(s.v, 1.0);
  EXPECT_DOUBLE_EQ(s.theta, 0.0);
}

TEST(Step, MotionAlongY) {
  const AgentState s = step({0, 0, 2, kPi / 2}, {1, 0}, 0.1);
  EXPECT_NEAR(s.x, 0.0, 1e-15);
  EXPECT_DOUBLE_EQ(s.y, 0.2);
  EXPECT_DOUBLE_EQ(s.v, 2.1);
  EXPECT_DOUBLE_EQ(s.theta, kPi / 2);
}

TEST(Step, ZeroSpeedKeepsPosition) {
  const AgentState s = step({0, 0, 0, 0}, {2, 0.5}, 0.1);
  EXPECT_EQ(s.x, 0.0);
  EXPECT_EQ(s.y, 0.0);
  EXPECT_DOUBLE_EQ(s.v, 0.2);
  EXPECT_DOUBLE_EQ(s.theta, 0.05);
}

TEST(Step, RejectsNonFiniteAndBadDt) {
  EXPECT_THROW(step({NAN, 0, 0, 0}, {0, 0}, 0.1), InvalidInput);
  EXPECT_THROW(step({0, 0, 0, 0}, {INFINITY, 0}, 0.1), InvalidInput);
  EXPECT_THROW(step({0, 0, 0, 0}, {0, 0}, 0.0), InvalidInput);
  EXPECT_THROW(step({0, 0, 0, 0}, {0, 0}, -0.1), InvalidInput);
}

TEST(Rollout, ZeroControlPositions) {
  JointState x0;
  x0.agents.push_back({0, 0, 1, 0});
  const JointTrajectory t = rollout(x0, JointStrategy(1, 3, 0.1));
  ASSERT_EQ(t.horizon(), 3);
  for (int k = 1; k <= 3; ++k) {
    EXPECT_NEAR(t.position(0, k).x(), 0.1 * k, 1e-15);
    EXPECT_EQ(t.position(0, k).y(), 0.0);
  }
}

TEST(Rollout, HeadingAccumulatesWithoutWrap) {
  JointState x0;
  x0.agents.push_back({0, 0, 1, 0});
  JointStrategy u(1, 2, 0.1);
  u.omega(0, 0) = kPi;
  u.omega(0, 1) = kPi;
  const JointTrajectory t = rollout(x0, u);
  EXPECT_NEAR(t.state(0, 1).theta, 0.314159, 1e-6);
  EXPECT_NEAR(t.state(0, 2).theta, 0.628318, 1e-6);

  JointStrategy spin(1, 40, 0.1);
  for (int k = 0; k < 40; ++k) spin.omega(0, k) = 3.0;
  EXPECT_NEAR(rollout(x0, spin).state(0, 40).theta, 12.0, 1e-12);
}

TEST(Rollout, InitialStateIsFirstEntry) {
  JointState x0;
  x0.agents.push_back({1, 2, 3, 4});
  const JointTrajectory t = rollout(x0, JointStrategy(1, 5, 0.1));
  const AgentState s = t.state(0, 0);
  EXPECT_EQ(s.x, 1);
  EXPECT_EQ(s.y, 2);
  EXPECT_EQ(s.v, 3);
  EXPECT_EQ(s.theta, 4);
}

TEST(Rollout, DimensionMismatch) {
  JointState x0;
  x0.agents.push_back({0, 0, 1, 0});
  EXPECT_THROW(rollout(x0, JointStrategy(2, 3, 0.1)), DimensionMismatch);
  EXPECT_THROW(JointStrategy(1, 0, 0.1), DimensionMismatch);
  EXPECT_THROW(JointStrategy(1, 3, -0.1), InvalidInput);
}

class RandomRollout : public ::testing::TestWithParam<int> {
 protected:
  void SetUp() override {
    std::mt19937_64 rng(GetParam());
    std::uniform_real_distribution<double> pos(-2, 2), ctl(-2, 2), spd(0, 2), hdg(-3, 3);
    n = std::uniform_int_distribution<int>(1, 3)(rng);
    horizon = std::uniform_int_distribution<int>(1, 20)(rng);
    for (int i = 0; i < n; ++i) x0.agents.push_back({pos(rng), pos(rng), spd(rng), hdg(rng)});
    u = JointStrategy(n, horizon, 0.1);
    for (Eigen::Index k = 0; k < u.size(); ++k) u.vector()(k) = ctl(rng);
  }
  int n = 0;
  int horizon = 0;
  JointState x0;
  JointStrategy u;
};

TEST_P(RandomRollout, Deterministic) {
  EXPECT_TRUE(rollout(x0, u) == rollout(x0, u));
  EXPECT_TRUE(jacobian_rollout(x0, u).dense() == jacobian_rollout(x0, u).dense());
}

TEST_P(RandomRollout, DecoupledAcrossAgents) {
  const JointTrajectory joint = rollout(x0, u);
  for (int i = 0; i < n; ++i) {
    JointState xi;
    xi.agents.push_back(x0.agents[i]);
    JointStrategy ui(1, horizon, 0.1, u.agent_controls(i));
    const JointTrajectory single = rollout(xi, ui);
    EXPECT_TRUE(single.agent(0) == joint.agent(i));
  }
}

TEST_P(RandomRollout, JacobianMatchesFiniteDifferences) {
  const Eigen::MatrixXd analytic = jacobian_rollout(x0, u).dense();
  const Eigen::MatrixXd fd = central_difference(
      [&](const Eigen::VectorXd& v) { return flatten(rollout(x0, JointStrategy(n, horizon, 0.1, v))); }, u.vector(),
      1e-6);
  EXPECT_LT(max_relative_error(analytic, fd), 1e-5);
}

TEST_P(RandomRollout, JacobianCausalAndBlockDiagonal) {
  const Eigen::MatrixXd jac = jacobian_rollout(x0, u).dense();
  const Eigen::Index rows_per = Eigen::Index(kStateDim) * (horizon + 1);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const auto block = jac.block(i * rows_per, Eigen::Index(j) * horizon * kControlDim, rows_per,
                                   Eigen::Index(horizon) * kControlDim);
      if (i != j) {
        EXPECT_TRUE((block.array() == 0.0).all());
        continue;
      }
      for (int k = 0; k <= horizon; ++k) {
        for (int c = k; c < horizon; ++c) {
          for (int s = 0; s < kStateDim; ++s) {
            EXPECT_EQ(block(kStateDim * k + s, kControlDim * c), 0.0);
            EXPECT_EQ(block(kStateDim * k + s, kControlDim * c + 1), 0.0);
          }
        }
      }
    }
  }
}

INSTANTIATE_TEST_SUITE_P(Seeds, RandomRollout, ::testing::Range(0, 25));

TEST(JacobianRollout, StraightLineAccelerationSensitivity) {
  JointState x0;
  x0.agents.push_back({0, 0, 1, 0});
  const int horizon = 10;
  const double dt = 0.1;
  JointStrategy u(1, horizon, dt);
  for (int k = 0; k < horizon; ++k) u.a(0, k) = 0.3;
  const Eigen::MatrixXd jac = jacobian_rollout(x0, u).dense();
  for (int k = 0; k <= horizon; ++k) {
    for (int j = 0; j < horizon; ++j) {
      const double expected = j < k - 1 ? (k - 1 - j) * dt * dt : 0.0;
      EXPECT_NEAR(jac(kStateDim * k, kControlDim * j), expected, 1e-14) << "k=" << k << " j=" << j;
    }
  }
}

TEST(ShiftStrategy, RepeatsLastControl) {
  JointStrategy u(2, 3, 0.1);
  for (Eigen::Index k = 0; k < u.size(); ++k) u.vector()(k) = static_cast<double>(k);
  const JointStrategy s = shift_strategy(u);
  for (int i = 0; i < 2; ++i) {
    EXPECT_EQ(s.a(i, 0), u.a(i, 1));
    EXPECT_EQ(s.a(i, 1), u.a(i, 2));
    EXPECT_EQ(s.a(i, 2), u.a(i, 2));
    EXPECT_EQ(s.omega(i, 2), u.omega(i, 2));
  }
}

}  // namespace
}  // namespace epg
