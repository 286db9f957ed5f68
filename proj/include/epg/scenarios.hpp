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

#ifndef EPG_SCENARIOS_HPP_
#define EPG_SCENARIOS_HPP_

#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "epg/clustering.hpp"
#include "epg/energy.hpp"
#include "epg/game.hpp"
#include "epg/learning.hpp"
#include "epg/solver.hpp"

namespace epg {

struct MultistartSolution {
  JointStrategy strategy;
  JointTrajectory trajectory;
  double energy = 0.0;
  int start = 0;  // index of the start that produced it
};

struct MultistartResult {
  std::vector<MultistartSolution> solutions;
  int failures = 0;
};

/// Adaptive solves from `n_starts` initial strategies with controls drawn
/// i.i.d. from N(0, init_scale²). Failed starts are dropped and counted.
/// `extra_starts` are solved first (warm starts), before the random ones.
MultistartResult multistart_solve(const Scenario& scenario, const GameParams& params, int n_starts,
                                  std::uint64_t seed, const SolverConfig& cfg, double init_scale,
                                  const std::vector<JointStrategy>& extra_starts = {});

/// Robot-pedestrian crossing on a circle.
struct RPIConfig {
  int configs = 20;
  double circle_radius = 3.0;                       // [m]
  Eigen::Vector2d robot_start{-3.0, 0.0};           // [m]
  Eigen::Vector2d robot_goal{3.0, 0.0};             // [m]
  double pedestrian_angle_min = -0.5 * 3.14159265358979323846;  // [rad]
  double pedestrian_angle_max = 0.5 * 3.14159265358979323846;   // [rad]
  double initial_speed = 1.5;                       // [m/s]
  double dt = 0.1;                                  // [s]
  double history = 1.8;                             // [s]
  double horizon = 4.0;                             // [s]
  int modes = 2;
  int main_starts = 8;
  int sub_starts = 2;   // random starts per subgame, besides the warm starts
  double init_scale = 0.5;
  double collision_weight_min = 20.0;
  double collision_weight_max = 40.0;
  double radius = 0.25;            // physical radius [m]
  double collision_margin = 0.05;  // added to the radius inside the energy [m]
  double cluster_eps = 0.5;        // [m]
  FeatureSpec features = default_features();
  Eigen::VectorXd own_weights = default_own_weights();  // per feature, shared by both agents
  SolverConfig solver = SolverConfig::adaptive(100);
  std::uint64_t seed = 0;

  int history_steps() const;
  int horizon_steps() const;
  void validate() const;

  static FeatureSpec default_features();
  static Eigen::VectorXd default_own_weights();
};

/// Per-configuration record of the generating episode.
struct RPITrace {
  int config = 0;
  double pedestrian_angle = 0.0;
  double collision_weight = 0.0;
  JointTrajectory executed;  // main-game mode followed open loop
  int steps = 0;             // demonstrations emitted
  int main_modes = 0;
  int failures = 0;
};

struct RPIDataset {
  std::vector<Demonstration> demos;
  std::vector<RPITrace> traces;
};

/// Number of steps an episode runs: until the agents separate (closing
/// speed >= 0 and distance above the initial distance), capped at `cap`.
int passing_steps(const JointTrajectory& executed, double dt, int cap);

/// Game parameters the generator used for configuration `trace`.
GameParams rpi_params(const RPIConfig& cfg, double collision_weight);

/// Scenario at state x with the given trailing histories.
Scenario rpi_scenario(const RPIConfig& cfg, const JointState& x,
                      std::vector<std::vector<Eigen::Vector2d>> histories);

RPIDataset generate_rpi(const RPIConfig& cfg);

struct DatasetSplit {
  std::vector<Demonstration> train, val, test;
};

/// 80/10/10 split by generating configuration after a seeded shuffle of the
/// configuration indices.
DatasetSplit split_by_source(const std::vector<Demonstration>& demos, std::uint64_t seed);

}  // namespace epg

#endif  // EPG_SCENARIOS_HPP_
