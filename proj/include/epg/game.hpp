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

#ifndef EPG_GAME_HPP_
#define EPG_GAME_HPP_

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "epg/dynamics.hpp"
#include "epg/energy.hpp"
#include "epg/solver.hpp"

namespace epg {

/// Everything observed about a scene plus the game structure used to
/// explain it. Histories are carried for data compatibility only.
struct Scenario {
  JointState initial;
  std::vector<std::vector<Eigen::Vector2d>> histories;  // per agent, oldest first
  Eigen::VectorXd radii;                                // physical radii [m]
  double dt = 0.1;
  int horizon = 40;
  FeatureSpec features;

  int n_agents() const { return initial.size(); }
  void validate() const;
};

ResidualSystem build_system(const Scenario& scenario, const GameParams& params);

struct Mode {
  GameParams params;
  JointStrategy init;
  JointStrategy solution;
  JointTrajectory trajectory;
  double energy = 0.0;
  SolveReport report;
  bool failed = false;
  std::string error;
};

struct ModeSet {
  std::vector<Mode> modes;
  Eigen::VectorXd probabilities;

  int size() const { return static_cast<int>(modes.size()); }
  /// argmax of the probabilities, lowest index on ties.
  int most_likely() const;
};

/// Boltzmann weights softmax(-beta * E); entries flagged in `failed` get 0.
Eigen::VectorXd mode_probabilities(const Eigen::VectorXd& energies, double beta,
                                   const std::vector<bool>& failed = {});

/// Solves one game per mode, unrolls the solutions and weights the modes.
ModeSet predict(const Scenario& scenario, const std::vector<GameParams>& mode_params,
                const std::vector<JointStrategy>& inits, const SolverConfig& cfg, double beta = 1.0);

/// Deterministic initial strategies that bias the agents to swerve: agent i
/// turns with sign s_i for the first quarter of the horizon and back during
/// the second quarter. Mode m uses the m-th sign pattern
/// (+..+, -..-, then alternating patterns).
std::vector<JointStrategy> lateral_inits(const Scenario& scenario, int modes, double turn_rate = 0.8);

struct InitProposal {
  SolverConfig solver = SolverConfig::adaptive(60);
  double cluster_eps = 0.5;
  double turn_rate = 0.8;
};

/// Search-based initialisation: solves the game from the zero strategy and
/// from every lateral pattern, clusters the solutions and returns the M
/// lowest-energy representatives (repeated cyclically when fewer exist).
std::vector<JointStrategy> propose_inits(const Scenario& scenario, const GameParams& params,
                                         int modes, const InitProposal& proposal = {});

struct NashCertificate {
  double pass_fraction = 0.0;
  double worst_violation = 0.0;  // max of C_i(u*) - C_i(perturbed) - tol, <= 0 when all pass
  std::vector<double> pass_fraction_per_agent;
  std::vector<double> gradient_inf_norm;  // ‖∇_{u_i} C_i‖∞ per agent
  int trials = 0;
};

/// Empirical unilateral-deviation test of an open-loop Nash equilibrium:
/// for each agent, random perturbations with ‖e‖∞ <= delta of that agent's
/// controls only must not lower its own game cost by more than tol.
NashCertificate certify_local_nash(const ResidualSystem& sys, const JointStrategy& u, int trials,
                                   double delta, double tol, std::uint64_t seed = 0);

/// First control of agent `ego` in the most likely mode.
Control mpc_step(const ModeSet& modes, int ego);

struct MpcSettings {
  std::vector<GameParams> mode_params;
  SolverConfig solver = SolverConfig::adaptive(60);
  double beta = 1.0;
  InitProposal proposal;
};

struct AgentController {
  using Policy = std::function<Control(int step, const JointState& state)>;

  enum class Kind { scripted, mpc };
  Kind kind = Kind::scripted;
  Policy policy;
  MpcSettings mpc;

  static AgentController scripted(Policy p) {
    AgentController c;
    c.kind = Kind::scripted;
    c.policy = std::move(p);
    return c;
  }
  static AgentController zero() {
    return scripted([](int, const JointState&) { return Control{}; });
  }
  static AgentController model_predictive(MpcSettings s) {
    AgentController c;
    c.kind = Kind::mpc;
    c.mpc = std::move(s);
    return c;
  }
};

struct ClosedLoopStep {
  int step = 0;
  std::vector<int> chosen_mode;                   // -1 for scripted agents
  std::vector<std::vector<double>> mode_energies;  // per agent, empty for scripted
  double min_distance = 0.0;                       // closest pair after the step
};

struct ClosedLoopResult {
  JointTrajectory executed;
  JointStrategy applied;
  std::vector<ClosedLoopStep> log;
  int completed_steps = 0;
  bool aborted = false;
  std::string error;
};

/// Advances the true dynamics one step at a time. MPC agents re-solve their
/// game from the current state, warm-started from their previous solutions
/// shifted by one step, and apply mpc_step. A controller failure aborts and
/// returns the partial log.
ClosedLoopResult simulate_closed_loop(const Scenario& scenario,
                                      const std::vector<AgentController>& controllers, int steps);

double min_pairwise_distance(const JointState& state);

}  // namespace epg

#endif  // EPG_GAME_HPP_
