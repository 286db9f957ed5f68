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

#include "epg/game.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "epg/clustering.hpp"
#include "epg/parallel.hpp"

namespace epg {

void Scenario::validate() const {
  epg::validate(initial);
  const int n = n_agents();
  if (!(dt > 0.0) || !std::isfinite(dt)) throw ConfigError("dt", "must be positive");
  if (horizon < 1) throw ConfigError("horizon", "must be >= 1");
  if (radii.size() != n) throw ConfigError("radii", "expected one radius per agent");
  if (!(radii.array() > 0.0).all()) throw ConfigError("radii", "must be positive");
  if (static_cast<int>(histories.size()) != n) {
    throw ConfigError("histories", "expected one history per agent");
  }
  for (const auto& h : histories) {
    if (h.empty()) throw ConfigError("histories", "each history needs at least one position");
    if (h.size() != histories.front().size()) {
      throw ConfigError("histories", "all histories must have equal length");
    }
  }
}

ResidualSystem build_system(const Scenario& scenario, const GameParams& params) {
  return build(scenario.features, params, scenario.initial, scenario.horizon, scenario.dt);
}

int ModeSet::most_likely() const {
  if (modes.empty() || probabilities.size() == 0) throw InvalidInput("empty mode set");
  int best = 0;
  for (int m = 1; m < probabilities.size(); ++m) {
    if (probabilities(m) > probabilities(best)) best = m;
  }
  return best;
}

Eigen::VectorXd mode_probabilities(const Eigen::VectorXd& energies, double beta,
                                   const std::vector<bool>& failed) {
  const Eigen::Index m = energies.size();
  auto is_failed = [&](Eigen::Index k) {
    return (k < static_cast<Eigen::Index>(failed.size()) && failed[k]) || !std::isfinite(energies(k));
  };
  double top = -std::numeric_limits<double>::infinity();
  for (Eigen::Index k = 0; k < m; ++k) {
    if (!is_failed(k)) top = std::max(top, -beta * energies(k));
  }
  if (!std::isfinite(top)) throw NumericalError("all modes failed");
  Eigen::VectorXd p = Eigen::VectorXd::Zero(m);
  for (Eigen::Index k = 0; k < m; ++k) {
    if (!is_failed(k)) p(k) = std::exp(-beta * energies(k) - top);
  }
  return p / p.sum();
}

ModeSet predict(const Scenario& scenario, const std::vector<GameParams>& mode_params,
                const std::vector<JointStrategy>& inits, const SolverConfig& cfg, double beta) {
  if (mode_params.empty()) throw InvalidInput("predict: need at least one mode");
  if (mode_params.size() != inits.size()) throw DimensionMismatch("predict: params vs inits");
  scenario.validate();
  std::vector<ResidualSystem> systems;
  systems.reserve(mode_params.size());
  for (const auto& p : mode_params) systems.push_back(build_system(scenario, p));
  const auto solved = solve_modes(systems, inits, cfg);

  ModeSet out;
  std::vector<bool> failed;
  Eigen::VectorXd energies(static_cast<Eigen::Index>(mode_params.size()));
  for (std::size_t m = 0; m < mode_params.size(); ++m) {
    Mode mode;
    mode.params = mode_params[m];
    mode.init = inits[m];
    if (solved[m].ok()) {
      mode.solution = solved[m].result->solution;
      mode.report = solved[m].result->report;
      mode.energy = mode.report.final_energy;
    } else {
      mode.solution = inits[m];
      mode.energy = std::numeric_limits<double>::infinity();
      mode.failed = true;
      mode.error = solved[m].error;
    }
    mode.trajectory = rollout(scenario.initial, mode.solution);
    energies(static_cast<Eigen::Index>(m)) = mode.energy;
    failed.push_back(mode.failed);
    out.modes.push_back(std::move(mode));
  }
  out.probabilities = mode_probabilities(energies, beta, failed);
  return out;
}

namespace {

std::vector<std::vector<double>> sign_patterns(int n_agents) {
  std::vector<std::vector<double>> patterns;
  patterns.emplace_back(n_agents, 1.0);
  patterns.emplace_back(n_agents, -1.0);
  const int limit = n_agents <= 10 ? (1 << n_agents) : 0;
  for (int bits = 1; bits + 1 < limit; ++bits) {
    std::vector<double> p(n_agents);
    for (int i = 0; i < n_agents; ++i) p[i] = (bits >> i) & 1 ? -1.0 : 1.0;
    patterns.push_back(std::move(p));
  }
  return patterns;
}

JointStrategy swerve(const Scenario& scenario, const std::vector<double>& signs, double turn_rate) {
  JointStrategy u(scenario.n_agents(), scenario.horizon, scenario.dt);
  const int quarter = std::max(1, scenario.horizon / 4);
  for (int i = 0; i < scenario.n_agents(); ++i) {
    for (int k = 0; k < std::min(2 * quarter, scenario.horizon); ++k) {
      u.omega(i, k) = (k < quarter ? 1.0 : -1.0) * signs[i] * turn_rate;
    }
  }
  return u;
}

}  // namespace

std::vector<JointStrategy> lateral_inits(const Scenario& scenario, int modes, double turn_rate) {
  if (modes < 1) throw InvalidInput("lateral_inits: modes must be >= 1");
  const auto patterns = sign_patterns(scenario.n_agents());
  std::vector<JointStrategy> out;
  for (int m = 0; m < modes; ++m) {
    out.push_back(swerve(scenario, patterns[m % patterns.size()], turn_rate));
  }
  return out;
}

std::vector<JointStrategy> propose_inits(const Scenario& scenario, const GameParams& params,
                                         int modes, const InitProposal& proposal) {
  if (modes < 1) throw InvalidInput("propose_inits: modes must be >= 1");
  const ResidualSystem sys = build_system(scenario, params);
  std::vector<JointStrategy> candidates{JointStrategy(scenario.n_agents(), scenario.horizon, scenario.dt)};
  for (const auto& p : sign_patterns(scenario.n_agents())) {
    candidates.push_back(swerve(scenario, p, proposal.turn_rate));
  }
  std::vector<JointStrategy> solutions;
  std::vector<JointTrajectory> trajectories;
  std::vector<double> energies;
  for (const auto& c : candidates) {
    try {
      auto res = solve(sys, c, proposal.solver);
      trajectories.push_back(rollout(scenario.initial, res.solution));
      energies.push_back(res.report.final_energy);
      solutions.push_back(std::move(res.solution));
    } catch (const NumericalError&) {
      // Skip candidates the solver cannot handle; others remain.
    }
  }
  if (solutions.empty()) throw NumericalError("propose_inits: every candidate failed");
  const ClusterResult clusters = cluster(trajectories, energies, proposal.cluster_eps);
  std::vector<int> reps = clusters.representatives;
  std::stable_sort(reps.begin(), reps.end(), [&](int a, int b) { return energies[a] < energies[b]; });
  std::vector<JointStrategy> out;
  for (int m = 0; m < modes; ++m) out.push_back(solutions[reps[m % reps.size()]]);
  return out;
}

NashCertificate certify_local_nash(const ResidualSystem& sys, const JointStrategy& u, int trials,
                                   double delta, double tol, std::uint64_t seed) {
  sys.check(u);
  NashCertificate cert;
  cert.trials = trials;
  cert.worst_violation = -std::numeric_limits<double>::infinity();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  const int n = sys.n_agents();
  int passed_total = 0;
  for (int i = 0; i < n; ++i) {
    const double base = sys.per_agent_cost(u, i);
    int passed = 0;
    for (int t = 0; t < trials; ++t) {
      JointStrategy pert = u;
      for (auto& e : pert.agent_controls(i)) e += delta * unit(rng);
      const double violation = base - sys.per_agent_cost(pert, i) - tol;
      cert.worst_violation = std::max(cert.worst_violation, violation);
      if (violation <= 0.0) ++passed;
    }
    passed_total += passed;
    cert.pass_fraction_per_agent.push_back(trials > 0 ? double(passed) / trials : 1.0);
    cert.gradient_inf_norm.push_back(agent_cost_gradient(sys, u, i).lpNorm<Eigen::Infinity>());
  }
  cert.pass_fraction = trials > 0 ? double(passed_total) / (double(trials) * n) : 1.0;
  if (trials == 0) cert.worst_violation = 0.0;
  return cert;
}

Control mpc_step(const ModeSet& modes, int ego) {
  const int best = modes.most_likely();
  const JointStrategy& u = modes.modes[best].solution;
  if (ego < 0 || ego >= u.n_agents()) throw std::out_of_range("ego index " + std::to_string(ego));
  return u.control(ego, 0);
}

double min_pairwise_distance(const JointState& state) {
  double best = std::numeric_limits<double>::infinity();
  for (int i = 0; i < state.size(); ++i) {
    for (int j = i + 1; j < state.size(); ++j) {
      best = std::min(best, std::hypot(state.agents[i].x - state.agents[j].x,
                                       state.agents[i].y - state.agents[j].y));
    }
  }
  return best;
}

ClosedLoopResult simulate_closed_loop(const Scenario& scenario,
                                      const std::vector<AgentController>& controllers, int steps) {
  scenario.validate();
  const int n = scenario.n_agents();
  if (static_cast<int>(controllers.size()) != n) {
    throw DimensionMismatch("simulate_closed_loop: one controller per agent required");
  }
  if (steps < 1) throw InvalidInput("simulate_closed_loop: steps must be >= 1");

  ClosedLoopResult out;
  std::vector<JointState> states{scenario.initial};
  std::vector<std::vector<Control>> applied;
  std::vector<std::vector<JointStrategy>> warm(n);
  Scenario current = scenario;

  try {
    for (int t = 0; t < steps; ++t) {
      ClosedLoopStep entry;
      entry.step = t;
      entry.chosen_mode.assign(n, -1);
      entry.mode_energies.resize(n);
      std::vector<Control> controls(n);
      for (int i = 0; i < n; ++i) {
        const AgentController& ctl = controllers[i];
        if (ctl.kind == AgentController::Kind::scripted) {
          controls[i] = ctl.policy(t, current.initial);
          continue;
        }
        const int modes = static_cast<int>(ctl.mpc.mode_params.size());
        std::vector<JointStrategy> inits;
        if (warm[i].empty()) {
          inits = propose_inits(current, ctl.mpc.mode_params.front(), modes, ctl.mpc.proposal);
        } else {
          for (const auto& w : warm[i]) inits.push_back(shift_strategy(w));
        }
        const ModeSet ms = predict(current, ctl.mpc.mode_params, inits, ctl.mpc.solver, ctl.mpc.beta);
        controls[i] = mpc_step(ms, i);
        entry.chosen_mode[i] = ms.most_likely();
        warm[i].clear();
        for (const auto& mode : ms.modes) {
          warm[i].push_back(mode.solution);
          entry.mode_energies[i].push_back(mode.energy);
        }
      }
      JointState next = current.initial;
      for (int i = 0; i < n; ++i) next.agents[i] = step(current.initial.agents[i], controls[i], scenario.dt);
      for (int i = 0; i < n; ++i) {
        auto& h = current.histories[i];
        h.emplace_back(next.agents[i].x, next.agents[i].y);
        if (h.size() > scenario.histories[i].size()) h.erase(h.begin());
      }
      current.initial = next;
      entry.min_distance = min_pairwise_distance(next);
      states.push_back(next);
      applied.push_back(controls);
      out.log.push_back(std::move(entry));
      ++out.completed_steps;
    }
  } catch (const std::exception& e) {
    out.aborted = true;
    out.error = e.what();
  }

  const int done = out.completed_steps;
  out.executed = JointTrajectory(n, done);
  for (int k = 0; k <= done; ++k) {
    for (int i = 0; i < n; ++i) out.executed.set_state(i, k, states[k].agents[i]);
  }
  if (done > 0) {
    out.applied = JointStrategy(n, done, scenario.dt);
    for (int k = 0; k < done; ++k) {
      for (int i = 0; i < n; ++i) out.applied.set_control(i, k, applied[k][i]);
    }
  }
  return out;
}

}  // namespace epg
