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

#include "epg/scenarios.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "epg/parallel.hpp"

namespace epg {

MultistartResult multistart_solve(const Scenario& scenario, const GameParams& params, int n_starts,
                                  std::uint64_t seed, const SolverConfig& cfg, double init_scale,
                                  const std::vector<JointStrategy>& extra_starts) {
  if (n_starts < 0 || (n_starts == 0 && extra_starts.empty())) {
    throw InvalidInput("multistart_solve: n_starts must be >= 1");
  }
  if (!(init_scale >= 0.0)) throw InvalidInput("multistart_solve: init_scale must be >= 0");
  const ResidualSystem sys = build_system(scenario, params);
  std::vector<JointStrategy> starts = extra_starts;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (int s = 0; s < n_starts; ++s) {
    JointStrategy u(scenario.n_agents(), scenario.horizon, scenario.dt);
    for (Eigen::Index j = 0; j < u.size(); ++j) u.vector()(j) = init_scale * gauss(rng);
    starts.push_back(std::move(u));
  }
  MultistartResult out;
  for (std::size_t s = 0; s < starts.size(); ++s) {
    try {
      auto res = solve(sys, starts[s], cfg);
      MultistartSolution sol;
      sol.trajectory = rollout(scenario.initial, res.solution);
      sol.energy = res.report.final_energy;
      sol.strategy = std::move(res.solution);
      sol.start = static_cast<int>(s);
      out.solutions.push_back(std::move(sol));
    } catch (const NumericalError&) {
      ++out.failures;
    }
  }
  return out;
}

FeatureSpec RPIConfig::default_features() {
  FeatureSpec f;
  f.own_features = {Feature::goal, Feature::vel, Feature::acc, Feature::turnr,
                    Feature::velb, Feature::accb, Feature::turnrb};
  f.collision = true;
  f.collision_stride = 1;
  f.bounds.v_max = 2.5;
  f.bounds.a_max = 3.0;
  f.bounds.omega_max = 2.0;
  return f;
}

Eigen::VectorXd RPIConfig::default_own_weights() {
  Eigen::VectorXd w(7);
  w << 2.0, 0.3, 0.5, 0.5, 2.0, 2.0, 2.0;
  return w;
}

namespace {

int steps_of(double seconds, double dt, const char* field) {
  const double ratio = seconds / dt;
  const long r = std::lround(ratio);
  if (r < 1 || std::abs(ratio - r) > 1e-9 * std::max(1.0, ratio)) {
    throw ConfigError(field, "must be a positive integer multiple of dt");
  }
  return static_cast<int>(r);
}

// Positions along straight constant-velocity motion ending at the state.
std::vector<Eigen::Vector2d> backward_history(const AgentState& s, int steps, double dt) {
  std::vector<Eigen::Vector2d> h;
  for (int k = steps - 1; k >= 0; --k) {
    h.emplace_back(s.x - k * dt * s.v * std::cos(s.theta), s.y - k * dt * s.v * std::sin(s.theta));
  }
  return h;
}

std::vector<int> top_modes(const MultistartResult& ms, double eps, int modes) {
  std::vector<JointTrajectory> trajs;
  std::vector<double> energies;
  for (const auto& s : ms.solutions) {
    trajs.push_back(s.trajectory);
    energies.push_back(s.energy);
  }
  const ClusterResult c = cluster(trajs, energies, eps);
  std::vector<int> reps(c.representatives.begin(),
                        c.representatives.begin() + std::min<std::size_t>(modes, c.representatives.size()));
  return reps;
}

}  // namespace

int RPIConfig::history_steps() const { return steps_of(history, dt, "history"); }
int RPIConfig::horizon_steps() const { return steps_of(horizon, dt, "horizon"); }

void RPIConfig::validate() const {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw ConfigError("dt", "must be positive");
  history_steps();
  horizon_steps();
  if (configs < 1) throw ConfigError("configs", "must be >= 1");
  if (!(circle_radius > 0.0)) throw ConfigError("circle_radius", "must be positive");
  if (!(pedestrian_angle_min <= pedestrian_angle_max)) throw ConfigError("pedestrian_angle", "min exceeds max");
  if (!(initial_speed >= 0.0)) throw ConfigError("initial_speed", "must be >= 0");
  if (modes < 1) throw ConfigError("modes", "must be >= 1");
  if (main_starts < 1) throw ConfigError("main_starts", "must be >= 1");
  if (sub_starts < 0) throw ConfigError("sub_starts", "must be >= 0");
  if (!(init_scale >= 0.0)) throw ConfigError("init_scale", "must be >= 0");
  if (!(collision_weight_min > 0.0 && collision_weight_min <= collision_weight_max)) {
    throw ConfigError("collision_weight", "need 0 < min <= max");
  }
  if (!(radius > 0.0)) throw ConfigError("radius", "must be positive");
  if (!(collision_margin >= 0.0)) throw ConfigError("collision_margin", "must be >= 0");
  if (!(cluster_eps > 0.0)) throw ConfigError("cluster_eps", "must be positive");
  if (own_weights.size() != features.n_own()) throw ConfigError("own_weights", "one weight per own feature");
  solver.validate();
}

GameParams rpi_params(const RPIConfig& cfg, double collision_weight) {
  GameParams p;
  p.own_weights = cfg.own_weights.transpose().replicate(2, 1);
  p.pair_weights = Eigen::VectorXd::Constant(1, collision_weight);
  p.goals.resize(2, 2);
  p.goals.col(0) = cfg.robot_goal;
  p.goals.col(1) = Eigen::Vector2d::Zero();
  p.radii = Eigen::VectorXd::Constant(2, cfg.radius + cfg.collision_margin);
  return p;
}

Scenario rpi_scenario(const RPIConfig& cfg, const JointState& x,
                      std::vector<std::vector<Eigen::Vector2d>> histories) {
  Scenario s;
  s.initial = x;
  s.histories = std::move(histories);
  s.radii = Eigen::VectorXd::Constant(2, cfg.radius);
  s.dt = cfg.dt;
  s.horizon = cfg.horizon_steps();
  s.features = cfg.features;
  return s;
}

int passing_steps(const JointTrajectory& executed, double dt, int cap) {
  (void)dt;
  const double d0 = (executed.position(0, 0) - executed.position(1, 0)).norm();
  const int last = std::min(cap, executed.horizon());
  for (int k = 0; k < last; ++k) {
    const Eigen::Vector2d rel = executed.position(0, k) - executed.position(1, k);
    const AgentState a = executed.state(0, k);
    const AgentState b = executed.state(1, k);
    const Eigen::Vector2d vrel(a.v * std::cos(a.theta) - b.v * std::cos(b.theta),
                               a.v * std::sin(a.theta) - b.v * std::sin(b.theta));
    const double dist = rel.norm();
    if (k > 0 && rel.dot(vrel) >= 0.0 && dist > d0) return k;
  }
  return last;
}

namespace {

struct Episode {
  std::vector<Demonstration> demos;
  RPITrace trace;
};

Episode run_episode(const RPIConfig& cfg, int c) {
  std::seed_seq seq{static_cast<std::uint64_t>(cfg.seed), static_cast<std::uint64_t>(c), std::uint64_t{0x5eed}};
  std::mt19937_64 rng(seq);
  std::uniform_real_distribution<double> angle(cfg.pedestrian_angle_min, cfg.pedestrian_angle_max);
  std::uniform_real_distribution<double> weight(cfg.collision_weight_min, cfg.collision_weight_max);
  Episode ep;
  ep.trace.config = c;
  ep.trace.pedestrian_angle = angle(rng);
  ep.trace.collision_weight = weight(rng);
  const double phi = ep.trace.pedestrian_angle;

  const Eigen::Vector2d ped_start = cfg.circle_radius * Eigen::Vector2d(std::cos(phi), std::sin(phi));
  const Eigen::Vector2d ped_goal = -ped_start;
  const Eigen::Vector2d robot_dir = cfg.robot_goal - cfg.robot_start;
  JointState x0;
  x0.agents.push_back({cfg.robot_start.x(), cfg.robot_start.y(), cfg.initial_speed,
                       std::atan2(robot_dir.y(), robot_dir.x())});
  x0.agents.push_back({ped_start.x(), ped_start.y(), cfg.initial_speed, phi + M_PI});
  GameParams params = rpi_params(cfg, ep.trace.collision_weight);
  params.goals.col(1) = ped_goal;

  const int hist = cfg.history_steps();
  const int horizon = cfg.horizon_steps();
  std::vector<std::vector<Eigen::Vector2d>> histories;
  for (const auto& a : x0.agents) histories.push_back(backward_history(a, hist, cfg.dt));

  // Main game.
  const Scenario main = rpi_scenario(cfg, x0, histories);
  const MultistartResult ms = multistart_solve(main, params, cfg.main_starts, rng(), cfg.solver, cfg.init_scale);
  ep.trace.failures += ms.failures;
  if (ms.solutions.empty()) throw NumericalError("generate_rpi: main game of configuration " + std::to_string(c) + " failed");
  const std::vector<int> main_modes = top_modes(ms, cfg.cluster_eps, cfg.modes);
  ep.trace.main_modes = static_cast<int>(main_modes.size());
  const JointTrajectory& executed = ms.solutions[main_modes.front()].trajectory;
  ep.trace.executed = executed;
  const int steps = passing_steps(executed, cfg.dt, horizon);

  std::vector<JointStrategy> warm;
  for (int m : main_modes) warm.push_back(ms.solutions[m].strategy);

  for (int t = 0; t < steps; ++t) {
    const JointState xt = executed.joint_state(t);
    if (t > 0) {
      for (int i = 0; i < 2; ++i) {
        histories[i].erase(histories[i].begin());
        histories[i].push_back(executed.position(i, t));
      }
      for (auto& w : warm) w = shift_strategy(w);
    }
    const Scenario sub = rpi_scenario(cfg, xt, histories);
    const MultistartResult subs = multistart_solve(sub, params, cfg.sub_starts, rng(), cfg.solver, cfg.init_scale, warm);
    ep.trace.failures += subs.failures;
    if (subs.solutions.empty()) continue;
    const std::vector<int> reps = top_modes(subs, cfg.cluster_eps, cfg.modes);

    Demonstration demo;
    demo.scenario = sub;
    demo.gt_goals = params.goals;
    demo.source = c;
    demo.step = t;
    demo.flagged = static_cast<int>(reps.size()) < cfg.modes;
    warm.clear();
    for (int m : reps) {
      demo.gt_futures.push_back(subs.solutions[m].trajectory);
      demo.gt_strategies.push_back(subs.solutions[m].strategy);
      warm.push_back(subs.solutions[m].strategy);
    }
    ep.demos.push_back(std::move(demo));
  }
  ep.trace.steps = static_cast<int>(ep.demos.size());
  return ep;
}

}  // namespace

RPIDataset generate_rpi(const RPIConfig& cfg) {
  cfg.validate();
  auto episodes = parallel_map(static_cast<std::size_t>(cfg.configs),
                               [&](std::size_t c) { return run_episode(cfg, static_cast<int>(c)); });
  RPIDataset out;
  for (auto& ep : episodes) {
    for (auto& d : ep.demos) out.demos.push_back(std::move(d));
    out.traces.push_back(std::move(ep.trace));
  }
  return out;
}

DatasetSplit split_by_source(const std::vector<Demonstration>& demos, std::uint64_t seed) {
  std::vector<int> sources;
  for (const auto& d : demos) sources.push_back(d.source);
  std::sort(sources.begin(), sources.end());
  sources.erase(std::unique(sources.begin(), sources.end()), sources.end());
  std::mt19937_64 rng(seed);
  // Fisher-Yates with explicit draws so the order does not depend on the
  // standard library's shuffle implementation.
  for (std::size_t i = sources.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng() % i);
    std::swap(sources[i - 1], sources[j]);
  }
  const std::size_t n = sources.size();
  std::size_t n_test = static_cast<std::size_t>(std::lround(0.1 * n));
  std::size_t n_val = static_cast<std::size_t>(std::lround(0.1 * n));
  if (n >= 3) {
    n_test = std::max<std::size_t>(n_test, 1);
    n_val = std::max<std::size_t>(n_val, 1);
  } else {
    n_test = n >= 2 ? 1 : 0;
    n_val = 0;
  }
  std::vector<int> role(sources.empty() ? 0 : *std::max_element(sources.begin(), sources.end()) + 1, 0);
  for (std::size_t k = 0; k < n; ++k) {
    role[sources[k]] = k < n_test ? 2 : (k < n_test + n_val ? 1 : 0);
  }
  DatasetSplit out;
  for (const auto& d : demos) {
    switch (role[d.source]) {
      case 2: out.test.push_back(d); break;
      case 1: out.val.push_back(d); break;
      default: out.train.push_back(d); break;
    }
  }
  return out;
}

}  // namespace epg
