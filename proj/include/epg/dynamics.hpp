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

#ifndef EPG_DYNAMICS_HPP_
#define EPG_DYNAMICS_HPP_

#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "epg/dual.hpp"
#include "epg/errors.hpp"

namespace epg {

// Dynamically-extended unicycle, explicit Euler. Per agent the state is
// (x, y, v, theta) and the control is (a, omega). Headings are never wrapped.

template <typename Scalar>
struct AgentStateT {
  Scalar x{};
  Scalar y{};
  Scalar v{};
  Scalar theta{};
};

template <typename Scalar>
struct ControlT {
  Scalar a{};
  Scalar omega{};
};

using AgentState = AgentStateT<double>;
using Control = ControlT<double>;

inline constexpr int kStateDim = 4;
inline constexpr int kControlDim = 2;

struct JointState {
  std::vector<AgentState> agents;

  int size() const { return static_cast<int>(agents.size()); }
};

template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vector2 = Eigen::Matrix<Scalar, 2, 1>;

/// Open-loop joint strategy: piecewise-constant controls for every agent.
///
/// Controls are stored in one flat vector, agent-major then time-minor:
/// entry (i, k, c) lives at (i * K + k) * 2 + c with c = 0 for the
/// acceleration and c = 1 for the turn rate. This is also the column order
/// of every Jacobian taken with respect to the strategy.
template <typename Scalar>
class JointStrategyT {
 public:
  using Vector = VectorX<Scalar>;

  JointStrategyT() = default;
  JointStrategyT(int n_agents, int horizon, double dt)
      : JointStrategyT(n_agents, horizon, dt,
                       Vector::Zero(Eigen::Index(n_agents) * horizon * kControlDim)) {}
  JointStrategyT(int n_agents, int horizon, double dt, Vector controls)
      : n_agents_(n_agents), horizon_(horizon), dt_(dt), controls_(std::move(controls)) {
    if (n_agents < 1) throw DimensionMismatch("joint strategy needs at least one agent");
    if (horizon < 1) throw DimensionMismatch("joint strategy needs horizon >= 1");
    if (!(dt > 0.0) || !std::isfinite(dt)) throw InvalidInput("dt must be positive and finite");
    if (controls_.size() != Eigen::Index(n_agents) * horizon * kControlDim) {
      throw DimensionMismatch("control vector has " + std::to_string(controls_.size()) +
                              " entries, expected " +
                              std::to_string(n_agents * horizon * kControlDim));
    }
  }

  int n_agents() const { return n_agents_; }
  int horizon() const { return horizon_; }
  double dt() const { return dt_; }
  Eigen::Index size() const { return controls_.size(); }

  static Eigen::Index index(int i, int k, int c, int horizon) {
    return (Eigen::Index(i) * horizon + k) * kControlDim + c;
  }
  Eigen::Index index(int i, int k, int c) const { return index(i, k, c, horizon_); }

  Scalar& a(int i, int k) { return controls_(index(i, k, 0)); }
  const Scalar& a(int i, int k) const { return controls_(index(i, k, 0)); }
  Scalar& omega(int i, int k) { return controls_(index(i, k, 1)); }
  const Scalar& omega(int i, int k) const { return controls_(index(i, k, 1)); }
  ControlT<Scalar> control(int i, int k) const { return {a(i, k), omega(i, k)}; }
  void set_control(int i, int k, const ControlT<Scalar>& c) {
    a(i, k) = c.a;
    omega(i, k) = c.omega;
  }

  auto agent_controls(int i) { return controls_.segment(Eigen::Index(i) * horizon_ * kControlDim, horizon_ * kControlDim); }
  auto agent_controls(int i) const {
    return controls_.segment(Eigen::Index(i) * horizon_ * kControlDim, horizon_ * kControlDim);
  }

  const Vector& vector() const { return controls_; }
  Vector& vector() { return controls_; }

  template <typename Other>
  JointStrategyT<Other> cast() const {
    return JointStrategyT<Other>(n_agents_, horizon_, dt_, controls_.template cast<Other>());
  }

  bool operator==(const JointStrategyT& o) const {
    return n_agents_ == o.n_agents_ && horizon_ == o.horizon_ && dt_ == o.dt_ &&
           controls_ == o.controls_;
  }

 private:
  int n_agents_ = 0;
  int horizon_ = 0;
  double dt_ = 0.0;
  Vector controls_;
};

using JointStrategy = JointStrategyT<double>;

/// Unrolled joint trajectory. Per agent a 4 x (K + 1) block whose column k
/// is the state at step k; column 0 is the initial state.
template <typename Scalar>
class JointTrajectoryT {
 public:
  using AgentBlock = Eigen::Matrix<Scalar, kStateDim, Eigen::Dynamic>;

  JointTrajectoryT() = default;
  JointTrajectoryT(int n_agents, int horizon)
      : horizon_(horizon), agents_(n_agents, AgentBlock::Zero(kStateDim, horizon + 1)) {}

  int n_agents() const { return static_cast<int>(agents_.size()); }
  int horizon() const { return horizon_; }

  AgentStateT<Scalar> state(int i, int k) const {
    const auto& b = agents_[i];
    return {b(0, k), b(1, k), b(2, k), b(3, k)};
  }
  void set_state(int i, int k, const AgentStateT<Scalar>& s) {
    auto& b = agents_[i];
    b(0, k) = s.x;
    b(1, k) = s.y;
    b(2, k) = s.v;
    b(3, k) = s.theta;
  }
  Vector2<Scalar> position(int i, int k) const { return agents_[i].template block<2, 1>(0, k); }

  const AgentBlock& agent(int i) const { return agents_[i]; }
  AgentBlock& agent(int i) { return agents_[i]; }

  JointState joint_state(int k) const {
    JointState s;
    s.agents.reserve(agents_.size());
    for (int i = 0; i < n_agents(); ++i) {
      const auto st = state(i, k);
      s.agents.push_back({value_of(st.x), value_of(st.y), value_of(st.v), value_of(st.theta)});
    }
    return s;
  }

  bool operator==(const JointTrajectoryT& o) const {
    if (horizon_ != o.horizon_ || agents_.size() != o.agents_.size()) return false;
    for (std::size_t i = 0; i < agents_.size(); ++i) {
      if (agents_[i] != o.agents_[i]) return false;
    }
    return true;
  }

 private:
  int horizon_ = 0;
  std::vector<AgentBlock> agents_;
};

using JointTrajectory = JointTrajectoryT<double>;

/// One explicit-Euler step without input validation (used in hot loops).
template <typename Scalar>
AgentStateT<Scalar> euler_step(const AgentStateT<Scalar>& s, const ControlT<Scalar>& u,
                               double dt) {
  using std::cos;
  using std::sin;
  return {s.x + s.v * cos(s.theta) * dt, s.y + s.v * sin(s.theta) * dt, s.v + u.a * dt,
          s.theta + u.omega * dt};
}

/// Checked single step; throws InvalidInput on non-finite input or dt <= 0.
AgentState step(const AgentState& state, const Control& control, double dt);

void validate(const JointState& x0);

/// Unrolls every agent independently from x0 under the strategy.
template <typename Scalar>
JointTrajectoryT<Scalar> rollout(const JointState& x0, const JointStrategyT<Scalar>& u) {
  if (x0.size() != u.n_agents()) {
    throw DimensionMismatch("initial state has " + std::to_string(x0.size()) +
                            " agents, strategy has " + std::to_string(u.n_agents()));
  }
  validate(x0);
  for (Eigen::Index n = 0; n < u.size(); ++n) {
    if (!std::isfinite(value_of(u.vector()(n)))) throw InvalidInput("non-finite control entry");
  }
  const int horizon = u.horizon();
  JointTrajectoryT<Scalar> traj(u.n_agents(), horizon);
  for (int i = 0; i < u.n_agents(); ++i) {
    const AgentState& s0 = x0.agents[i];
    AgentStateT<Scalar> s{Scalar(s0.x), Scalar(s0.y), Scalar(s0.v), Scalar(s0.theta)};
    traj.set_state(i, 0, s);
    for (int k = 0; k < horizon; ++k) {
      s = euler_step(s, u.control(i, k), u.dt());
      traj.set_state(i, k + 1, s);
    }
  }
  return traj;
}

/// Sensitivity of agent i's unrolled states to agent i's own controls.
///
/// Rows are indexed 4 * k + c (state coordinate c at step k, k = 0..K),
/// columns 2 * j + c' (control c' at step j). Obtained by the chain rule
/// through the Euler recursion, so it is exact for the discrete dynamics.
template <typename Scalar>
MatrixX<Scalar> agent_rollout_jacobian(const JointTrajectoryT<Scalar>& traj, int i, double dt) {
  using std::cos;
  using std::sin;
  const int horizon = traj.horizon();
  const int n_cols = horizon * kControlDim;
  MatrixX<Scalar> sens = MatrixX<Scalar>::Zero(kStateDim * (horizon + 1), n_cols);
  for (int k = 0; k < horizon; ++k) {
    const AgentStateT<Scalar> s = traj.state(i, k);
    const Scalar c = cos(s.theta);
    const Scalar sn = sin(s.theta);
    const int cur = kStateDim * k;
    const int nxt = cur + kStateDim;
    const int used = kControlDim * k;  // controls j < k influence state k
    if (used > 0) {
      auto v_row = sens.row(cur + 2).head(used);
      auto th_row = sens.row(cur + 3).head(used);
      sens.row(nxt + 0).head(used) =
          sens.row(cur + 0).head(used) + (c * dt) * v_row - (s.v * sn * dt) * th_row;
      sens.row(nxt + 1).head(used) =
          sens.row(cur + 1).head(used) + (sn * dt) * v_row + (s.v * c * dt) * th_row;
      sens.row(nxt + 2).head(used) = v_row;
      sens.row(nxt + 3).head(used) = th_row;
    }
    sens(nxt + 2, kControlDim * k + 0) = Scalar(dt);
    sens(nxt + 3, kControlDim * k + 1) = Scalar(dt);
  }
  return sens;
}

/// d(trajectory)/d(controls), block diagonal across agents.
template <typename Scalar>
struct RolloutJacobianT {
  int horizon = 0;
  std::vector<MatrixX<Scalar>> per_agent;

  int n_agents() const { return static_cast<int>(per_agent.size()); }

  /// Full matrix. Rows follow the agent-major state layout
  /// i * 4 * (K + 1) + 4 * k + c, columns the strategy layout.
  MatrixX<Scalar> dense() const {
    const Eigen::Index rows_per = kStateDim * (horizon + 1);
    const Eigen::Index cols_per = kControlDim * horizon;
    MatrixX<Scalar> full = MatrixX<Scalar>::Zero(rows_per * n_agents(), cols_per * n_agents());
    for (int i = 0; i < n_agents(); ++i) {
      full.block(i * rows_per, i * cols_per, rows_per, cols_per) = per_agent[i];
    }
    return full;
  }
};

using RolloutJacobian = RolloutJacobianT<double>;

template <typename Scalar>
RolloutJacobianT<Scalar> jacobian_rollout(const JointState& x0, const JointStrategyT<Scalar>& u) {
  const auto traj = rollout(x0, u);
  RolloutJacobianT<Scalar> jac;
  jac.horizon = u.horizon();
  for (int i = 0; i < u.n_agents(); ++i) jac.per_agent.push_back(agent_rollout_jacobian(traj, i, u.dt()));
  return jac;
}

/// Flattened agent-major state vector of a trajectory (matches dense()).
template <typename Scalar>
VectorX<Scalar> flatten(const JointTrajectoryT<Scalar>& traj) {
  const Eigen::Index per = kStateDim * (traj.horizon() + 1);
  VectorX<Scalar> out(per * traj.n_agents());
  for (int i = 0; i < traj.n_agents(); ++i) {
    out.segment(i * per, per) = Eigen::Map<const VectorX<Scalar>>(traj.agent(i).data(), per);
  }
  return out;
}

/// Shifts a strategy one step forward, repeating the last control.
JointStrategy shift_strategy(const JointStrategy& u);

}  // namespace epg

#endif  // EPG_DYNAMICS_HPP_
