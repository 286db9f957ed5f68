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

#ifndef EPG_ENERGY_HPP_
#define EPG_ENERGY_HPP_

#include <algorithm>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "epg/dual.hpp"
#include "epg/dynamics.hpp"
#include "epg/errors.hpp"
#include "epg/least_squares.hpp"

namespace epg {

enum class Feature {
  goal,
  lane,
  vref,
  vel,
  acc,
  jerk,
  turnr,
  turnacc,
  velb,
  accb,
  turnrb,
  collision,  // pairwise
};

std::string_view feature_name(Feature f);
Feature parse_feature(std::string_view name);  // throws ConfigError

struct ReferencePath {
  std::vector<Eigen::Vector2d> polyline;
  double speed = 0.0;  // [m/s], consumed by vref
};

struct Bounds {
  std::optional<double> v_max;      // [m/s]
  std::optional<double> a_max;      // [m/s^2]
  std::optional<double> omega_max;  // [rad/s]
};

/// Which features enter the energy and the data they need.
struct FeatureSpec {
  std::vector<Feature> own_features;
  bool collision = true;
  int collision_stride = 1;
  Bounds bounds;
  std::vector<ReferencePath> reference;  // one per agent when lane/vref are used

  int n_own() const { return static_cast<int>(own_features.size()); }
  int index_of(Feature f) const {
    const auto it = std::find(own_features.begin(), own_features.end(), f);
    return it == own_features.end() ? -1 : static_cast<int>(it - own_features.begin());
  }
  bool has(Feature f) const { return index_of(f) >= 0; }
};

inline int pair_count(int n_agents) { return n_agents * (n_agents - 1) / 2; }

/// Position of the unordered pair {i, j} in lexicographic (i < j) order.
int pair_index(int i, int j, int n_agents);

/// Game parameters of one mode: weights, goals and collision radii.
///
/// own_weights is N x F with columns in FeatureSpec::own_features order.
/// pair_weights stores one weight per unordered pair, so w_ij = w_ji holds
/// by construction. goals is 2 x N, or empty when no goal feature is used.
template <typename Scalar>
struct GameParamsT {
  MatrixX<Scalar> own_weights;
  VectorX<Scalar> pair_weights;
  Eigen::Matrix<Scalar, 2, Eigen::Dynamic> goals;
  Eigen::VectorXd radii;

  int n_agents() const { return static_cast<int>(radii.size()); }
  bool has_goals() const { return goals.cols() > 0; }

  Scalar pair_weight(int i, int j) const { return pair_weights(pair_index(i, j, n_agents())); }

  template <typename Other>
  GameParamsT<Other> cast() const {
    GameParamsT<Other> out;
    out.own_weights = own_weights.template cast<Other>();
    out.pair_weights = pair_weights.template cast<Other>();
    out.goals = goals.template cast<Other>();
    out.radii = radii;
    return out;
  }
};

using GameParams = GameParamsT<double>;

/// Uniform parameters: every own feature weight equal to `own_weight`,
/// every pair weight equal to `pair_weight`.
GameParams uniform_params(const FeatureSpec& spec, int n_agents, double own_weight,
                          double pair_weight, double radius);

struct ResidualBlock {
  Feature feature;
  int agent;     // owner, or first agent of the pair
  int other;     // second agent of the pair, -1 for own blocks
  int step;      // timestep the block is evaluated at
  int dim;       // 1 or 2
  Eigen::Index row;
};

/// Signed lateral distance from p to a polyline (left of travel positive)
/// and its gradient with respect to p.
template <typename Scalar>
std::pair<Scalar, Vector2<Scalar>> signed_lateral_offset(
    const std::vector<Eigen::Vector2d>& line, const Vector2<Scalar>& p) {
  using std::sqrt;
  const Eigen::Vector2d pv(value_of(p.x()), value_of(p.y()));
  std::size_t best = 0;
  double best_dist2 = std::numeric_limits<double>::infinity();
  for (std::size_t s = 0; s + 1 < line.size(); ++s) {
    const Eigen::Vector2d d = line[s + 1] - line[s];
    const double t = std::clamp((pv - line[s]).dot(d) / d.squaredNorm(), 0.0, 1.0);
    const double dist2 = (pv - (line[s] + t * d)).squaredNorm();
    if (dist2 < best_dist2) {
      best_dist2 = dist2;
      best = s;
    }
  }
  const Eigen::Vector2d a = line[best];
  const Eigen::Vector2d d = line[best + 1] - a;
  const Eigen::Vector2d dhat = d.normalized();
  const Scalar cross = dhat.x() * (p.y() - a.y()) - dhat.y() * (p.x() - a.x());
  const double t = (pv - a).dot(d) / d.squaredNorm();
  if (t > 0.0 && t < 1.0) {
    return {cross, Vector2<Scalar>(Scalar(-dhat.y()), Scalar(dhat.x()))};
  }
  const Eigen::Vector2d e = t <= 0.0 ? a : Eigen::Vector2d(line[best + 1]);
  const Vector2<Scalar> diff(p.x() - e.x(), p.y() - e.y());
  const Scalar dist = sqrt(diff.x() * diff.x() + diff.y() * diff.y());
  const double sign = value_of(cross) >= 0.0 ? 1.0 : -1.0;
  if (value_of(dist) == 0.0) return {Scalar(0.0), Vector2<Scalar>::Zero()};
  return {sign * dist, Vector2<Scalar>(sign * diff.x() / dist, sign * diff.y() / dist)};
}

/// Weighted nonlinear least-squares form of the potential-game energy.
///
/// Each residual block is one feature scaled by its weight, so
/// energy(u) = ½ Σ_blocks ‖r_block(u)‖². Blocks are grouped: all own blocks
/// of agent 0, then agent 1, ..., then the pairwise collision blocks.
/// Immutable after build().
template <typename Scalar>
class ResidualSystemT {
 public:
  using Vector = VectorX<Scalar>;
  using Matrix = MatrixX<Scalar>;
  using Strategy = JointStrategyT<Scalar>;

  const FeatureSpec& spec() const { return spec_; }
  const GameParamsT<Scalar>& params() const { return params_; }
  const JointState& initial_state() const { return x0_; }
  int n_agents() const { return x0_.size(); }
  int horizon() const { return horizon_; }
  double dt() const { return dt_; }
  const std::vector<ResidualBlock>& blocks() const { return blocks_; }
  Eigen::Index total_dim() const { return total_dim_; }
  Eigen::Index num_variables() const { return Eigen::Index(n_agents()) * horizon_ * kControlDim; }

  /// Row range [start, start + count) of agent i's own blocks.
  std::pair<Eigen::Index, Eigen::Index> agent_rows(int i) const { return agent_rows_[i]; }
  std::pair<Eigen::Index, Eigen::Index> pair_rows() const { return pair_rows_; }

  void check(const Strategy& u) const {
    if (u.n_agents() != n_agents() || u.horizon() != horizon_ || u.dt() != dt_) {
      throw DimensionMismatch("strategy (N=" + std::to_string(u.n_agents()) +
                              ", K=" + std::to_string(u.horizon()) +
                              ") does not match residual system (N=" +
                              std::to_string(n_agents()) + ", K=" + std::to_string(horizon_) + ")");
    }
  }

  /// Residual vector and, when `jac` is non-null, the exact Jacobian
  /// d r / d u (total_dim x num_variables).
  void evaluate(const Strategy& u, Vector* res, Matrix* jac) const;

  Vector residuals(const Strategy& u) const {
    Vector r;
    evaluate(u, &r, nullptr);
    return r;
  }

  Scalar energy(const Strategy& u) const {
    const Vector r = residuals(u);
    return Scalar(0.5) * r.squaredNorm();
  }

  /// ½ Σ of agent i's own blocks.
  Scalar own_cost(const Strategy& u, int i) const { return partial_cost(residuals(u), i, false); }

  /// ½ Σ of all pair blocks (each unordered pair once).
  Scalar pair_cost(const Strategy& u) const {
    const Vector r = residuals(u);
    const auto [start, count] = pair_rows_;
    return Scalar(0.5) * r.segment(start, count).squaredNorm();
  }

  /// Agent i's game cost: own blocks plus every pair block involving i.
  Scalar per_agent_cost(const Strategy& u, int i) const {
    if (i < 0 || i >= n_agents()) throw std::out_of_range("agent index " + std::to_string(i));
    return partial_cost(residuals(u), i, true);
  }

  /// Smallest |argument| over the hinge blocks that are present. Large values
  /// mean the energy is smooth in a neighbourhood of u.
  double hinge_margin(const Strategy& u) const;

  /// Same structure with a different parameter scalar type.
  template <typename Other>
  ResidualSystemT<Other> rebind(GameParamsT<Other> params) const {
    ResidualSystemT<Other> out;
    out.spec_ = spec_;
    out.params_ = std::move(params);
    out.x0_ = x0_;
    out.horizon_ = horizon_;
    out.dt_ = dt_;
    out.blocks_ = blocks_;
    out.total_dim_ = total_dim_;
    out.agent_rows_ = agent_rows_;
    out.pair_rows_ = pair_rows_;
    return out;
  }

  // LeastSquaresProblem interface over the flat control vector.
  double cost(const Eigen::VectorXd& x) const
    requires std::is_same_v<Scalar, double>
  {
    return energy(as_strategy(x));
  }
  Linearization linearize(const Eigen::VectorXd& x) const
    requires std::is_same_v<Scalar, double>;

  /// JᵀJ assembled blockwise: own rows only touch their agent's columns.
  Eigen::MatrixXd gram(const Eigen::MatrixXd& jac) const
    requires std::is_same_v<Scalar, double>;

  Strategy as_strategy(const VectorX<Scalar>& x) const {
    return Strategy(n_agents(), horizon_, dt_, x);
  }

 private:
  template <typename>
  friend class ResidualSystemT;
  template <typename S>
  friend ResidualSystemT<S> build(const FeatureSpec&, const GameParamsT<S>&, const JointState&,
                                  int, double);

  Scalar partial_cost(const Vector& r, int i, bool with_pairs) const {
    const auto [start, count] = agent_rows_[i];
    Scalar c = r.segment(start, count).squaredNorm();
    if (with_pairs) {
      for (const auto& b : blocks_) {
        if (b.other >= 0 && (b.agent == i || b.other == i)) c += r.segment(b.row, b.dim).squaredNorm();
      }
    }
    return Scalar(0.5) * c;
  }

  FeatureSpec spec_;
  GameParamsT<Scalar> params_;
  JointState x0_;
  int horizon_ = 0;
  double dt_ = 0.0;
  std::vector<ResidualBlock> blocks_;
  Eigen::Index total_dim_ = 0;
  std::vector<std::pair<Eigen::Index, Eigen::Index>> agent_rows_;
  std::pair<Eigen::Index, Eigen::Index> pair_rows_{0, 0};
};

using ResidualSystem = ResidualSystemT<double>;

namespace detail {

// Throws ConfigError unless spec and params fit together for n_agents.
void validate_game(const FeatureSpec& spec, const GameParams& params, int n_agents);

std::vector<ResidualBlock> layout_blocks(const FeatureSpec& spec, int n_agents, int horizon,
                                         std::vector<std::pair<Eigen::Index, Eigen::Index>>* agent_rows,
                                         std::pair<Eigen::Index, Eigen::Index>* pair_rows);

template <typename Scalar>
GameParams values_of(const GameParamsT<Scalar>& p) {
  GameParams out;
  out.own_weights = p.own_weights.unaryExpr([](const Scalar& s) { return value_of(s); });
  out.pair_weights = p.pair_weights.unaryExpr([](const Scalar& s) { return value_of(s); });
  out.goals = p.goals.unaryExpr([](const Scalar& s) { return value_of(s); });
  out.radii = p.radii;
  return out;
}

}  // namespace detail

/// Assembles the residual system of the energy for one mode.
template <typename Scalar>
ResidualSystemT<Scalar> build(const FeatureSpec& spec, const GameParamsT<Scalar>& params,
                              const JointState& x0, int horizon, double dt) {
  validate(x0);
  if (horizon < 1) throw ConfigError("horizon", "must be >= 1");
  if (!(dt > 0.0)) throw ConfigError("dt", "must be positive");
  detail::validate_game(spec, detail::values_of(params), x0.size());
  ResidualSystemT<Scalar> sys;
  sys.spec_ = spec;
  sys.params_ = params;
  sys.x0_ = x0;
  sys.horizon_ = horizon;
  sys.dt_ = dt;
  sys.blocks_ = detail::layout_blocks(spec, x0.size(), horizon, &sys.agent_rows_, &sys.pair_rows_);
  sys.total_dim_ = 0;
  for (const auto& b : sys.blocks_) sys.total_dim_ += b.dim;
  return sys;
}

template <typename Scalar>
void ResidualSystemT<Scalar>::evaluate(const Strategy& u, Vector* res, Matrix* jac) const {
  using std::abs;
  using std::sqrt;
  check(u);
  const JointTrajectoryT<Scalar> traj = rollout(x0_, u);
  const int n = n_agents();
  const int cols_per = horizon_ * kControlDim;

  std::vector<Matrix> sens;
  if (jac) {
    jac->setZero(total_dim_, num_variables());
    sens.reserve(n);
    for (int i = 0; i < n; ++i) sens.push_back(agent_rollout_jacobian(traj, i, dt_));
  }
  Vector& r = *res;
  r.setZero(total_dim_);

  const double inv_dt = 1.0 / dt_;
  // Writes w * (g · state-sensitivity rows) for a residual depending on
  // agent i's state at step k; only controls j < k contribute.
  auto state_row = [&](Eigen::Index row, int i, int k, int coord, const Scalar& scale) {
    if (k == 0) return;
    jac->row(row).segment(Eigen::Index(i) * cols_per, kControlDim * k) +=
        scale * sens[i].row(kStateDim * k + coord).head(kControlDim * k);
  };
  auto control_col = [&](int i, int k, int c) {
    return Eigen::Index(i) * cols_per + Eigen::Index(k) * kControlDim + c;
  };

  for (const ResidualBlock& b : blocks_) {
    const int i = b.agent;
    const int k = b.step;
    const Eigen::Index row = b.row;
    if (b.feature == Feature::collision) {
      const int j = b.other;
      const Scalar w = params_.pair_weight(i, j);
      const Vector2<Scalar> d = traj.position(i, k) - traj.position(j, k);
      const Scalar dist = sqrt(d.x() * d.x() + d.y() * d.y());
      const Scalar arg = (params_.radii(i) + params_.radii(j)) - dist;
      if (!(value_of(arg) > 0.0)) continue;
      r(row) = w * arg;
      if (jac && value_of(dist) > 0.0) {
        const Scalar gx = d.x() / dist;
        const Scalar gy = d.y() / dist;
        state_row(row, i, k, 0, -w * gx);
        state_row(row, i, k, 1, -w * gy);
        state_row(row, j, k, 0, w * gx);
        state_row(row, j, k, 1, w * gy);
      }
      continue;
    }

    const Scalar w = params_.own_weights(i, spec_.index_of(b.feature));
    const AgentStateT<Scalar> s = traj.state(i, k);
    switch (b.feature) {
      case Feature::goal: {
        r(row) = w * (s.x - params_.goals(0, i));
        r(row + 1) = w * (s.y - params_.goals(1, i));
        if (jac) {
          state_row(row, i, k, 0, w);
          state_row(row + 1, i, k, 1, w);
        }
        break;
      }
      case Feature::lane: {
        const auto [offset, grad] =
            signed_lateral_offset(spec_.reference[i].polyline, Vector2<Scalar>(s.x, s.y));
        r(row) = w * offset;
        if (jac) {
          state_row(row, i, k, 0, w * grad.x());
          state_row(row, i, k, 1, w * grad.y());
        }
        break;
      }
      case Feature::vref:
        r(row) = w * (s.v - spec_.reference[i].speed);
        if (jac) state_row(row, i, k, 2, w);
        break;
      case Feature::vel:
        r(row) = w * s.v;
        if (jac) state_row(row, i, k, 2, w);
        break;
      case Feature::velb: {
        const Scalar arg = abs(s.v) - *spec_.bounds.v_max;
        if (value_of(arg) > 0.0) {
          r(row) = w * arg;
          if (jac) state_row(row, i, k, 2, value_of(s.v) > 0.0 ? w : Scalar(-w));
        }
        break;
      }
      case Feature::acc:
      case Feature::turnr: {
        const int c = b.feature == Feature::acc ? 0 : 1;
        r(row) = w * u.vector()(control_col(i, k, c));
        if (jac) (*jac)(row, control_col(i, k, c)) = w;
        break;
      }
      case Feature::accb:
      case Feature::turnrb: {
        const int c = b.feature == Feature::accb ? 0 : 1;
        const double bound = c == 0 ? *spec_.bounds.a_max : *spec_.bounds.omega_max;
        const Scalar q = u.vector()(control_col(i, k, c));
        const Scalar arg = abs(q) - bound;
        if (value_of(arg) > 0.0) {
          r(row) = w * arg;
          if (jac) (*jac)(row, control_col(i, k, c)) = value_of(q) > 0.0 ? w : Scalar(-w);
        }
        break;
      }
      case Feature::jerk:
      case Feature::turnacc: {
        const int c = b.feature == Feature::jerk ? 0 : 1;
        const Scalar diff = u.vector()(control_col(i, k, c)) - u.vector()(control_col(i, k - 1, c));
        r(row) = w * diff * inv_dt;
        if (jac) {
          (*jac)(row, control_col(i, k, c)) = w * inv_dt;
          (*jac)(row, control_col(i, k - 1, c)) = -w * inv_dt;
        }
        break;
      }
      case Feature::collision:
        break;
    }
  }
}

template <typename Scalar>
double ResidualSystemT<Scalar>::hinge_margin(const Strategy& u) const {
  check(u);
  const JointTrajectoryT<Scalar> traj = rollout(x0_, u);
  double margin = std::numeric_limits<double>::infinity();
  for (const ResidualBlock& b : blocks_) {
    double arg = 0.0;
    bool is_hinge = true;
    switch (b.feature) {
      case Feature::collision: {
        const Vector2<Scalar> d = traj.position(b.agent, b.step) - traj.position(b.other, b.step);
        arg = params_.radii(b.agent) + params_.radii(b.other) -
              std::hypot(value_of(d.x()), value_of(d.y()));
        break;
      }
      case Feature::velb:
        arg = std::abs(value_of(traj.state(b.agent, b.step).v)) - *spec_.bounds.v_max;
        break;
      case Feature::accb:
        arg = std::abs(value_of(u.a(b.agent, b.step))) - *spec_.bounds.a_max;
        break;
      case Feature::turnrb:
        arg = std::abs(value_of(u.omega(b.agent, b.step))) - *spec_.bounds.omega_max;
        break;
      default:
        is_hinge = false;
    }
    if (is_hinge) margin = std::min(margin, std::abs(arg));
  }
  return margin;
}

template <typename Scalar>
Linearization ResidualSystemT<Scalar>::linearize(const Eigen::VectorXd& x) const
  requires std::is_same_v<Scalar, double>
{
  Linearization lin;
  evaluate(as_strategy(x), &lin.residuals, &lin.jacobian);
  lin.gram = gram(lin.jacobian);
  return lin;
}

template <typename Scalar>
Eigen::MatrixXd ResidualSystemT<Scalar>::gram(const Eigen::MatrixXd& jac) const
  requires std::is_same_v<Scalar, double>
{
  const Eigen::Index n = num_variables();
  const Eigen::Index per = Eigen::Index(horizon_) * kControlDim;
  Eigen::MatrixXd lower = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n_agents(); ++i) {
    const auto [start, count] = agent_rows_[i];
    if (count == 0) continue;
    lower.block(i * per, i * per, per, per)
        .template selfadjointView<Eigen::Lower>()
        .rankUpdate(jac.block(start, i * per, count, per).transpose());
  }
  if (pair_rows_.second > 0) {
    lower.template selfadjointView<Eigen::Lower>().rankUpdate(
        jac.middleRows(pair_rows_.first, pair_rows_.second).transpose());
  }
  Eigen::MatrixXd full = lower.template selfadjointView<Eigen::Lower>();
  return full;
}

// Free-function surface.

template <typename Scalar>
Scalar energy(const ResidualSystemT<Scalar>& sys, const JointStrategyT<Scalar>& u) {
  return sys.energy(u);
}

template <typename Scalar>
std::pair<VectorX<Scalar>, MatrixX<Scalar>> residuals_and_jacobian(
    const ResidualSystemT<Scalar>& sys, const JointStrategyT<Scalar>& u) {
  VectorX<Scalar> r;
  MatrixX<Scalar> jac;
  sys.evaluate(u, &r, &jac);
  return {std::move(r), std::move(jac)};
}

template <typename Scalar>
Scalar per_agent_cost(const ResidualSystemT<Scalar>& sys, const JointStrategyT<Scalar>& u, int i) {
  return sys.per_agent_cost(u, i);
}

/// Gradient of agent i's own game cost with respect to agent i's controls.
Eigen::VectorXd agent_cost_gradient(const ResidualSystem& sys, const JointStrategy& u, int i);

}  // namespace epg

#endif  // EPG_ENERGY_HPP_
