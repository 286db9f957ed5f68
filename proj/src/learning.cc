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
#include <numeric>
#include <random>

#include "epg/parallel.hpp"

namespace epg {

void Demonstration::validate() const {
  scenario.validate();
  if (gt_futures.empty()) throw ConfigError("demo/gt_futures", "need at least one future");
  for (const auto& f : gt_futures) {
    if (f.n_agents() != scenario.n_agents() || f.horizon() != scenario.horizon) {
      throw ConfigError("demo/gt_futures", "shape does not match the scenario");
    }
  }
  if (!gt_strategies.empty() && gt_strategies.size() != gt_futures.size()) {
    throw ConfigError("demo/gt_strategies", "expected one strategy per future");
  }
  if (has_goals() && gt_goals.cols() != scenario.n_agents()) {
    throw ConfigError("demo/gt_goals", "expected one goal per agent");
  }
}

void LearnConfig::validate() const {
  if (outer_steps < 0) throw ConfigError("learn/outer_steps", "must be >= 0");
  if (batch_size < 1) throw ConfigError("learn/batch_size", "must be >= 1");
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    throw ConfigError("learn/learning_rate", "must be >= 0");
  }
  if (!(learning_rate_decay > 0.0 && learning_rate_decay <= 1.0)) {
    throw ConfigError("learn/learning_rate_decay", "must be in (0, 1]");
  }
  if (!(lambda_imit >= 0.0 && lambda_goal >= 0.0 && lambda_prob >= 0.0)) {
    throw ConfigError("learn/lambda", "loss weights must be >= 0");
  }
  if (!(beta > 0.0)) throw ConfigError("learn/beta", "must be > 0");
  inner.validate();
  if (inner.mode != SolverMode::fixed) {
    throw ConfigError("learn/inner/mode", "differentiated steps must use the fixed schedule");
  }
  if (warm_start) warm_solver.validate();
  if (proposal_refresh < 0) throw ConfigError("learn/proposal_refresh", "must be >= 0");
}

ParameterLayout::ParameterLayout(const LearnableSet& learnable, const Model& model)
    : learnable_(learnable),
      n_agents_(model.params.n_agents()),
      n_features_(static_cast<int>(model.params.own_weights.cols())),
      n_pairs_(static_cast<int>(model.params.pair_weights.size())),
      modes_(model.modes) {
  if (modes_ < 1) throw ConfigError("model/modes", "must be >= 1");
  Eigen::Index off = 0;
  own_off_ = off;
  if (learnable.own_weights) off += Eigen::Index(n_agents_) * n_features_;
  pair_off_ = off;
  if (learnable.pair_weights) off += n_pairs_;
  goal_off_ = off;
  if (learnable.goals) {
    if (model.params.goals.cols() != n_agents_) throw ConfigError("model/goals", "learned goals need one goal per agent");
    off += 2 * Eigen::Index(n_agents_);
  }
  init_off_ = off;
  if (learnable.inits) {
    if (static_cast<int>(model.inits.size()) != modes_) {
      throw ConfigError("model/inits", "learned inits need one strategy per mode");
    }
    n_controls_ = model.inits.front().size();
    for (const auto& u : model.inits) {
      if (u.size() != n_controls_) throw ConfigError("model/inits", "inits differ in size");
    }
    off += Eigen::Index(modes_) * n_controls_;
  }
  size_ = off;
}

Eigen::VectorXd ParameterLayout::encode(const Model& model) const {
  Eigen::VectorXd theta(size_);
  if (learnable_.own_weights) {
    for (int i = 0; i < n_agents_; ++i) {
      for (int f = 0; f < n_features_; ++f) {
        const double w = model.params.own_weights(i, f);
        if (!(w > 0.0)) throw ConfigError("model/own_weights", "learned weights must be > 0");
        theta(own_off_ + Eigen::Index(i) * n_features_ + f) = std::log(w);
      }
    }
  }
  if (learnable_.pair_weights) {
    for (int p = 0; p < n_pairs_; ++p) {
      const double w = model.params.pair_weights(p);
      if (!(w > 0.0)) throw ConfigError("model/pair_weights", "learned weights must be > 0");
      theta(pair_off_ + p) = std::log(w);
    }
  }
  if (learnable_.goals) {
    for (int i = 0; i < n_agents_; ++i) {
      theta(goal_off_ + 2 * i) = model.params.goals(0, i);
      theta(goal_off_ + 2 * i + 1) = model.params.goals(1, i);
    }
  }
  if (learnable_.inits) {
    for (int m = 0; m < modes_; ++m) theta.segment(init_off_ + m * n_controls_, n_controls_) = model.inits[m].vector();
  }
  return theta;
}

Model ParameterLayout::decode(const Eigen::VectorXd& theta, const Model& base) const {
  if (theta.size() != size_) throw DimensionMismatch("ParameterLayout::decode: size");
  Model out = base;
  if (learnable_.own_weights) {
    for (int i = 0; i < n_agents_; ++i) {
      for (int f = 0; f < n_features_; ++f) {
        out.params.own_weights(i, f) = std::exp(theta(own_off_ + Eigen::Index(i) * n_features_ + f));
      }
    }
  }
  if (learnable_.pair_weights) {
    for (int p = 0; p < n_pairs_; ++p) out.params.pair_weights(p) = std::exp(theta(pair_off_ + p));
  }
  if (learnable_.goals) {
    for (int i = 0; i < n_agents_; ++i) {
      out.params.goals(0, i) = theta(goal_off_ + 2 * i);
      out.params.goals(1, i) = theta(goal_off_ + 2 * i + 1);
    }
  }
  if (learnable_.inits) {
    for (int m = 0; m < modes_; ++m) {
      out.inits[m].vector() = theta.segment(init_off_ + m * n_controls_, n_controls_);
    }
  }
  return out;
}

std::string ParameterLayout::name(Eigen::Index d) const {
  if (d < 0 || d >= size_) return "theta[" + std::to_string(d) + "]";
  if (d < pair_off_) {
    const Eigen::Index local = d - own_off_;
    return "own_weights[" + std::to_string(local / n_features_) + "][" + std::to_string(local % n_features_) + "]";
  }
  if (d < goal_off_) return "pair_weights[" + std::to_string(d - pair_off_) + "]";
  if (d < init_off_) {
    const Eigen::Index local = d - goal_off_;
    return "goals[" + std::to_string(local / 2) + "][" + (local % 2 ? "y" : "x") + "]";
  }
  const Eigen::Index local = d - init_off_;
  return "inits[" + std::to_string(local / n_controls_) + "][" + std::to_string(local % n_controls_) + "]";
}

GameParamsT<Dual> ParameterLayout::dual_params(const Eigen::VectorXd& theta, const Model& base,
                                               const Eigen::Matrix2Xd& goals, Eigen::Index direction) const {
  auto seeded = [&](Eigen::Index idx, double value) { return Dual(value, idx == direction ? 1.0 : 0.0); };
  GameParamsT<Dual> p = base.params.cast<Dual>();
  if (learnable_.own_weights) {
    for (int i = 0; i < n_agents_; ++i) {
      for (int f = 0; f < n_features_; ++f) {
        const Eigen::Index idx = own_off_ + Eigen::Index(i) * n_features_ + f;
        p.own_weights(i, f) = exp(seeded(idx, theta(idx)));
      }
    }
  }
  if (learnable_.pair_weights) {
    for (int q = 0; q < n_pairs_; ++q) p.pair_weights(q) = exp(seeded(pair_off_ + q, theta(pair_off_ + q)));
  }
  if (learnable_.goals) {
    for (int i = 0; i < n_agents_; ++i) {
      p.goals(0, i) = seeded(goal_off_ + 2 * i, theta(goal_off_ + 2 * i));
      p.goals(1, i) = seeded(goal_off_ + 2 * i + 1, theta(goal_off_ + 2 * i + 1));
    }
  } else {
    p.goals = goals.cast<Dual>();
  }
  return p;
}

namespace {

Eigen::Matrix2Xd scene_goals(const Demonstration& demo, const Model& model) {
  return demo.has_goals() ? demo.gt_goals : model.params.goals;
}

Eigen::VectorXd tangents(const VectorX<Dual>& v) {
  return v.unaryExpr([](const Dual& x) { return x.d; });
}

Eigen::MatrixXd tangents(const MatrixX<Dual>& m) {
  return m.unaryExpr([](const Dual& x) { return x.d; });
}

VectorX<Dual> seed(const Eigen::VectorXd& value, const Eigen::VectorXd& tangent) {
  VectorX<Dual> out(value.size());
  for (Eigen::Index j = 0; j < value.size(); ++j) out(j) = Dual(value(j), tangent(j));
  return out;
}

// Scalar loss of the final iterates, in either value or tangent mode.
template <typename Scalar>
Scalar demo_loss(const Demonstration& demo, const LearnConfig& cfg,
                 const std::vector<JointTrajectoryT<Scalar>>& trajectories, const VectorX<Scalar>& energies,
                 const Eigen::Matrix<Scalar, 2, Eigen::Dynamic>& goals, LossBreakdown* parts) {
  const VectorX<Scalar> pi = softmax_neg(energies, cfg.beta);
  Scalar imit(0.0);
  Scalar prob(0.0);
  for (const auto& gt : demo.gt_futures) {
    imit += loss_imitation(trajectories, gt);
    if (cfg.lambda_prob > 0.0) prob += loss_prob(pi, trajectories, gt);
  }
  const Scalar count(static_cast<double>(demo.gt_futures.size()));
  imit /= count;
  prob /= count;
  Scalar goal(0.0);
  if (cfg.lambda_goal > 0.0) {
    if (!demo.has_goals()) throw ConfigError("learn/lambda_goal", "demonstration has no ground-truth goals");
    if (goals.cols() == 0) throw ConfigError("learn/lambda_goal", "model has no goals");
    std::vector<Eigen::Matrix<Scalar, 2, Eigen::Dynamic>> per_mode(trajectories.size(), goals);
    goal = loss_goal(per_mode, demo.gt_goals);
  }
  const Scalar total = Scalar(cfg.lambda_imit) * imit + Scalar(cfg.lambda_goal) * goal + Scalar(cfg.lambda_prob) * prob;
  if (parts) {
    parts->total = value_of(total);
    parts->imitation = value_of(imit);
    parts->goal = value_of(goal);
    parts->prob = value_of(prob);
  }
  return total;
}

}  // namespace

GameParams scene_params(const Demonstration& demo, const Model& model, const LearnConfig& cfg) {
  GameParams p = model.params;
  if (!cfg.learnable.goals) p.goals = scene_goals(demo, model);
  return p;
}

std::vector<JointStrategy> starting_inits(const Demonstration& demo, const Model& model,
                                          const LearnConfig& cfg, const std::vector<JointStrategy>* cached) {
  if (cfg.learnable.inits) return model.inits;
  const GameParams params = scene_params(demo, model, cfg);
  std::vector<JointStrategy> inits;
  if (cached && static_cast<int>(cached->size()) == model.modes) {
    inits = *cached;
  } else if (cfg.warm_start) {
    inits = propose_inits(demo.scenario, params, model.modes, cfg.proposal);
  } else {
    return lateral_inits(demo.scenario, model.modes, cfg.proposal.turn_rate);
  }
  if (!cfg.warm_start) return inits;
  const ResidualSystem sys = build_system(demo.scenario, params);
  for (auto& u : inits) {
    try {
      u = solve(sys, u, cfg.warm_solver).solution;
    } catch (const NumericalError&) {
      // keep the unrefined start
    }
  }
  return inits;
}

OuterGradient outer_gradient(const Demonstration& demo, const Model& model, const LearnConfig& cfg,
                             const std::vector<JointStrategy>& base_inits, bool with_gradient) {
  const ParameterLayout layout(cfg.learnable, model);
  const Eigen::VectorXd theta = layout.encode(model);
  const Eigen::Index n_dirs = with_gradient ? layout.size() : 0;
  const Eigen::Matrix2Xd goals = scene_goals(demo, model);
  const int modes = model.modes;
  const std::vector<JointStrategy>& starts = cfg.learnable.inits ? model.inits : base_inits;
  if (static_cast<int>(starts.size()) != modes) throw DimensionMismatch("outer_gradient: one init per mode required");

  const GameParams value_params = detail::values_of(layout.dual_params(theta, model, goals, -1));
  const ResidualSystem sys = build_system(demo.scenario, value_params);
  std::vector<ResidualSystemT<Dual>> dual_sys;
  dual_sys.reserve(n_dirs);
  for (Eigen::Index d = 0; d < n_dirs; ++d) dual_sys.push_back(sys.rebind(layout.dual_params(theta, model, goals, d)));

  const double lambda = cfg.inner.damping;
  const double alpha = cfg.inner.step_size;
  const Eigen::Index n = sys.num_variables();

  OuterGradient out;
  std::vector<Eigen::VectorXd> u(modes);
  std::vector<Eigen::MatrixXd> u_dot(modes);
  for (int m = 0; m < modes; ++m) {
    sys.check(starts[m]);
    u[m] = starts[m].vector();
    u_dot[m] = Eigen::MatrixXd::Zero(n, n_dirs);
    if (cfg.learnable.inits && n_dirs > 0) {
      u_dot[m].middleCols(layout.init_offset() + m * n, n).setIdentity();
    }
    for (int s = 0; s < cfg.inner.steps; ++s) {
      const Linearization lin = sys.linearize(u[m]);
      const DampedSystem damped(lin.gram, lambda, cfg.inner.diag_floor);
      const Eigen::VectorXd delta = damped.solve(Eigen::VectorXd(-lin.gradient()));
      if (n_dirs > 0) {
        const Eigen::VectorXd j_delta = lin.jacobian * delta;
        auto cols = parallel_map(static_cast<std::size_t>(n_dirs), [&](std::size_t d) {
          const JointStrategyT<Dual> ud(sys.n_agents(), sys.horizon(), sys.dt(), seed(u[m], u_dot[m].col(d)));
          VectorX<Dual> rd;
          MatrixX<Dual> jd;
          dual_sys[d].evaluate(ud, &rd, &jd);
          const Eigen::VectorXd r_dot = tangents(rd);
          const Eigen::MatrixXd j_dot = tangents(jd);
          const Eigen::VectorXd g_dot = j_dot.transpose() * lin.residuals + lin.jacobian.transpose() * r_dot;
          const Eigen::VectorXd diag_dot = 2.0 * lin.jacobian.cwiseProduct(j_dot).colwise().sum().transpose();
          const Eigen::VectorXd a_dot_delta = j_dot.transpose() * j_delta +
                                              lin.jacobian.transpose() * (j_dot * delta) +
                                              lambda * diag_dot.cwiseProduct(delta);
          return Eigen::VectorXd(-g_dot - a_dot_delta);
        });
        Eigen::MatrixXd rhs(n, n_dirs);
        for (Eigen::Index d = 0; d < n_dirs; ++d) rhs.col(d) = cols[d];
        u_dot[m] += alpha * damped.solve(rhs);
      }
      u[m] += alpha * delta;
    }
    out.solutions.push_back(sys.as_strategy(u[m]));
  }

  // Value pass.
  std::vector<JointTrajectory> trajectories;
  out.energies.resize(modes);
  for (int m = 0; m < modes; ++m) {
    trajectories.push_back(rollout(demo.scenario.initial, out.solutions[m]));
    out.energies(m) = sys.energy(out.solutions[m]);
  }
  if (!out.energies.allFinite()) throw NumericalError("outer_gradient: non-finite mode energy");
  demo_loss<double>(demo, cfg, trajectories, out.energies, value_params.goals, &out.loss);

  out.gradient = Eigen::VectorXd::Zero(n_dirs);
  if (n_dirs > 0) {
    auto grads = parallel_map(static_cast<std::size_t>(n_dirs), [&](std::size_t d) {
      std::vector<JointTrajectoryT<Dual>> traj_d;
      VectorX<Dual> energy_d(modes);
      for (int m = 0; m < modes; ++m) {
        const JointStrategyT<Dual> ud(sys.n_agents(), sys.horizon(), sys.dt(), seed(u[m], u_dot[m].col(d)));
        traj_d.push_back(rollout(demo.scenario.initial, ud));
        energy_d(m) = cfg.detach_probabilities ? Dual(out.energies(m), 0.0) : dual_sys[d].energy(ud);
      }
      return demo_loss<Dual>(demo, cfg, traj_d, energy_d, dual_sys[d].params().goals, nullptr).d;
    });
    for (Eigen::Index d = 0; d < n_dirs; ++d) {
      if (!std::isfinite(grads[d])) {
        throw NumericalError("outer_gradient: non-finite derivative for " + layout.name(d));
      }
      out.gradient(d) = grads[d];
    }
  }
  return out;
}

ModeSet predict_demo(const Demonstration& demo, const Model& model, const LearnConfig& cfg,
                     const std::vector<JointStrategy>* cached) {
  const std::vector<JointStrategy> inits = starting_inits(demo, model, cfg, cached);
  const GameParams params = scene_params(demo, model, cfg);
  std::vector<GameParams> per_mode(model.modes, params);
  return predict(demo.scenario, per_mode, inits, cfg.inner, cfg.beta);
}

FitResult fit(const std::vector<Demonstration>& data, const Model& init, const LearnConfig& cfg) {
  cfg.validate();
  if (data.empty()) throw InvalidInput("fit: empty dataset");
  for (const auto& d : data) d.validate();
  const ParameterLayout layout(cfg.learnable, init);
  Eigen::VectorXd theta = layout.encode(init);

  FitResult res;
  res.model = init;
  std::mt19937_64 rng(cfg.seed);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<std::vector<JointStrategy>> cache(data.size());

  Eigen::VectorXd m1 = Eigen::VectorXd::Zero(theta.size());
  Eigen::VectorXd m2 = Eigen::VectorXd::Zero(theta.size());
  const double b1 = 0.9, b2 = 0.999, eps = 1e-8;
  long t = 0;
  double rate = cfg.learning_rate;

  for (int epoch = 0; epoch < cfg.outer_steps; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    LossBreakdown epoch_loss;
    const bool refresh = cfg.proposal_refresh > 0 && epoch % cfg.proposal_refresh == 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t stop = std::min(order.size(), start + cfg.batch_size);
      const Model current = layout.decode(theta, res.model);
      Eigen::VectorXd grad = Eigen::VectorXd::Zero(theta.size());
      for (std::size_t b = start; b < stop; ++b) {
        const std::size_t idx = order[b];
        const std::vector<JointStrategy> inits =
            starting_inits(data[idx], current, cfg, cache[idx].empty() || refresh ? nullptr : &cache[idx]);
        if (!cfg.learnable.inits && cfg.warm_start) cache[idx] = inits;
        const OuterGradient g = outer_gradient(data[idx], current, cfg, inits, true);
        grad += g.gradient;
        epoch_loss.total += g.loss.total;
        epoch_loss.imitation += g.loss.imitation;
        epoch_loss.goal += g.loss.goal;
        epoch_loss.prob += g.loss.prob;
      }
      grad /= static_cast<double>(stop - start);
      if (cfg.optimizer == OuterOptimizer::sgd) {
        theta -= rate * grad;
      } else {
        ++t;
        m1 = b1 * m1 + (1.0 - b1) * grad;
        m2 = b2 * m2 + (1.0 - b2) * grad.cwiseAbs2();
        const Eigen::VectorXd mh = m1 / (1.0 - std::pow(b1, t));
        const Eigen::VectorXd vh = m2 / (1.0 - std::pow(b2, t));
        theta -= rate * (mh.array() / (vh.array().sqrt() + eps)).matrix();
      }
    }
    const double count = static_cast<double>(data.size());
    epoch_loss.total /= count;
    epoch_loss.imitation /= count;
    epoch_loss.goal /= count;
    epoch_loss.prob /= count;
    rate *= cfg.learning_rate_decay;
    res.loss_curve.push_back(epoch_loss.total);
    res.breakdown.push_back(epoch_loss);
    res.epochs = epoch + 1;
    if (!std::isfinite(epoch_loss.total) || epoch_loss.total > cfg.divergence_threshold) {
      throw NumericalError("fit: loss diverged at epoch " + std::to_string(epoch) + " (loss " +
                           std::to_string(epoch_loss.total) + ")");
    }
    if (!theta.allFinite()) throw NumericalError("fit: parameters became non-finite at epoch " + std::to_string(epoch));
  }
  res.model = layout.decode(theta, res.model);
  return res;
}

}  // namespace epg
