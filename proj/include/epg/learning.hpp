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

#ifndef EPG_LEARNING_HPP_
#define EPG_LEARNING_HPP_

#include <algorithm>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "epg/dual.hpp"
#include "epg/dynamics.hpp"
#include "epg/energy.hpp"
#include "epg/game.hpp"
#include "epg/solver.hpp"

namespace epg {

/// One training sample: an observed scene and one or more joint futures
/// that are all consistent with it.
struct Demonstration {
  Scenario scenario;
  std::vector<JointTrajectory> gt_futures;
  std::vector<JointStrategy> gt_strategies;  // empty, or one per future
  Eigen::Matrix2Xd gt_goals;                 // 2 x N, or empty
  int source = 0;                            // generating episode
  int step = 0;                              // step within the episode
  bool flagged = false;                      // fewer distinct futures than requested

  bool has_goals() const { return gt_goals.cols() > 0; }
  void validate() const;
};

/// Shared model: weights (and goals) of every mode plus learned initial
/// strategies, one per mode.
struct Model {
  GameParams params;
  std::vector<JointStrategy> inits;  // empty unless inits are learned
  int modes = 1;
};

struct LearnableSet {
  bool own_weights = true;
  bool pair_weights = false;
  bool goals = false;
  bool inits = false;
};

enum class OuterOptimizer { sgd, adam };

struct LearnConfig {
  LearnableSet learnable;
  int outer_steps = 50;  // epochs
  int batch_size = 16;
  double learning_rate = 0.05;
  double learning_rate_decay = 1.0;  // multiplied into the rate after every epoch
  OuterOptimizer optimizer = OuterOptimizer::adam;
  double lambda_imit = 1.0;
  double lambda_goal = 0.1;
  double lambda_prob = 0.1;
  double beta = 1.0;
  bool detach_probabilities = false;
  SolverConfig inner;  // differentiated steps, must be fixed mode
  // Non-differentiated pre-solve that moves each mode's starting point close
  // to the current equilibrium before the differentiated steps.
  bool warm_start = true;
  SolverConfig warm_solver = SolverConfig::adaptive(30);
  InitProposal proposal;
  // Epoch period for re-running the proposer instead of warm starting from
  // the previous epoch's solutions (0 = never). Re-proposing lets modes
  // that collapsed under early parameter values separate again.
  int proposal_refresh = 5;
  std::uint64_t seed = 0;
  double divergence_threshold = 1e12;

  void validate() const;
};

/// Flat learned-parameter vector θ:
/// [log own weights (agent-major) | log pair weights | goals (x, y per agent) |
///  init controls of mode 0, 1, ...], each part present only when learnable.
class ParameterLayout {
 public:
  ParameterLayout(const LearnableSet& learnable, const Model& model);

  Eigen::Index size() const { return size_; }
  Eigen::VectorXd encode(const Model& model) const;
  Model decode(const Eigen::VectorXd& theta, const Model& base) const;
  std::string name(Eigen::Index d) const;

  /// Parameters with the tangent of coordinate `direction` seeded
  /// (direction < 0 for none). Goals come from `goals` when not learned.
  GameParamsT<Dual> dual_params(const Eigen::VectorXd& theta, const Model& base,
                                const Eigen::Matrix2Xd& goals, Eigen::Index direction) const;

  Eigen::Index own_offset() const { return own_off_; }
  Eigen::Index pair_offset() const { return pair_off_; }
  Eigen::Index goal_offset() const { return goal_off_; }
  Eigen::Index init_offset() const { return init_off_; }
  const LearnableSet& learnable() const { return learnable_; }

 private:
  LearnableSet learnable_;
  int n_agents_ = 0;
  int n_features_ = 0;
  int n_pairs_ = 0;
  int modes_ = 0;
  Eigen::Index n_controls_ = 0;
  Eigen::Index own_off_ = 0, pair_off_ = 0, goal_off_ = 0, init_off_ = 0, size_ = 0;
};

// Losses. Per mode, the imitation error is Σ_k ‖p_i^k - p̂_i^k‖² over
// k = 1..K, averaged over agents.

template <typename Scalar>
Scalar imitation_error(const JointTrajectoryT<Scalar>& pred, const JointTrajectory& gt) {
  if (pred.n_agents() != gt.n_agents() || pred.horizon() != gt.horizon()) {
    throw DimensionMismatch("imitation_error: shape mismatch");
  }
  Scalar total(0.0);
  for (int i = 0; i < gt.n_agents(); ++i) {
    for (int k = 1; k <= gt.horizon(); ++k) {
      const Vector2<Scalar> d = pred.position(i, k) - gt.position(i, k).template cast<Scalar>();
      total += d.x() * d.x() + d.y() * d.y();
    }
  }
  return total / Scalar(gt.n_agents());
}

/// Index of the mode with the smallest imitation error, lowest on ties.
template <typename Scalar>
int closest_mode(const std::vector<JointTrajectoryT<Scalar>>& pred, const JointTrajectory& gt) {
  int best = 0;
  double best_err = value_of(imitation_error(pred.front(), gt));
  for (int m = 1; m < static_cast<int>(pred.size()); ++m) {
    const double e = value_of(imitation_error(pred[m], gt));
    if (e < best_err) {
      best_err = e;
      best = m;
    }
  }
  return best;
}

/// min over modes of the imitation error.
template <typename Scalar>
Scalar loss_imitation(const std::vector<JointTrajectoryT<Scalar>>& pred, const JointTrajectory& gt) {
  if (pred.empty()) throw InvalidInput("loss_imitation: no modes");
  return imitation_error(pred[closest_mode(pred, gt)], gt);
}

/// -log π of the mode closest to the ground truth.
template <typename Scalar>
Scalar loss_prob(const VectorX<Scalar>& probabilities, const std::vector<JointTrajectoryT<Scalar>>& pred,
                 const JointTrajectory& gt) {
  if (probabilities.size() != static_cast<Eigen::Index>(pred.size())) {
    throw DimensionMismatch("loss_prob: probabilities vs modes");
  }
  using std::log;
  const Scalar p = probabilities(closest_mode(pred, gt));
  if (!(value_of(p) > 0.0)) throw NumericalError("loss_prob: closest mode has zero probability");
  return -log(p);
}

/// min over modes of the agent-averaged squared goal error.
template <typename Scalar>
Scalar loss_goal(const std::vector<Eigen::Matrix<Scalar, 2, Eigen::Dynamic>>& pred_goals,
                 const Eigen::Matrix2Xd& gt_goals) {
  if (pred_goals.empty()) throw InvalidInput("loss_goal: no modes");
  Scalar best(0.0);
  for (std::size_t m = 0; m < pred_goals.size(); ++m) {
    if (pred_goals[m].cols() != gt_goals.cols()) throw DimensionMismatch("loss_goal: goal count");
    Scalar e(0.0);
    for (Eigen::Index i = 0; i < gt_goals.cols(); ++i) {
      const Scalar dx = pred_goals[m](0, i) - gt_goals(0, i);
      const Scalar dy = pred_goals[m](1, i) - gt_goals(1, i);
      e += dx * dx + dy * dy;
    }
    e /= Scalar(static_cast<double>(gt_goals.cols()));
    if (m == 0 || value_of(e) < value_of(best)) best = e;
  }
  return best;
}

/// Numerically stable softmax(-beta * E) for any scalar type.
template <typename Scalar>
VectorX<Scalar> softmax_neg(const VectorX<Scalar>& energies, double beta) {
  using std::exp;
  double top = -std::numeric_limits<double>::infinity();
  for (Eigen::Index m = 0; m < energies.size(); ++m) top = std::max(top, -beta * value_of(energies(m)));
  VectorX<Scalar> p(energies.size());
  Scalar total(0.0);
  for (Eigen::Index m = 0; m < energies.size(); ++m) {
    p(m) = exp(Scalar(-beta) * energies(m) - Scalar(top));
    total += p(m);
  }
  return p / total;
}

struct LossBreakdown {
  double total = 0.0;
  double imitation = 0.0;
  double goal = 0.0;
  double prob = 0.0;
};

struct OuterGradient {
  LossBreakdown loss;
  Eigen::VectorXd gradient;  // d loss / d θ in ParameterLayout order
  std::vector<JointStrategy> solutions;
  Eigen::VectorXd energies;
};

/// Loss of one demonstration after the differentiated inner steps and,
/// when `with_gradient`, its exact derivative with respect to θ.
/// `base_inits` are the starting strategies used when inits are not learned.
OuterGradient outer_gradient(const Demonstration& demo, const Model& model, const LearnConfig& cfg,
                             const std::vector<JointStrategy>& base_inits, bool with_gradient = true);

/// Starting strategies for a demonstration: learned inits, or proposer
/// output refined by the warm solver when enabled, else lateral inits.
std::vector<JointStrategy> starting_inits(const Demonstration& demo, const Model& model,
                                          const LearnConfig& cfg,
                                          const std::vector<JointStrategy>* cached = nullptr);

/// Parameters the model uses on a given scene (goals from the
/// demonstration unless learned).
GameParams scene_params(const Demonstration& demo, const Model& model, const LearnConfig& cfg);

/// Prediction of the model on a demonstration (inner steps not
/// differentiated).
ModeSet predict_demo(const Demonstration& demo, const Model& model, const LearnConfig& cfg,
                     const std::vector<JointStrategy>* cached = nullptr);

struct FitResult {
  Model model;
  std::vector<double> loss_curve;  // mean training loss per epoch
  std::vector<LossBreakdown> breakdown;
  int epochs = 0;
};

/// Gradient-based fit of the learnable parameters. Throws NumericalError
/// when the loss diverges or a gradient entry is not finite.
FitResult fit(const std::vector<Demonstration>& data, const Model& init, const LearnConfig& cfg);

}  // namespace epg

#endif  // EPG_LEARNING_HPP_
