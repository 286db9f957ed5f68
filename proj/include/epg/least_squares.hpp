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

#ifndef EPG_LEAST_SQUARES_HPP_
#define EPG_LEAST_SQUARES_HPP_

#include <concepts>

#include <Eigen/Core>

namespace epg {

/// First-order model of a residual vector at a point. `gram` holds JᵀJ
/// (full symmetric); problems with block structure may assemble it faster
/// than a dense product.
struct Linearization {
  Eigen::VectorXd residuals;
  Eigen::MatrixXd jacobian;
  Eigen::MatrixXd gram;

  Eigen::VectorXd gradient() const { return jacobian.transpose() * residuals; }
};

/// Anything minimised as ½‖r(x)‖² over a flat variable vector.
template <typename P>
concept LeastSquaresProblem = requires(const P& p, const Eigen::VectorXd& x) {
  { p.num_variables() } -> std::convertible_to<Eigen::Index>;
  { p.cost(x) } -> std::convertible_to<double>;
  { p.linearize(x) } -> std::same_as<Linearization>;
};

/// r(x) = A x - b. Used for closed-form checks of the solver.
class LinearLeastSquares {
 public:
  LinearLeastSquares(Eigen::MatrixXd a, Eigen::VectorXd b) : a_(std::move(a)), b_(std::move(b)) {}

  Eigen::Index num_variables() const { return a_.cols(); }
  double cost(const Eigen::VectorXd& x) const { return 0.5 * (a_ * x - b_).squaredNorm(); }
  Linearization linearize(const Eigen::VectorXd& x) const {
    return {a_ * x - b_, a_, a_.transpose() * a_};
  }

  /// Minimum-norm least-squares solution.
  Eigen::VectorXd optimum() const;

  const Eigen::MatrixXd& matrix() const { return a_; }
  const Eigen::VectorXd& target() const { return b_; }

 private:
  Eigen::MatrixXd a_;
  Eigen::VectorXd b_;
};

}  // namespace epg

#endif  // EPG_LEAST_SQUARES_HPP_
