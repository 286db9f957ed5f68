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

#include "epg/solver.hpp"

#include <Eigen/SVD>

#include "epg/parallel.hpp"

namespace epg {

void SolverConfig::validate() const {
  if (steps < 0) throw ConfigError("solver/steps", "must be >= 0");
  if (!(step_size > 0.0 && step_size <= 1.0)) throw ConfigError("solver/step_size", "must be in (0, 1]");
  if (!(damping >= 0.0) || !std::isfinite(damping)) throw ConfigError("solver/damping", "must be >= 0");
  if (!(diag_floor >= 0.0)) throw ConfigError("solver/diag_floor", "must be >= 0");
  if (!(damping_increase > 1.0) || !(damping_decrease > 1.0)) {
    throw ConfigError("solver/damping_factors", "must exceed 1");
  }
}

DampedSystem::DampedSystem(const Eigen::MatrixXd& gram, double damping, double diag_floor)
    : damping_(damping) {
  Eigen::MatrixXd a = gram;
  a.diagonal() = gram.diagonal() * (1.0 + damping) + Eigen::VectorXd::Constant(gram.rows(), diag_floor);
  llt_.compute(a);
  if (llt_.info() != Eigen::Success || !a.allFinite()) {
    throw NumericalError("LM system is not positive definite (n=" + std::to_string(a.rows()) +
                         ", damping=" + std::to_string(damping) +
                         ", min diag=" + std::to_string(a.diagonal().minCoeff()) + ")");
  }
}

Eigen::MatrixXd DampedSystem::solve(const Eigen::MatrixXd& rhs) const {
  Eigen::MatrixXd x = llt_.solve(rhs);
  if (!x.allFinite()) {
    throw NumericalError("LM solve produced non-finite step (damping=" + std::to_string(damping_) + ")");
  }
  return x;
}

Eigen::VectorXd DampedSystem::solve(const Eigen::VectorXd& rhs) const {
  Eigen::VectorXd x = llt_.solve(rhs);
  if (!x.allFinite()) {
    throw NumericalError("LM solve produced non-finite step (damping=" + std::to_string(damping_) + ")");
  }
  return x;
}

Eigen::VectorXd LinearLeastSquares::optimum() const {
  return a_.completeOrthogonalDecomposition().solve(b_);
}

StrategyStep lm_step(const ResidualSystem& sys, const JointStrategy& u, double damping,
                     double step_size, double diag_floor) {
  sys.check(u);
  auto step = lm_step(sys, u.vector(), damping, step_size, diag_floor);
  return {sys.as_strategy(step.next), std::move(step.delta)};
}

SolveResult solve(const ResidualSystem& sys, const JointStrategy& init, const SolverConfig& cfg) {
  sys.check(init);
  auto out = solve(sys, init.vector(), cfg);
  return {sys.as_strategy(out.x), std::move(out.report)};
}

std::vector<ModeSolve> solve_modes(const std::vector<ResidualSystem>& systems,
                                   const std::vector<JointStrategy>& inits,
                                   const SolverConfig& cfg) {
  if (systems.size() != inits.size()) throw DimensionMismatch("solve_modes: systems vs inits");
  for (std::size_t m = 1; m < systems.size(); ++m) {
    if (systems[m].n_agents() != systems[0].n_agents() ||
        systems[m].horizon() != systems[0].horizon() || systems[m].dt() != systems[0].dt()) {
      throw DimensionMismatch("solve_modes: all modes must share N, K and dt");
    }
  }
  return parallel_map(systems.size(), [&](std::size_t m) {
    ModeSolve out;
    try {
      out.result = solve(systems[m], inits[m], cfg);
    } catch (const std::exception& e) {
      out.error = e.what();
    }
    return out;
  });
}

}  // namespace epg
