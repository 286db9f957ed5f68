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

#ifndef EPG_SOLVER_HPP_
#define EPG_SOLVER_HPP_

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "epg/energy.hpp"
#include "epg/errors.hpp"
#include "epg/least_squares.hpp"

namespace epg {

enum class SolverMode { fixed, adaptive };

/// Levenberg-Marquardt settings. Defaults are the few-step configuration
/// used for learned initialisations: two undamped-acceptance steps of size
/// 0.3 with damping 10.
struct SolverConfig {
  int steps = 2;
  double step_size = 0.3;
  double damping = 10.0;
  SolverMode mode = SolverMode::fixed;
  double damping_increase = 10.0;
  double damping_decrease = 10.0;
  double damping_min = 1e-7;
  double damping_max = 1e7;
  double diag_floor = 1e-8;
  double convergence_tol = 1e-8;  // on ‖Δu‖∞

  void validate() const;

  static SolverConfig adaptive(int steps, double step_size = 1.0, double damping = 1e-2) {
    SolverConfig c;
    c.mode = SolverMode::adaptive;
    c.steps = steps;
    c.step_size = step_size;
    c.damping = damping;
    return c;
  }
};

struct StepRecord {
  double damping = 0.0;
  double trial_energy = 0.0;
  double step_inf_norm = 0.0;
  bool accepted = false;
};

struct SolveReport {
  std::vector<double> energies;  // energy of every accepted iterate, starting point first
  double final_energy = 0.0;
  bool converged = false;
  int accepted_steps = 0;
  int rejected_steps = 0;
  double final_damping = 0.0;
  double gradient_inf_norm = 0.0;  // ‖Jᵀr‖∞ at the returned point
  std::vector<StepRecord> log;
};

/// Cholesky factor of JᵀJ + λ·diag(JᵀJ) + ε·I.
class DampedSystem {
 public:
  DampedSystem(const Eigen::MatrixXd& gram, double damping, double diag_floor);

  Eigen::MatrixXd solve(const Eigen::MatrixXd& rhs) const;
  Eigen::VectorXd solve(const Eigen::VectorXd& rhs) const;

 private:
  Eigen::LLT<Eigen::MatrixXd> llt_;
  double damping_;
};

/// Solution Δ of (JᵀJ + λ diag(JᵀJ) + ε I) Δ = -Jᵀ r.
inline Eigen::VectorXd lm_direction(const Linearization& lin, double damping, double diag_floor) {
  return DampedSystem(lin.gram, damping, diag_floor).solve(Eigen::VectorXd(-lin.gradient()));
}

struct VectorStep {
  Eigen::VectorXd next;
  Eigen::VectorXd delta;
};

template <LeastSquaresProblem P>
VectorStep lm_step(const P& problem, const Eigen::VectorXd& x, double damping, double step_size,
                  double diag_floor = 1e-8) {
  if (!(damping >= 0.0)) throw InvalidInput("lm_step: damping must be >= 0");
  const Linearization lin = problem.linearize(x);
  Eigen::VectorXd delta = lm_direction(lin, damping, diag_floor);
  Eigen::VectorXd next = x + step_size * delta;
  return {std::move(next), std::move(delta)};
}

struct StrategyStep {
  JointStrategy next;
  Eigen::VectorXd delta;
};

StrategyStep lm_step(const ResidualSystem& sys, const JointStrategy& u, double damping,
                     double step_size, double diag_floor = 1e-8);

struct VectorSolve {
  Eigen::VectorXd x;
  SolveReport report;
};

/// Minimises ½‖r(x)‖².
///
/// fixed: exactly cfg.steps unconditional steps x += αΔ at constant damping.
/// adaptive: a step is taken only when it strictly lowers the energy;
/// otherwise the damping grows and the step is retried. cfg.steps bounds the
/// number of accepted steps.
template <LeastSquaresProblem P>
VectorSolve solve(const P& problem, Eigen::VectorXd x, const SolverConfig& cfg) {
  cfg.validate();
  if (x.size() != problem.num_variables()) {
    throw DimensionMismatch("solve: initial point has wrong size");
  }
  SolveReport rep;
  double energy = problem.cost(x);
  if (!std::isfinite(energy)) throw NumericalError("solve: non-finite initial energy");
  rep.energies.push_back(energy);
  double damping = cfg.damping;
  Linearization lin;
  bool have_lin = false;

  if (cfg.mode == SolverMode::fixed) {
    for (int s = 0; s < cfg.steps; ++s) {
      lin = problem.linearize(x);
      const Eigen::VectorXd delta = lm_direction(lin, damping, cfg.diag_floor);
      x += cfg.step_size * delta;
      energy = problem.cost(x);
      const double step_norm = delta.template lpNorm<Eigen::Infinity>();
      rep.log.push_back({damping, energy, step_norm, true});
      rep.energies.push_back(energy);
      ++rep.accepted_steps;
      rep.converged = step_norm < cfg.convergence_tol;
    }
  } else {
    while (rep.accepted_steps < cfg.steps) {
      lin = problem.linearize(x);
      have_lin = true;
      bool accepted = false;
      bool stop = false;
      while (!accepted) {
        const Eigen::VectorXd delta = lm_direction(lin, damping, cfg.diag_floor);
        const double step_norm = delta.template lpNorm<Eigen::Infinity>();
        if (step_norm < cfg.convergence_tol) {
          rep.converged = true;
          stop = true;
          break;
        }
        const Eigen::VectorXd trial = x + cfg.step_size * delta;
        const double trial_energy = problem.cost(trial);
        if (std::isfinite(trial_energy) && trial_energy < energy) {
          rep.log.push_back({damping, trial_energy, step_norm, true});
          x = trial;
          energy = trial_energy;
          rep.energies.push_back(energy);
          ++rep.accepted_steps;
          damping = std::max(damping / cfg.damping_decrease, cfg.damping_min);
          accepted = true;
          have_lin = false;
        } else {
          rep.log.push_back({damping, trial_energy, step_norm, false});
          ++rep.rejected_steps;
          damping = std::max(damping, cfg.damping_min) * cfg.damping_increase;
          if (damping > cfg.damping_max) {
            stop = true;
            break;
          }
        }
      }
      if (stop) break;
    }
  }
  if (!have_lin) lin = problem.linearize(x);
  rep.final_energy = energy;
  rep.final_damping = damping;
  rep.gradient_inf_norm = lin.gradient().template lpNorm<Eigen::Infinity>();
  return {std::move(x), std::move(rep)};
}

struct SolveResult {
  JointStrategy solution;
  SolveReport report;
};

SolveResult solve(const ResidualSystem& sys, const JointStrategy& init, const SolverConfig& cfg);

struct ModeSolve {
  std::optional<SolveResult> result;
  std::string error;

  bool ok() const { return result.has_value(); }
};

/// Solves every mode independently (in parallel). A failing mode reports its
/// error without affecting the others.
std::vector<ModeSolve> solve_modes(const std::vector<ResidualSystem>& systems,
                                   const std::vector<JointStrategy>& inits,
                                   const SolverConfig& cfg);

}  // namespace epg

#endif  // EPG_SOLVER_HPP_
