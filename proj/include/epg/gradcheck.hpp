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

#ifndef EPG_GRADCHECK_HPP_
#define EPG_GRADCHECK_HPP_

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "epg/energy.hpp"
#include "epg/game.hpp"
#include "epg/learning.hpp"

namespace epg {

/// A random game instance with every own feature enabled.
struct RandomGame {
  Scenario scenario;
  GameParams params;
  JointStrategy u;
};

struct RandomGameOptions {
  int min_agents = 1;
  int max_agents = 3;
  int min_horizon = 3;
  int max_horizon = 20;
  double min_hinge_margin = 1e-4;  // resample until every hinge is this far from its kink
};

RandomGame random_game(std::mt19937_64& rng, const RandomGameOptions& opts = {});

/// |a - b| / max(|a|, |b|, 1), maximised over entries.
double max_relative_error(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);

/// Central differences of a vector function.
template <typename F>
Eigen::MatrixXd central_difference(F&& f, const Eigen::VectorXd& x, double h) {
  const Eigen::VectorXd f0 = f(x);
  Eigen::MatrixXd jac(f0.size(), x.size());
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    Eigen::VectorXd xp = x, xm = x;
    xp(j) += h;
    xm(j) -= h;
    jac.col(j) = (f(xp) - f(xm)) / (2.0 * h);
  }
  return jac;
}

struct GradcheckOptions {
  std::uint64_t seed = 0;
  int instances = 20;
  double tolerance = 1e-4;
  // Negates agent 0's own-feature rows of the analytic residual Jacobian to
  // prove the harness detects a wrong derivative.
  bool inject_bug = false;
};

struct GradcheckRow {
  std::string name;
  int instances = 0;
  double max_rel_err = 0.0;
  double tolerance = 0.0;
  bool pass = false;
};

struct GradcheckReport {
  std::vector<GradcheckRow> rows;
  bool all_pass() const;
  std::string table() const;
};

GradcheckReport run_gradcheck(const GradcheckOptions& opts);

/// One outer-gradient check instance: returns the max relative error of
/// outer_gradient against central differences on θ.
struct OuterCheck {
  double max_rel_err = 0.0;
  Eigen::Index parameters = 0;
  int steps = 0;
};
OuterCheck check_outer_gradient(std::mt19937_64& rng, double h = 1e-5);

}  // namespace epg

#endif  // EPG_GRADCHECK_HPP_
