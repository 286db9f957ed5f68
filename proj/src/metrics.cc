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

#include "epg/metrics.hpp"

#include <algorithm>
#include <limits>

#include "epg/errors.hpp"

namespace epg {

namespace {

void check_shapes(const std::vector<JointTrajectory>& pred, const JointTrajectory& gt) {
  if (pred.empty()) throw InvalidInput("metrics: no predicted modes");
  for (const auto& p : pred) {
    if (p.n_agents() != gt.n_agents() || p.horizon() != gt.horizon()) {
      throw DimensionMismatch("metrics: prediction and ground truth differ in shape");
    }
  }
  if (gt.horizon() < 1) throw DimensionMismatch("metrics: horizon must be >= 1");
}

// Mean (over steps 1..K) and final L2 error of agent i. Summed in time order
// so the value does not depend on how Eigen vectorizes a reduction.
std::pair<double, double> agent_errors(const JointTrajectory& p, const JointTrajectory& gt, int i) {
  const int horizon = gt.horizon();
  double sum = 0.0;
  double last = 0.0;
  for (int k = 1; k <= horizon; ++k) {
    last = (p.position(i, k) - gt.position(i, k)).norm();
    sum += last;
  }
  return {sum / horizon, last};
}

std::vector<JointTrajectory> trajectories(const ModeSet& m) {
  std::vector<JointTrajectory> out;
  for (const auto& mode : m.modes) out.push_back(mode.trajectory);
  return out;
}

}  // namespace

std::pair<double, double> min_ade_fde(const std::vector<JointTrajectory>& pred, const JointTrajectory& gt) {
  check_shapes(pred, gt);
  double ade = 0.0;
  double fde = 0.0;
  for (int i = 0; i < gt.n_agents(); ++i) {
    double best_ade = std::numeric_limits<double>::infinity();
    double best_fde = std::numeric_limits<double>::infinity();
    for (const auto& p : pred) {
      const auto [a, f] = agent_errors(p, gt, i);
      best_ade = std::min(best_ade, a);
      best_fde = std::min(best_fde, f);
    }
    ade += best_ade;
    fde += best_fde;
  }
  return {ade / gt.n_agents(), fde / gt.n_agents()};
}

std::pair<double, double> min_ade_fde(const ModeSet& pred, const JointTrajectory& gt) {
  return min_ade_fde(trajectories(pred), gt);
}

std::pair<double, double> min_sade_sfde(const std::vector<JointTrajectory>& pred, const JointTrajectory& gt) {
  check_shapes(pred, gt);
  double best_sade = std::numeric_limits<double>::infinity();
  double best_sfde = std::numeric_limits<double>::infinity();
  for (const auto& p : pred) {
    double sade = 0.0;
    double sfde = 0.0;
    for (int i = 0; i < gt.n_agents(); ++i) {
      const auto [a, f] = agent_errors(p, gt, i);
      sade += a;
      sfde += f;
    }
    best_sade = std::min(best_sade, sade / gt.n_agents());
    best_sfde = std::min(best_sfde, sfde / gt.n_agents());
  }
  return {best_sade, best_sfde};
}

std::pair<double, double> min_sade_sfde(const ModeSet& pred, const JointTrajectory& gt) {
  return min_sade_sfde(trajectories(pred), gt);
}

int overlap(const JointTrajectory& traj, const Eigen::VectorXd& radii) {
  if (radii.size() != traj.n_agents()) throw DimensionMismatch("overlap: radii size");
  for (int k = 1; k <= traj.horizon(); ++k) {
    for (int i = 0; i < traj.n_agents(); ++i) {
      for (int j = i + 1; j < traj.n_agents(); ++j) {
        if ((traj.position(i, k) - traj.position(j, k)).norm() < radii(i) + radii(j)) return 1;
      }
    }
  }
  return 0;
}

int overlap_rate(const ModeSet& pred, const Eigen::VectorXd& radii) {
  return overlap(pred.modes[pred.most_likely()].trajectory, radii);
}

ModeSet cv_baseline(const Scenario& scenario) {
  scenario.validate();
  Mode mode;
  mode.init = JointStrategy(scenario.n_agents(), scenario.horizon, scenario.dt);
  mode.solution = mode.init;
  mode.trajectory = rollout(scenario.initial, mode.solution);
  ModeSet out;
  out.modes.push_back(std::move(mode));
  out.probabilities = Eigen::VectorXd::Ones(1);
  return out;
}

SampleMetrics sample_metrics(const ModeSet& pred, const std::vector<JointTrajectory>& gt_futures,
                             const Eigen::VectorXd& radii) {
  if (gt_futures.empty()) throw InvalidInput("sample_metrics: no ground-truth future");
  SampleMetrics s;
  for (const auto& gt : gt_futures) {
    const auto [ade, fde] = min_ade_fde(pred, gt);
    const auto [sade, sfde] = min_sade_sfde(pred, gt);
    s.min_ade += ade;
    s.min_fde += fde;
    s.min_sade += sade;
    s.min_sfde += sfde;
  }
  const double n = static_cast<double>(gt_futures.size());
  s.min_ade /= n;
  s.min_fde /= n;
  s.min_sade /= n;
  s.min_sfde /= n;
  s.overlap = overlap_rate(pred, radii);
  return s;
}

MetricReport summarize(std::vector<SampleMetrics> samples) {
  MetricReport r;
  r.sample_count = static_cast<int>(samples.size());
  for (const auto& s : samples) {
    r.min_ade += s.min_ade;
    r.min_fde += s.min_fde;
    r.min_sade += s.min_sade;
    r.min_sfde += s.min_sfde;
    r.overlap_rate += s.overlap;
  }
  if (r.sample_count > 0) {
    const double n = r.sample_count;
    r.min_ade /= n;
    r.min_fde /= n;
    r.min_sade /= n;
    r.min_sfde /= n;
    r.overlap_rate /= n;
  }
  r.samples = std::move(samples);
  return r;
}

}  // namespace epg
