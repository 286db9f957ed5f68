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

#ifndef EPG_METRICS_HPP_
#define EPG_METRICS_HPP_

#include <utility>
#include <vector>

#include <Eigen/Core>

#include "epg/dynamics.hpp"
#include "epg/game.hpp"

namespace epg {

// Displacement metrics in metres. ADE-style values average the L2 position
// error over steps 1..K (the initial state is shared and excluded); FDE-style
// values use step K only.

struct SampleMetrics {
  double min_ade = 0.0;
  double min_fde = 0.0;
  double min_sade = 0.0;
  double min_sfde = 0.0;
  double overlap = 0.0;
};

struct MetricReport {
  double min_ade = 0.0;
  double min_fde = 0.0;
  double min_sade = 0.0;
  double min_sfde = 0.0;
  double overlap_rate = 0.0;
  std::vector<SampleMetrics> samples;
  int sample_count = 0;
};

/// Marginal metrics: for every agent the best mode is chosen independently.
std::pair<double, double> min_ade_fde(const std::vector<JointTrajectory>& pred, const JointTrajectory& gt);
std::pair<double, double> min_ade_fde(const ModeSet& pred, const JointTrajectory& gt);

/// Scene metrics: one mode must explain all agents.
std::pair<double, double> min_sade_sfde(const std::vector<JointTrajectory>& pred, const JointTrajectory& gt);
std::pair<double, double> min_sade_sfde(const ModeSet& pred, const JointTrajectory& gt);

/// 1 when any pair of circles strictly overlaps at any predicted step of the
/// most likely mode, else 0.
int overlap(const JointTrajectory& traj, const Eigen::VectorXd& radii);
int overlap_rate(const ModeSet& pred, const Eigen::VectorXd& radii);

/// Zero-control rollout (constant speed and heading), one mode with π = 1.
ModeSet cv_baseline(const Scenario& scenario);

/// Metrics of one prediction against possibly several ground-truth futures:
/// displacement values are averaged over the futures.
SampleMetrics sample_metrics(const ModeSet& pred, const std::vector<JointTrajectory>& gt_futures,
                             const Eigen::VectorXd& radii);

MetricReport summarize(std::vector<SampleMetrics> samples);

}  // namespace epg

#endif  // EPG_METRICS_HPP_
