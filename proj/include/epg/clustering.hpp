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

#ifndef EPG_CLUSTERING_HPP_
#define EPG_CLUSTERING_HPP_

#include <vector>

#include "epg/dynamics.hpp"

namespace epg {

/// max over agents and steps of the position distance between two
/// trajectories of identical shape.
double trajectory_distance(const JointTrajectory& a, const JointTrajectory& b);

struct ClusterResult {
  std::vector<std::vector<int>> clusters;  // member indices, ascending
  std::vector<int> representatives;        // lowest-energy member per cluster
  std::vector<int> sizes;
};

/// Single-linkage agglomerative clustering: two solutions share a cluster
/// when a chain of pairwise trajectory distances below eps connects them.
/// Clusters are ordered by size (descending), then representative energy
/// (ascending), then lowest member index.
ClusterResult cluster(const std::vector<JointTrajectory>& trajectories,
                      const std::vector<double>& energies, double eps);

}  // namespace epg

#endif  // EPG_CLUSTERING_HPP_
