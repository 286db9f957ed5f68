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

#include "epg/clustering.hpp"

#include <algorithm>
#include <numeric>

#include "epg/errors.hpp"

namespace epg {

double trajectory_distance(const JointTrajectory& a, const JointTrajectory& b) {
  if (a.n_agents() != b.n_agents() || a.horizon() != b.horizon()) {
    throw DimensionMismatch("trajectory_distance: shape mismatch");
  }
  double worst = 0.0;
  for (int i = 0; i < a.n_agents(); ++i) {
    const auto diff = (a.agent(i).topRows<2>() - b.agent(i).topRows<2>()).eval();
    worst = std::max(worst, diff.colwise().norm().maxCoeff());
  }
  return worst;
}

ClusterResult cluster(const std::vector<JointTrajectory>& trajectories,
                      const std::vector<double>& energies, double eps) {
  const int n = static_cast<int>(trajectories.size());
  if (n == 0) throw InvalidInput("cluster: no solutions");
  if (static_cast<int>(energies.size()) != n) throw DimensionMismatch("cluster: energies size");

  std::vector<int> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](int x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (int a = 0; a < n; ++a) {
    for (int b = a + 1; b < n; ++b) {
      if (find(a) == find(b)) continue;
      if (trajectory_distance(trajectories[a], trajectories[b]) < eps) {
        parent[std::max(find(a), find(b))] = std::min(find(a), find(b));
      }
    }
  }

  std::vector<std::vector<int>> groups;
  std::vector<int> slot(n, -1);
  for (int a = 0; a < n; ++a) {
    const int root = find(a);
    if (slot[root] < 0) {
      slot[root] = static_cast<int>(groups.size());
      groups.emplace_back();
    }
    groups[slot[root]].push_back(a);
  }
  auto representative = [&](const std::vector<int>& g) {
    return *std::min_element(g.begin(), g.end(), [&](int x, int y) {
      return energies[x] < energies[y] || (energies[x] == energies[y] && x < y);
    });
  };
  std::stable_sort(groups.begin(), groups.end(), [&](const auto& x, const auto& y) {
    if (x.size() != y.size()) return x.size() > y.size();
    const double ex = energies[representative(x)];
    const double ey = energies[representative(y)];
    if (ex != ey) return ex < ey;
    return x.front() < y.front();
  });

  ClusterResult out;
  for (auto& g : groups) {
    out.representatives.push_back(representative(g));
    out.sizes.push_back(static_cast<int>(g.size()));
    out.clusters.push_back(std::move(g));
  }
  return out;
}

}  // namespace epg
