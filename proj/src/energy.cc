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

#include "epg/energy.hpp"

#include <array>
#include <set>

namespace epg {

namespace {

constexpr std::array<std::pair<Feature, std::string_view>, 12> kFeatureNames{{
    {Feature::goal, "goal"},
    {Feature::lane, "lane"},
    {Feature::vref, "vref"},
    {Feature::vel, "vel"},
    {Feature::acc, "acc"},
    {Feature::jerk, "jerk"},
    {Feature::turnr, "turnr"},
    {Feature::turnacc, "turnacc"},
    {Feature::velb, "velb"},
    {Feature::accb, "accb"},
    {Feature::turnrb, "turnrb"},
    {Feature::collision, "collision"},
}};

}  // namespace

std::string_view feature_name(Feature f) {
  for (const auto& [feature, name] : kFeatureNames) {
    if (feature == f) return name;
  }
  return "unknown";
}

Feature parse_feature(std::string_view name) {
  for (const auto& [feature, n] : kFeatureNames) {
    if (n == name) return feature;
  }
  throw ConfigError("features", "unknown feature '" + std::string(name) + "'");
}

int pair_index(int i, int j, int n_agents) {
  if (i == j || i < 0 || j < 0 || i >= n_agents || j >= n_agents) {
    throw std::out_of_range("invalid agent pair");
  }
  if (i > j) std::swap(i, j);
  // Pairs before row i: (n-1) + (n-2) + ... + (n-i).
  return i * n_agents - i * (i + 1) / 2 + (j - i - 1);
}

GameParams uniform_params(const FeatureSpec& spec, int n_agents, double own_weight,
                          double pair_weight, double radius) {
  GameParams p;
  p.own_weights = Eigen::MatrixXd::Constant(n_agents, spec.n_own(), own_weight);
  p.pair_weights = Eigen::VectorXd::Constant(pair_count(n_agents), pair_weight);
  p.goals = Eigen::Matrix2Xd::Zero(2, spec.has(Feature::goal) ? n_agents : 0);
  p.radii = Eigen::VectorXd::Constant(n_agents, radius);
  return p;
}

namespace detail {

void validate_game(const FeatureSpec& spec, const GameParams& params, int n_agents) {
  std::set<Feature> seen;
  for (Feature f : spec.own_features) {
    if (f == Feature::collision) {
      throw ConfigError("features/own", "collision is a pairwise feature");
    }
    if (!seen.insert(f).second) {
      throw ConfigError("features/own", "duplicate feature '" + std::string(feature_name(f)) + "'");
    }
  }
  if (spec.collision_stride < 1) throw ConfigError("features/collision_stride", "must be >= 1");
  if (params.radii.size() != n_agents) {
    throw ConfigError("params/radii", "expected " + std::to_string(n_agents) + " radii");
  }
  for (int i = 0; i < n_agents; ++i) {
    if (!(params.radii(i) > 0.0) || !std::isfinite(params.radii(i))) {
      throw ConfigError("params/radii", "radii must be positive");
    }
  }
  if (params.own_weights.rows() != n_agents || params.own_weights.cols() != spec.n_own()) {
    throw ConfigError("params/own_weights",
                      "expected " + std::to_string(n_agents) + " x " + std::to_string(spec.n_own()));
  }
  if (params.pair_weights.size() != pair_count(n_agents)) {
    throw ConfigError("params/pair_weights",
                      "expected " + std::to_string(pair_count(n_agents)) + " entries");
  }
  auto nonneg = [](double w) { return std::isfinite(w) && w >= 0.0; };
  if (!params.own_weights.unaryExpr(nonneg).all()) {
    throw ConfigError("params/own_weights", "weights must be finite and >= 0");
  }
  if (!params.pair_weights.unaryExpr(nonneg).all()) {
    throw ConfigError("params/pair_weights", "weights must be finite and >= 0");
  }
  if (spec.has(Feature::goal)) {
    if (params.goals.cols() != n_agents) {
      throw ConfigError("params/goals", "goal feature requires one goal per agent");
    }
    if (!params.goals.allFinite()) throw ConfigError("params/goals", "goals must be finite");
  }
  if (spec.has(Feature::lane) || spec.has(Feature::vref)) {
    if (static_cast<int>(spec.reference.size()) != n_agents) {
      throw ConfigError("features/reference", "lane/vref require one reference per agent");
    }
    if (spec.has(Feature::lane)) {
      for (const auto& ref : spec.reference) {
        if (ref.polyline.size() < 2) {
          throw ConfigError("features/reference/polyline", "needs at least two points");
        }
        for (std::size_t s = 0; s + 1 < ref.polyline.size(); ++s) {
          if ((ref.polyline[s + 1] - ref.polyline[s]).norm() == 0.0) {
            throw ConfigError("features/reference/polyline", "repeated consecutive point");
          }
        }
      }
    }
  }
  auto need = [](const std::optional<double>& b, const char* field) {
    if (!b) throw ConfigError(field, "bound feature requires this bound");
    if (!(*b >= 0.0) || !std::isfinite(*b)) throw ConfigError(field, "bound must be >= 0");
  };
  if (spec.has(Feature::velb)) need(spec.bounds.v_max, "features/bounds/v_max");
  if (spec.has(Feature::accb)) need(spec.bounds.a_max, "features/bounds/a_max");
  if (spec.has(Feature::turnrb)) need(spec.bounds.omega_max, "features/bounds/omega_max");
}

std::vector<ResidualBlock> layout_blocks(const FeatureSpec& spec, int n_agents, int horizon,
                                         std::vector<std::pair<Eigen::Index, Eigen::Index>>* agent_rows,
                                         std::pair<Eigen::Index, Eigen::Index>* pair_rows) {
  std::vector<ResidualBlock> blocks;
  Eigen::Index row = 0;
  auto add = [&](Feature f, int i, int other, int k, int dim) {
    blocks.push_back({f, i, other, k, dim, row});
    row += dim;
  };
  agent_rows->assign(n_agents, {0, 0});
  for (int i = 0; i < n_agents; ++i) {
    const Eigen::Index start = row;
    for (Feature f : spec.own_features) {
      switch (f) {
        case Feature::goal:
          add(f, i, -1, horizon, 2);
          break;
        case Feature::lane:
        case Feature::vref:
        case Feature::vel:
        case Feature::velb:
          for (int k = 1; k <= horizon; ++k) add(f, i, -1, k, 1);
          break;
        case Feature::acc:
        case Feature::turnr:
        case Feature::accb:
        case Feature::turnrb:
          for (int k = 0; k < horizon; ++k) add(f, i, -1, k, 1);
          break;
        case Feature::jerk:
        case Feature::turnacc:
          for (int k = 1; k < horizon; ++k) add(f, i, -1, k, 1);
          break;
        case Feature::collision:
          break;
      }
    }
    (*agent_rows)[i] = {start, row - start};
  }
  const Eigen::Index pair_start = row;
  if (spec.collision) {
    for (int i = 0; i < n_agents; ++i) {
      for (int j = i + 1; j < n_agents; ++j) {
        for (int k = spec.collision_stride; k <= horizon; k += spec.collision_stride) {
          add(Feature::collision, i, j, k, 1);
        }
      }
    }
  }
  *pair_rows = {pair_start, row - pair_start};
  return blocks;
}

}  // namespace detail

Eigen::VectorXd agent_cost_gradient(const ResidualSystem& sys, const JointStrategy& u, int i) {
  if (i < 0 || i >= sys.n_agents()) throw std::out_of_range("agent index " + std::to_string(i));
  Eigen::VectorXd r;
  Eigen::MatrixXd jac;
  sys.evaluate(u, &r, &jac);
  const Eigen::Index per = Eigen::Index(sys.horizon()) * kControlDim;
  Eigen::VectorXd g = Eigen::VectorXd::Zero(per);
  for (const auto& b : sys.blocks()) {
    const bool mine = b.other < 0 ? b.agent == i : (b.agent == i || b.other == i);
    if (!mine) continue;
    g += jac.block(b.row, i * per, b.dim, per).transpose() * r.segment(b.row, b.dim);
  }
  return g;
}

}  // namespace epg
