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

#ifndef EPG_IO_HPP_
#define EPG_IO_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "epg/game.hpp"
#include "epg/learning.hpp"
#include "epg/metrics.hpp"
#include "epg/scenarios.hpp"

namespace epg::io {

using nlohmann::json;

inline constexpr int kSchemaVersion = 1;
inline constexpr const char* kEngineVersion = "0.1.0";

/// Units block embedded in every document.
json units();

// Documents. Readers take the key path of the value for error messages and
// throw ConfigError naming the offending field.

json to_json(const JointState& x);
JointState joint_state_from_json(const json& j, const std::string& path);

json to_json(const JointStrategy& u);
JointStrategy strategy_from_json(const json& j, const std::string& path);

json to_json(const JointTrajectory& traj);
JointTrajectory trajectory_from_json(const json& j, const std::string& path);

json to_json(const FeatureSpec& spec);
FeatureSpec feature_spec_from_json(const json& j, const std::string& path);

json to_json(const Scenario& s);
Scenario scenario_from_json(const json& j, const std::string& path = "");

json to_json(const GameParams& p, const FeatureSpec& spec);
GameParams params_from_json(const json& j, const FeatureSpec& spec, const std::string& path = "");

json to_json(const Demonstration& d);
Demonstration demonstration_from_json(const json& j, const std::string& path = "");

json to_json(const SolverConfig& c);
SolverConfig solver_config_from_json(const json& j, const std::string& path, SolverConfig base = {});

json to_json(const RPIConfig& c);
RPIConfig rpi_config_from_json(const json& j);

json to_json(const LearnConfig& c);
LearnConfig learn_config_from_json(const json& j);

json to_json(const Model& m, const FeatureSpec& spec);
Model model_from_json(const json& j, const FeatureSpec& spec);

/// Predicted modes with controls, unrolled states, energies and π. States
/// are checked against re-unrolling before writing.
json to_json(const ModeSet& ms, const Scenario& scenario);

json to_json(const MetricReport& r);
json to_json(const ClosedLoopResult& r);

// Files.

json read_json(const std::string& path);
void write_text(const std::string& path, const std::string& text);
void write_json(const std::string& path, const json& j);
void make_dirs(const std::string& path);

/// Dataset directory layout: <dir>/<split>.jsonl, one demonstration per line.
void write_demos(const std::string& path, const std::vector<Demonstration>& demos);
std::vector<Demonstration> read_demos(const std::string& path);

std::uint64_t fnv1a64(const std::string& bytes);
std::string hex64(std::uint64_t v);

struct RunManifest {
  std::string command;
  std::string config_hash;
  std::uint64_t seed = 0;
  std::string engine_version = kEngineVersion;
  double wall_clock_seconds = 0.0;
  std::vector<std::string> outputs;
};

json to_json(const RunManifest& m);

/// Rows: epoch,loss,imitation,goal,prob.
std::string loss_curve_csv(const FitResult& r);

/// Rows: t,agent,x,y,mode.
std::string plot_csv(const ModeSet& ms, double dt);
std::string plot_csv(const JointTrajectory& traj, double dt, int mode = 0);

}  // namespace epg::io

#endif  // EPG_IO_HPP_
