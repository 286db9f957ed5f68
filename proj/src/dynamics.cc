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

#include "epg/dynamics.hpp"

namespace epg {

namespace {

bool finite(const AgentState& s) {
  return std::isfinite(s.x) && std::isfinite(s.y) && std::isfinite(s.v) && std::isfinite(s.theta);
}

}  // namespace

AgentState step(const AgentState& state, const Control& control, double dt) {
  if (!finite(state)) throw InvalidInput("step: non-finite state");
  if (!std::isfinite(control.a) || !std::isfinite(control.omega)) {
    throw InvalidInput("step: non-finite control");
  }
  if (!(dt > 0.0) || !std::isfinite(dt)) throw InvalidInput("step: dt must be positive");
  return euler_step(state, control, dt);
}

void validate(const JointState& x0) {
  if (x0.agents.empty()) throw DimensionMismatch("joint state needs at least one agent");
  for (std::size_t i = 0; i < x0.agents.size(); ++i) {
    if (!finite(x0.agents[i])) {
      throw InvalidInput("joint state: agent " + std::to_string(i) + " is not finite");
    }
  }
}

JointStrategy shift_strategy(const JointStrategy& u) {
  JointStrategy out = u;
  for (int i = 0; i < u.n_agents(); ++i) {
    for (int k = 0; k + 1 < u.horizon(); ++k) out.set_control(i, k, u.control(i, k + 1));
  }
  return out;
}

}  // namespace epg
