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

#include "epg/io.hpp"

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace epg::io {

namespace {

std::string join(const std::string& path, const std::string& key) {
  return path.empty() ? key : path + "/" + key;
}

std::string indexed(const std::string& path, std::size_t i) { return path + "[" + std::to_string(i) + "]"; }

const json& field(const json& j, const std::string& key, const std::string& path) {
  if (!j.is_object()) throw ConfigError(path.empty() ? "<root>" : path, "expected an object");
  const auto it = j.find(key);
  if (it == j.end()) throw ConfigError(join(path, key), "missing");
  return *it;
}

double number(const json& j, const std::string& path) {
  if (!j.is_number()) throw ConfigError(path, "expected a number");
  return j.get<double>();
}

int integer(const json& j, const std::string& path) {
  if (!j.is_number_integer()) throw ConfigError(path, "expected an integer");
  return j.get<int>();
}

bool boolean(const json& j, const std::string& path) {
  if (!j.is_boolean()) throw ConfigError(path, "expected true or false");
  return j.get<bool>();
}

std::string text(const json& j, const std::string& path) {
  if (!j.is_string()) throw ConfigError(path, "expected a string");
  return j.get<std::string>();
}

const json& array(const json& j, const std::string& path) {
  if (!j.is_array()) throw ConfigError(path, "expected an array");
  return j;
}

template <typename F>
void if_present(const json& j, const std::string& key, const std::string& path, F&& f) {
  if (j.is_object() && j.contains(key)) f(j.at(key), join(path, key));
}

Eigen::Vector2d point(const json& j, const std::string& path) {
  array(j, path);
  if (j.size() != 2) throw ConfigError(path, "expected [x, y]");
  return {number(j[0], indexed(path, 0)), number(j[1], indexed(path, 1))};
}

Eigen::VectorXd vector_of(const json& j, const std::string& path) {
  array(j, path);
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = number(j[i], indexed(path, i));
  return v;
}

json vector_json(const Eigen::VectorXd& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

json points_json(const Eigen::Matrix2Xd& m) {
  json out = json::array();
  for (Eigen::Index i = 0; i < m.cols(); ++i) out.push_back({m(0, i), m(1, i)});
  return out;
}

Eigen::Matrix2Xd points_of(const json& j, const std::string& path) {
  array(j, path);
  Eigen::Matrix2Xd m(2, static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) m.col(static_cast<Eigen::Index>(i)) = point(j[i], indexed(path, i));
  return m;
}

void check_header(const json& j, const std::string& path) {
  if (j.is_object() && j.contains("schema_version")) {
    const int v = integer(j.at("schema_version"), join(path, "schema_version"));
    if (v != kSchemaVersion) throw ConfigError(join(path, "schema_version"), "unsupported version " + std::to_string(v));
  }
}

json header(const std::string& kind) {
  return {{"schema_version", kSchemaVersion}, {"kind", kind}, {"units", units()}};
}

}  // namespace

json units() {
  return {{"position", "m"}, {"speed", "m/s"},     {"heading", "rad"},       {"acceleration", "m/s^2"},
          {"turn_rate", "rad/s"}, {"time", "s"}, {"distance_metrics", "m"}};
}

json to_json(const JointState& x) {
  json out = json::array();
  for (const auto& a : x.agents) out.push_back({{"x", a.x}, {"y", a.y}, {"v", a.v}, {"theta", a.theta}});
  return out;
}

JointState joint_state_from_json(const json& j, const std::string& path) {
  array(j, path);
  JointState x;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const std::string p = indexed(path, i);
    x.agents.push_back({number(field(j[i], "x", p), join(p, "x")), number(field(j[i], "y", p), join(p, "y")),
                        number(field(j[i], "v", p), join(p, "v")),
                        number(field(j[i], "theta", p), join(p, "theta"))});
  }
  if (x.agents.empty()) throw ConfigError(path, "need at least one agent");
  for (const auto& a : x.agents) {
    if (!std::isfinite(a.x) || !std::isfinite(a.y) || !std::isfinite(a.v) || !std::isfinite(a.theta)) {
      throw ConfigError(path, "state must be finite");
    }
  }
  return x;
}

json to_json(const JointStrategy& u) {
  json agents = json::array();
  for (int i = 0; i < u.n_agents(); ++i) {
    json controls = json::array();
    for (int k = 0; k < u.horizon(); ++k) controls.push_back({u.a(i, k), u.omega(i, k)});
    agents.push_back(std::move(controls));
  }
  return {{"dt", u.dt()}, {"horizon", u.horizon()}, {"controls", std::move(agents)}};
}

JointStrategy strategy_from_json(const json& j, const std::string& path) {
  const double dt = number(field(j, "dt", path), join(path, "dt"));
  if (!(dt > 0.0)) throw ConfigError(join(path, "dt"), "must be positive");
  const int horizon = integer(field(j, "horizon", path), join(path, "horizon"));
  if (horizon < 1) throw ConfigError(join(path, "horizon"), "must be >= 1");
  const std::string cp = join(path, "controls");
  const json& agents = array(field(j, "controls", path), cp);
  if (agents.empty()) throw ConfigError(cp, "need at least one agent");
  JointStrategy u(static_cast<int>(agents.size()), horizon, dt);
  for (std::size_t i = 0; i < agents.size(); ++i) {
    const std::string ap = indexed(cp, i);
    array(agents[i], ap);
    if (static_cast<int>(agents[i].size()) != horizon) throw ConfigError(ap, "expected one control per step");
    for (int k = 0; k < horizon; ++k) {
      const Eigen::Vector2d c = point(agents[i][k], indexed(ap, k));
      u.set_control(static_cast<int>(i), k, {c.x(), c.y()});
    }
  }
  return u;
}

json to_json(const JointTrajectory& traj) {
  json agents = json::array();
  for (int i = 0; i < traj.n_agents(); ++i) {
    json states = json::array();
    for (int k = 0; k <= traj.horizon(); ++k) {
      const AgentState s = traj.state(i, k);
      states.push_back({s.x, s.y, s.v, s.theta});
    }
    agents.push_back(std::move(states));
  }
  return {{"horizon", traj.horizon()}, {"states", std::move(agents)}};
}

JointTrajectory trajectory_from_json(const json& j, const std::string& path) {
  const int horizon = integer(field(j, "horizon", path), join(path, "horizon"));
  if (horizon < 0) throw ConfigError(join(path, "horizon"), "must be >= 0");
  const std::string sp = join(path, "states");
  const json& agents = array(field(j, "states", path), sp);
  JointTrajectory traj(static_cast<int>(agents.size()), horizon);
  for (std::size_t i = 0; i < agents.size(); ++i) {
    const std::string ap = indexed(sp, i);
    array(agents[i], ap);
    if (static_cast<int>(agents[i].size()) != horizon + 1) throw ConfigError(ap, "expected horizon + 1 states");
    for (int k = 0; k <= horizon; ++k) {
      const std::string kp = indexed(ap, k);
      const json& s = array(agents[i][k], kp);
      if (s.size() != 4) throw ConfigError(kp, "expected [x, y, v, theta]");
      traj.set_state(static_cast<int>(i), k,
                     {number(s[0], kp), number(s[1], kp), number(s[2], kp), number(s[3], kp)});
    }
  }
  return traj;
}

json to_json(const FeatureSpec& spec) {
  json own = json::array();
  for (Feature f : spec.own_features) own.push_back(std::string(feature_name(f)));
  json bounds = json::object();
  if (spec.bounds.v_max) bounds["v_max"] = *spec.bounds.v_max;
  if (spec.bounds.a_max) bounds["a_max"] = *spec.bounds.a_max;
  if (spec.bounds.omega_max) bounds["omega_max"] = *spec.bounds.omega_max;
  json refs = json::array();
  for (const auto& r : spec.reference) {
    json line = json::array();
    for (const auto& p : r.polyline) line.push_back({p.x(), p.y()});
    refs.push_back({{"polyline", std::move(line)}, {"speed", r.speed}});
  }
  return {{"own_features", std::move(own)}, {"collision", spec.collision},
          {"collision_stride", spec.collision_stride}, {"bounds", std::move(bounds)},
          {"reference", std::move(refs)}};
}

FeatureSpec feature_spec_from_json(const json& j, const std::string& path) {
  FeatureSpec spec;
  const std::string op = join(path, "own_features");
  const json& own = array(field(j, "own_features", path), op);
  for (std::size_t i = 0; i < own.size(); ++i) {
    try {
      spec.own_features.push_back(parse_feature(text(own[i], indexed(op, i))));
    } catch (const ConfigError& e) {
      throw ConfigError(indexed(op, i), e.detail());
    }
  }
  if_present(j, "collision", path, [&](const json& v, const std::string& p) { spec.collision = boolean(v, p); });
  if_present(j, "collision_stride", path, [&](const json& v, const std::string& p) {
    spec.collision_stride = integer(v, p);
    if (spec.collision_stride < 1) throw ConfigError(p, "must be >= 1");
  });
  if_present(j, "bounds", path, [&](const json& b, const std::string& bp) {
    if_present(b, "v_max", bp, [&](const json& v, const std::string& p) { spec.bounds.v_max = number(v, p); });
    if_present(b, "a_max", bp, [&](const json& v, const std::string& p) { spec.bounds.a_max = number(v, p); });
    if_present(b, "omega_max", bp, [&](const json& v, const std::string& p) { spec.bounds.omega_max = number(v, p); });
  });
  if_present(j, "reference", path, [&](const json& refs, const std::string& rp) {
    array(refs, rp);
    for (std::size_t i = 0; i < refs.size(); ++i) {
      const std::string p = indexed(rp, i);
      ReferencePath r;
      const json& line = array(field(refs[i], "polyline", p), join(p, "polyline"));
      for (std::size_t q = 0; q < line.size(); ++q) r.polyline.push_back(point(line[q], indexed(join(p, "polyline"), q)));
      if_present(refs[i], "speed", p, [&](const json& v, const std::string& sp) { r.speed = number(v, sp); });
      spec.reference.push_back(std::move(r));
    }
  });
  return spec;
}

json to_json(const Scenario& s) {
  json out = header("scenario");
  json hist = json::array();
  for (const auto& h : s.histories) {
    json pts = json::array();
    for (const auto& p : h) pts.push_back({p.x(), p.y()});
    hist.push_back(std::move(pts));
  }
  out["initial"] = to_json(s.initial);
  out["histories"] = std::move(hist);
  out["radii"] = vector_json(s.radii);
  out["dt"] = s.dt;
  out["horizon"] = s.horizon;
  out["features"] = to_json(s.features);
  return out;
}

Scenario scenario_from_json(const json& j, const std::string& path) {
  check_header(j, path);
  Scenario s;
  s.dt = number(field(j, "dt", path), join(path, "dt"));
  if (!(s.dt > 0.0) || !std::isfinite(s.dt)) throw ConfigError(join(path, "dt"), "must be positive");
  s.horizon = integer(field(j, "horizon", path), join(path, "horizon"));
  if (s.horizon < 1) throw ConfigError(join(path, "horizon"), "must be >= 1");
  s.initial = joint_state_from_json(field(j, "initial", path), join(path, "initial"));
  s.radii = vector_of(field(j, "radii", path), join(path, "radii"));
  s.features = feature_spec_from_json(field(j, "features", path), join(path, "features"));
  if (j.contains("histories")) {
    const std::string hp = join(path, "histories");
    const json& hist = array(j.at("histories"), hp);
    for (std::size_t i = 0; i < hist.size(); ++i) {
      const std::string p = indexed(hp, i);
      std::vector<Eigen::Vector2d> h;
      for (std::size_t q = 0; q < array(hist[i], p).size(); ++q) h.push_back(point(hist[i][q], indexed(p, q)));
      s.histories.push_back(std::move(h));
    }
  } else {
    for (const auto& a : s.initial.agents) s.histories.push_back({Eigen::Vector2d(a.x, a.y)});
  }
  s.validate();
  return s;
}

json to_json(const GameParams& p, const FeatureSpec& spec) {
  json order = json::array();
  for (Feature f : spec.own_features) order.push_back(std::string(feature_name(f)));
  json own = json::array();
  for (Eigen::Index i = 0; i < p.own_weights.rows(); ++i) own.push_back(vector_json(p.own_weights.row(i).transpose()));
  return {{"feature_order", std::move(order)}, {"own_weights", std::move(own)},
          {"pair_weights", vector_json(p.pair_weights)}, {"goals", points_json(p.goals)},
          {"radii", vector_json(p.radii)}};
}

GameParams params_from_json(const json& j, const FeatureSpec& spec, const std::string& path) {
  check_header(j, path);
  GameParams p;
  if (j.contains("feature_order")) {
    const std::string fp = join(path, "feature_order");
    const json& order = array(j.at("feature_order"), fp);
    if (static_cast<int>(order.size()) != spec.n_own()) throw ConfigError(fp, "does not match the scenario features");
    for (std::size_t f = 0; f < order.size(); ++f) {
      if (parse_feature(text(order[f], indexed(fp, f))) != spec.own_features[f]) {
        throw ConfigError(indexed(fp, f), "does not match the scenario features");
      }
    }
  }
  const std::string op = join(path, "own_weights");
  const json& own = array(field(j, "own_weights", path), op);
  p.own_weights.resize(static_cast<Eigen::Index>(own.size()), spec.n_own());
  for (std::size_t i = 0; i < own.size(); ++i) {
    const Eigen::VectorXd row = vector_of(own[i], indexed(op, i));
    if (row.size() != spec.n_own()) throw ConfigError(indexed(op, i), "expected one weight per own feature");
    p.own_weights.row(static_cast<Eigen::Index>(i)) = row.transpose();
  }
  p.pair_weights = vector_of(field(j, "pair_weights", path), join(path, "pair_weights"));
  p.goals = j.contains("goals") ? points_of(j.at("goals"), join(path, "goals")) : Eigen::Matrix2Xd(2, 0);
  p.radii = vector_of(field(j, "radii", path), join(path, "radii"));
  return p;
}

json to_json(const Demonstration& d) {
  json out = header("demonstration");
  out["scenario"] = to_json(d.scenario);
  json futures = json::array();
  for (const auto& f : d.gt_futures) futures.push_back(to_json(f));
  json strategies = json::array();
  for (const auto& u : d.gt_strategies) strategies.push_back(to_json(u));
  out["gt_futures"] = std::move(futures);
  out["gt_strategies"] = std::move(strategies);
  out["gt_goals"] = points_json(d.gt_goals);
  out["source"] = d.source;
  out["step"] = d.step;
  out["flagged"] = d.flagged;
  return out;
}

Demonstration demonstration_from_json(const json& j, const std::string& path) {
  check_header(j, path);
  Demonstration d;
  d.scenario = scenario_from_json(field(j, "scenario", path), join(path, "scenario"));
  const std::string fp = join(path, "gt_futures");
  const json& futures = array(field(j, "gt_futures", path), fp);
  for (std::size_t i = 0; i < futures.size(); ++i) d.gt_futures.push_back(trajectory_from_json(futures[i], indexed(fp, i)));
  if_present(j, "gt_strategies", path, [&](const json& v, const std::string& p) {
    array(v, p);
    for (std::size_t i = 0; i < v.size(); ++i) d.gt_strategies.push_back(strategy_from_json(v[i], indexed(p, i)));
  });
  if_present(j, "gt_goals", path, [&](const json& v, const std::string& p) { d.gt_goals = points_of(v, p); });
  if_present(j, "source", path, [&](const json& v, const std::string& p) { d.source = integer(v, p); });
  if_present(j, "step", path, [&](const json& v, const std::string& p) { d.step = integer(v, p); });
  if_present(j, "flagged", path, [&](const json& v, const std::string& p) { d.flagged = boolean(v, p); });
  d.validate();
  return d;
}

json to_json(const SolverConfig& c) {
  return {{"steps", c.steps},
          {"step_size", c.step_size},
          {"damping", c.damping},
          {"mode", c.mode == SolverMode::fixed ? "fixed" : "adaptive"},
          {"damping_increase", c.damping_increase},
          {"damping_decrease", c.damping_decrease},
          {"damping_min", c.damping_min},
          {"damping_max", c.damping_max},
          {"diag_floor", c.diag_floor},
          {"convergence_tol", c.convergence_tol}};
}

SolverConfig solver_config_from_json(const json& j, const std::string& path, SolverConfig c) {
  if (!j.is_object()) throw ConfigError(path, "expected an object");
  if_present(j, "steps", path, [&](const json& v, const std::string& p) { c.steps = integer(v, p); });
  if_present(j, "step_size", path, [&](const json& v, const std::string& p) { c.step_size = number(v, p); });
  if_present(j, "damping", path, [&](const json& v, const std::string& p) { c.damping = number(v, p); });
  if_present(j, "mode", path, [&](const json& v, const std::string& p) {
    const std::string m = text(v, p);
    if (m == "fixed") {
      c.mode = SolverMode::fixed;
    } else if (m == "adaptive") {
      c.mode = SolverMode::adaptive;
    } else {
      throw ConfigError(p, "expected \"fixed\" or \"adaptive\"");
    }
  });
  if_present(j, "damping_increase", path, [&](const json& v, const std::string& p) { c.damping_increase = number(v, p); });
  if_present(j, "damping_decrease", path, [&](const json& v, const std::string& p) { c.damping_decrease = number(v, p); });
  if_present(j, "damping_min", path, [&](const json& v, const std::string& p) { c.damping_min = number(v, p); });
  if_present(j, "damping_max", path, [&](const json& v, const std::string& p) { c.damping_max = number(v, p); });
  if_present(j, "diag_floor", path, [&](const json& v, const std::string& p) { c.diag_floor = number(v, p); });
  if_present(j, "convergence_tol", path, [&](const json& v, const std::string& p) { c.convergence_tol = number(v, p); });
  try {
    c.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(join(path, e.field()), e.detail());
  }
  return c;
}

json to_json(const RPIConfig& c) {
  json out = header("rpi_config");
  out["configs"] = c.configs;
  out["circle_radius"] = c.circle_radius;
  out["robot_start"] = {c.robot_start.x(), c.robot_start.y()};
  out["robot_goal"] = {c.robot_goal.x(), c.robot_goal.y()};
  out["pedestrian_angle_min"] = c.pedestrian_angle_min;
  out["pedestrian_angle_max"] = c.pedestrian_angle_max;
  out["initial_speed"] = c.initial_speed;
  out["dt"] = c.dt;
  out["history"] = c.history;
  out["horizon"] = c.horizon;
  out["modes"] = c.modes;
  out["main_starts"] = c.main_starts;
  out["sub_starts"] = c.sub_starts;
  out["init_scale"] = c.init_scale;
  out["collision_weight_min"] = c.collision_weight_min;
  out["collision_weight_max"] = c.collision_weight_max;
  out["radius"] = c.radius;
  out["collision_margin"] = c.collision_margin;
  out["cluster_eps"] = c.cluster_eps;
  out["features"] = to_json(c.features);
  out["own_weights"] = vector_json(c.own_weights);
  out["solver"] = to_json(c.solver);
  out["seed"] = c.seed;
  return out;
}

RPIConfig rpi_config_from_json(const json& j) {
  check_header(j, "");
  if (!j.is_object()) throw ConfigError("<root>", "expected an object");
  RPIConfig c;
  auto num = [&](const char* key, double& dst) {
    if_present(j, key, "", [&](const json& v, const std::string& p) { dst = number(v, p); });
  };
  auto intf = [&](const char* key, int& dst) {
    if_present(j, key, "", [&](const json& v, const std::string& p) { dst = integer(v, p); });
  };
  intf("configs", c.configs);
  num("circle_radius", c.circle_radius);
  if_present(j, "robot_start", "", [&](const json& v, const std::string& p) { c.robot_start = point(v, p); });
  if_present(j, "robot_goal", "", [&](const json& v, const std::string& p) { c.robot_goal = point(v, p); });
  num("pedestrian_angle_min", c.pedestrian_angle_min);
  num("pedestrian_angle_max", c.pedestrian_angle_max);
  num("initial_speed", c.initial_speed);
  num("dt", c.dt);
  num("history", c.history);
  num("horizon", c.horizon);
  intf("modes", c.modes);
  intf("main_starts", c.main_starts);
  intf("sub_starts", c.sub_starts);
  num("init_scale", c.init_scale);
  num("collision_weight_min", c.collision_weight_min);
  num("collision_weight_max", c.collision_weight_max);
  num("radius", c.radius);
  num("collision_margin", c.collision_margin);
  num("cluster_eps", c.cluster_eps);
  if_present(j, "features", "", [&](const json& v, const std::string& p) { c.features = feature_spec_from_json(v, p); });
  if_present(j, "own_weights", "", [&](const json& v, const std::string& p) { c.own_weights = vector_of(v, p); });
  if_present(j, "solver", "", [&](const json& v, const std::string& p) { c.solver = solver_config_from_json(v, p, c.solver); });
  if_present(j, "seed", "", [&](const json& v, const std::string& p) {
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0)) {
      throw ConfigError(p, "expected a non-negative integer");
    }
    c.seed = v.get<std::uint64_t>();
  });
  c.validate();
  return c;
}

json to_json(const LearnConfig& c) {
  json learnable = json::array();
  if (c.learnable.own_weights) learnable.push_back("own_weights");
  if (c.learnable.pair_weights) learnable.push_back("pair_weights");
  if (c.learnable.goals) learnable.push_back("goals");
  if (c.learnable.inits) learnable.push_back("inits");
  json out = header("learn_config");
  out["learnable"] = std::move(learnable);
  out["outer_steps"] = c.outer_steps;
  out["batch_size"] = c.batch_size;
  out["learning_rate"] = c.learning_rate;
  out["learning_rate_decay"] = c.learning_rate_decay;
  out["optimizer"] = c.optimizer == OuterOptimizer::adam ? "adam" : "sgd";
  out["lambda_imit"] = c.lambda_imit;
  out["lambda_goal"] = c.lambda_goal;
  out["lambda_prob"] = c.lambda_prob;
  out["beta"] = c.beta;
  out["detach_probabilities"] = c.detach_probabilities;
  out["inner"] = to_json(c.inner);
  out["warm_start"] = c.warm_start;
  out["warm_solver"] = to_json(c.warm_solver);
  out["proposal_refresh"] = c.proposal_refresh;
  out["seed"] = c.seed;
  out["divergence_threshold"] = c.divergence_threshold;
  return out;
}

LearnConfig learn_config_from_json(const json& j) {
  check_header(j, "");
  if (!j.is_object()) throw ConfigError("<root>", "expected an object");
  LearnConfig c;
  if_present(j, "learnable", "", [&](const json& v, const std::string& p) {
    array(v, p);
    c.learnable = {false, false, false, false};
    for (std::size_t i = 0; i < v.size(); ++i) {
      const std::string name = text(v[i], indexed(p, i));
      if (name == "own_weights") {
        c.learnable.own_weights = true;
      } else if (name == "pair_weights") {
        c.learnable.pair_weights = true;
      } else if (name == "goals") {
        c.learnable.goals = true;
      } else if (name == "inits") {
        c.learnable.inits = true;
      } else {
        throw ConfigError(indexed(p, i), "unknown learnable set \"" + name + "\"");
      }
    }
  });
  auto num = [&](const char* key, double& dst) {
    if_present(j, key, "", [&](const json& v, const std::string& p) { dst = number(v, p); });
  };
  if_present(j, "outer_steps", "", [&](const json& v, const std::string& p) { c.outer_steps = integer(v, p); });
  if_present(j, "batch_size", "", [&](const json& v, const std::string& p) { c.batch_size = integer(v, p); });
  num("learning_rate", c.learning_rate);
  num("learning_rate_decay", c.learning_rate_decay);
  if_present(j, "optimizer", "", [&](const json& v, const std::string& p) {
    const std::string o = text(v, p);
    if (o == "adam") {
      c.optimizer = OuterOptimizer::adam;
    } else if (o == "sgd") {
      c.optimizer = OuterOptimizer::sgd;
    } else {
      throw ConfigError(p, "expected \"adam\" or \"sgd\"");
    }
  });
  num("lambda_imit", c.lambda_imit);
  num("lambda_goal", c.lambda_goal);
  num("lambda_prob", c.lambda_prob);
  num("beta", c.beta);
  if_present(j, "detach_probabilities", "", [&](const json& v, const std::string& p) { c.detach_probabilities = boolean(v, p); });
  if_present(j, "inner", "", [&](const json& v, const std::string& p) { c.inner = solver_config_from_json(v, p, c.inner); });
  if_present(j, "warm_start", "", [&](const json& v, const std::string& p) { c.warm_start = boolean(v, p); });
  if_present(j, "warm_solver", "", [&](const json& v, const std::string& p) {
    c.warm_solver = solver_config_from_json(v, p, c.warm_solver);
  });
  if_present(j, "seed", "", [&](const json& v, const std::string& p) {
    if (!v.is_number_integer() || v.get<long long>() < 0) throw ConfigError(p, "expected a non-negative integer");
    c.seed = v.get<std::uint64_t>();
  });
  num("divergence_threshold", c.divergence_threshold);
  if_present(j, "proposal_refresh", "", [&](const json& v, const std::string& p) { c.proposal_refresh = integer(v, p); });
  c.validate();
  return c;
}

json to_json(const Model& m, const FeatureSpec& spec) {
  json out = header("model");
  out["params"] = to_json(m.params, spec);
  out["modes"] = m.modes;
  json inits = json::array();
  for (const auto& u : m.inits) inits.push_back(to_json(u));
  out["inits"] = std::move(inits);
  return out;
}

Model model_from_json(const json& j, const FeatureSpec& spec) {
  check_header(j, "");
  Model m;
  // A bare parameter document is accepted as a one-mode model.
  if (!j.contains("params")) {
    m.params = params_from_json(j, spec, "");
    return m;
  }
  m.params = params_from_json(j.at("params"), spec, "params");
  if_present(j, "modes", "", [&](const json& v, const std::string& p) {
    m.modes = integer(v, p);
    if (m.modes < 1) throw ConfigError(p, "must be >= 1");
  });
  if_present(j, "inits", "", [&](const json& v, const std::string& p) {
    array(v, p);
    for (std::size_t i = 0; i < v.size(); ++i) m.inits.push_back(strategy_from_json(v[i], indexed(p, i)));
  });
  return m;
}

json to_json(const ModeSet& ms, const Scenario& scenario) {
  json out = header("prediction");
  out["n_agents"] = scenario.n_agents();
  out["horizon"] = scenario.horizon;
  out["dt"] = scenario.dt;
  json modes = json::array();
  for (int m = 0; m < ms.size(); ++m) {
    const Mode& mode = ms.modes[m];
    if (!(rollout(scenario.initial, mode.solution) == mode.trajectory)) {
      throw NumericalError("mode " + std::to_string(m) + ": stored states differ from re-unrolled controls");
    }
    json entry = {{"probability", ms.probabilities(m)},
                  {"energy", mode.failed ? json(nullptr) : json(mode.energy)},
                  {"failed", mode.failed},
                  {"solution", to_json(mode.solution)},
                  {"trajectory", to_json(mode.trajectory)},
                  {"report",
                   {{"converged", mode.report.converged},
                    {"accepted_steps", mode.report.accepted_steps},
                    {"rejected_steps", mode.report.rejected_steps},
                    {"gradient_inf_norm", mode.report.gradient_inf_norm},
                    {"energies", mode.report.energies}}}};
    if (mode.failed) entry["error"] = mode.error;
    modes.push_back(std::move(entry));
  }
  out["consistent"] = true;
  out["most_likely"] = ms.most_likely();
  out["modes"] = std::move(modes);
  return out;
}

json to_json(const MetricReport& r) {
  json out = header("metrics");
  out["sample_count"] = r.sample_count;
  out["rows"] = json::array({json::array({"minADE", r.min_ade}), json::array({"minFDE", r.min_fde}),
                             json::array({"minSADE", r.min_sade}), json::array({"minSFDE", r.min_sfde}),
                             json::array({"OR", r.overlap_rate})});
  json samples = json::array();
  for (const auto& s : r.samples) {
    samples.push_back(json::array({s.min_ade, s.min_fde, s.min_sade, s.min_sfde, s.overlap}));
  }
  out["per_sample_columns"] = json::array({"minADE", "minFDE", "minSADE", "minSFDE", "OR"});
  out["per_sample"] = std::move(samples);
  return out;
}

json to_json(const ClosedLoopResult& r) {
  json out = header("closed_loop");
  out["completed_steps"] = r.completed_steps;
  out["aborted"] = r.aborted;
  if (r.aborted) out["error"] = r.error;
  out["executed"] = to_json(r.executed);
  if (r.completed_steps > 0) out["applied"] = to_json(r.applied);
  json log = json::array();
  for (const auto& s : r.log) {
    log.push_back({{"step", s.step},
                   {"chosen_mode", s.chosen_mode},
                   {"mode_energies", s.mode_energies},
                   {"min_distance", s.min_distance}});
  }
  out["log"] = std::move(log);
  return out;
}

json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path, std::string("malformed JSON: ") + e.what());
  }
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path);
  out << text;
  out.flush();
  if (!out) throw IoError("write failed for " + path);
}

void write_json(const std::string& path, const json& j) { write_text(path, j.dump(1) + "\n"); }

void make_dirs(const std::string& path) {
  std::error_code ec;
  std::filesystem::create_directories(path, ec);
  if (ec) throw IoError("cannot create directory " + path + ": " + ec.message());
}

void write_demos(const std::string& path, const std::vector<Demonstration>& demos) {
  std::string buf;
  for (const auto& d : demos) {
    buf += to_json(d).dump();
    buf += '\n';
  }
  write_text(path, buf);
}

std::vector<Demonstration> read_demos(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::vector<Demonstration> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const std::string where = path + ":" + std::to_string(lineno);
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ConfigError(where, std::string("malformed JSON: ") + e.what());
    }
    out.push_back(demonstration_from_json(j, where));
  }
  return out;
}

std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << v;
  return os.str();
}

json to_json(const RunManifest& m) {
  json out = header("manifest");
  out["command"] = m.command;
  out["config_hash"] = m.config_hash;
  out["seed"] = m.seed;
  out["engine_version"] = m.engine_version;
  out["wall_clock_seconds"] = m.wall_clock_seconds;
  out["outputs"] = m.outputs;
  return out;
}

std::string loss_curve_csv(const FitResult& r) {
  std::ostringstream os;
  os << std::setprecision(17);
  os << "epoch,loss,imitation,goal,prob\n";
  for (std::size_t e = 0; e < r.loss_curve.size(); ++e) {
    const LossBreakdown& b = r.breakdown[e];
    os << e << ',' << r.loss_curve[e] << ',' << b.imitation << ',' << b.goal << ',' << b.prob << '\n';
  }
  return os.str();
}

std::string plot_csv(const JointTrajectory& traj, double dt, int mode) {
  std::ostringstream os;
  os << std::setprecision(17);
  for (int i = 0; i < traj.n_agents(); ++i) {
    for (int k = 0; k <= traj.horizon(); ++k) {
      const Eigen::Vector2d p = traj.position(i, k);
      os << k * dt << ',' << i << ',' << p.x() << ',' << p.y() << ',' << mode << '\n';
    }
  }
  return os.str();
}

std::string plot_csv(const ModeSet& ms, double dt) {
  std::string out = "t,agent,x,y,mode\n";
  for (int m = 0; m < ms.size(); ++m) out += plot_csv(ms.modes[m].trajectory, dt, m);
  return out;
}

}  // namespace epg::io
