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

#include "epg/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>

namespace epg {

namespace {

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

int uniform_int(std::mt19937_64& rng, int lo, int hi) {
  return std::uniform_int_distribution<int>(lo, hi)(rng);
}

RandomGame draw_game(std::mt19937_64& rng, const RandomGameOptions& opts) {
  RandomGame g;
  const int n = uniform_int(rng, opts.min_agents, opts.max_agents);
  const int horizon = uniform_int(rng, opts.min_horizon, opts.max_horizon);
  Scenario& s = g.scenario;
  s.dt = 0.1;
  s.horizon = horizon;
  s.radii.resize(n);
  for (int i = 0; i < n; ++i) {
    s.initial.agents.push_back({uniform(rng, -1.0, 1.0), uniform(rng, -1.0, 1.0), uniform(rng, 0.3, 1.5),
                                uniform(rng, -3.0, 3.0)});
    s.histories.push_back({Eigen::Vector2d(s.initial.agents.back().x, s.initial.agents.back().y)});
    s.radii(i) = uniform(rng, 0.2, 0.5);
  }
  FeatureSpec& f = s.features;
  f.own_features = {Feature::goal, Feature::lane,  Feature::vref,    Feature::vel,
                    Feature::acc,  Feature::jerk,  Feature::turnr,   Feature::turnacc,
                    Feature::velb, Feature::accb,  Feature::turnrb};
  f.collision = n > 1;
  f.collision_stride = uniform_int(rng, 1, 2);
  f.bounds.v_max = uniform(rng, 0.8, 1.4);
  f.bounds.a_max = uniform(rng, 0.3, 0.8);
  f.bounds.omega_max = uniform(rng, 0.3, 0.8);
  for (int i = 0; i < n; ++i) {
    ReferencePath r;
    Eigen::Vector2d p(uniform(rng, -3.0, -1.0), uniform(rng, -2.0, 2.0));
    for (int q = 0; q < 3; ++q) {
      r.polyline.push_back(p);
      p += Eigen::Vector2d(uniform(rng, 1.5, 3.0), uniform(rng, -1.0, 1.0));
    }
    r.speed = uniform(rng, 0.5, 1.5);
    f.reference.push_back(std::move(r));
  }
  GameParams& p = g.params;
  p.own_weights.resize(n, f.n_own());
  for (Eigen::Index k = 0; k < p.own_weights.size(); ++k) p.own_weights.data()[k] = uniform(rng, 0.5, 2.0);
  p.pair_weights.resize(pair_count(n));
  for (Eigen::Index k = 0; k < p.pair_weights.size(); ++k) p.pair_weights(k) = uniform(rng, 1.0, 5.0);
  p.goals.resize(2, n);
  for (int i = 0; i < n; ++i) p.goals.col(i) = Eigen::Vector2d(uniform(rng, -3.0, 3.0), uniform(rng, -3.0, 3.0));
  p.radii = s.radii;
  g.u = JointStrategy(n, horizon, s.dt);
  std::normal_distribution<double> gauss(0.0, 0.6);
  for (Eigen::Index k = 0; k < g.u.size(); ++k) g.u.vector()(k) = gauss(rng);
  return g;
}

}  // namespace

RandomGame random_game(std::mt19937_64& rng, const RandomGameOptions& opts) {
  for (int attempt = 0; attempt < 200; ++attempt) {
    RandomGame g = draw_game(rng, opts);
    const ResidualSystem sys = build_system(g.scenario, g.params);
    if (sys.hinge_margin(g.u) >= opts.min_hinge_margin) return g;
  }
  throw NumericalError("random_game: could not draw an instance away from hinge kinks");
}

double max_relative_error(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw DimensionMismatch("max_relative_error: shapes differ");
  double worst = 0.0;
  for (Eigen::Index k = 0; k < a.size(); ++k) {
    const double x = a.data()[k];
    const double y = b.data()[k];
    const double err = std::abs(x - y) / std::max({std::abs(x), std::abs(y), 1.0});
    if (!std::isfinite(err)) return std::numeric_limits<double>::infinity();
    worst = std::max(worst, err);
  }
  return worst;
}

bool GradcheckReport::all_pass() const {
  return std::all_of(rows.begin(), rows.end(), [](const GradcheckRow& r) { return r.pass; });
}

std::string GradcheckReport::table() const {
  std::ostringstream os;
  os << std::left << std::setw(22) << "check" << std::setw(11) << "instances" << std::setw(14) << "max_rel_err"
     << std::setw(10) << "tol" << "result\n";
  for (const auto& r : rows) {
    os << std::left << std::setw(22) << r.name << std::setw(11) << r.instances << std::setw(14) << std::scientific
       << std::setprecision(3) << r.max_rel_err << std::setw(10) << r.tolerance << std::defaultfloat
       << (r.pass ? "PASS" : "FAIL") << "\n";
  }
  return os.str();
}

namespace {

// Smallest hinge margin over a sequence of iterates.
double iterate_margin(const ResidualSystem& sys, const JointStrategy& start, const SolverConfig& inner) {
  double margin = sys.hinge_margin(start);
  Eigen::VectorXd x = start.vector();
  for (int s = 0; s < inner.steps; ++s) {
    x = lm_step(sys, x, inner.damping, inner.step_size, inner.diag_floor).next;
    margin = std::min(margin, sys.hinge_margin(sys.as_strategy(x)));
  }
  return margin;
}

// Gap between the best and second-best mode errors for every future.
double selection_gap(const std::vector<JointTrajectory>& pred, const Demonstration& demo) {
  if (pred.size() < 2) return std::numeric_limits<double>::infinity();
  double gap = std::numeric_limits<double>::infinity();
  for (const auto& gt : demo.gt_futures) {
    std::vector<double> e;
    for (const auto& p : pred) e.push_back(imitation_error(p, gt));
    std::sort(e.begin(), e.end());
    gap = std::min(gap, (e[1] - e[0]) / (1.0 + e[0]));
  }
  return gap;
}

}  // namespace

OuterCheck check_outer_gradient(std::mt19937_64& rng, double h) {
  for (int attempt = 0; attempt < 100; ++attempt) {
    RandomGameOptions go;
    go.min_hinge_margin = 1e-3;
    RandomGame g = random_game(rng, go);
    const int n = g.scenario.n_agents();
    const int modes = uniform_int(rng, 1, 2);

    Demonstration demo;
    demo.scenario = g.scenario;
    const int futures = uniform_int(rng, 1, 2);
    std::normal_distribution<double> gauss(0.0, 0.5);
    for (int f = 0; f < futures; ++f) {
      JointStrategy v = g.u;
      for (Eigen::Index k = 0; k < v.size(); ++k) v.vector()(k) += gauss(rng);
      demo.gt_futures.push_back(rollout(g.scenario.initial, v));
    }
    demo.gt_goals = g.params.goals + Eigen::Matrix2Xd::Constant(2, n, 0.3);

    LearnConfig cfg;
    cfg.learnable = {true, n > 1, true, uniform_int(rng, 0, 1) == 1};
    cfg.lambda_goal = 0.1;
    cfg.lambda_prob = 0.1;
    cfg.warm_start = false;
    cfg.inner.mode = SolverMode::fixed;
    cfg.inner.steps = uniform_int(rng, 0, 4);
    cfg.inner.step_size = uniform(rng, 0.3, 1.0);
    cfg.inner.damping = std::pow(10.0, uniform(rng, -1.0, 1.0));

    Model model;
    model.params = g.params;
    model.modes = modes;
    std::vector<JointStrategy> base = lateral_inits(g.scenario, modes, 0.3);
    for (int m = 0; m < modes; ++m) {
      for (Eigen::Index k = 0; k < base[m].size(); ++k) base[m].vector()(k) += 0.3 * gauss(rng);
    }
    if (cfg.learnable.inits) model.inits = base;

    // Reject instances where a hinge or the closest-mode choice sits near
    // a kink along the unrolled path.
    const ResidualSystem sys = build_system(g.scenario, scene_params(demo, model, cfg));
    double margin = std::numeric_limits<double>::infinity();
    for (const auto& b : base) margin = std::min(margin, iterate_margin(sys, b, cfg.inner));
    if (margin < 1e-3) continue;
    const OuterGradient og = outer_gradient(demo, model, cfg, base, true);
    std::vector<JointTrajectory> pred;
    for (const auto& u : og.solutions) pred.push_back(rollout(g.scenario.initial, u));
    if (selection_gap(pred, demo) < 1e-3) continue;

    const ParameterLayout layout(cfg.learnable, model);
    const Eigen::VectorXd theta = layout.encode(model);
    auto loss = [&](const Eigen::VectorXd& t) {
      const Model m = layout.decode(t, model);
      return Eigen::VectorXd::Constant(1, outer_gradient(demo, m, cfg, base, false).loss.total);
    };
    const Eigen::MatrixXd fd = central_difference(loss, theta, h);
    OuterCheck out;
    out.max_rel_err = max_relative_error(og.gradient.transpose(), fd);
    out.parameters = theta.size();
    out.steps = cfg.inner.steps;
    return out;
  }
  throw NumericalError("check_outer_gradient: no smooth instance found");
}

GradcheckReport run_gradcheck(const GradcheckOptions& opts) {
  if (opts.instances < 1) throw ConfigError("instances", "must be >= 1");
  std::mt19937_64 rng(opts.seed);
  GradcheckRow roll{"rollout_jacobian", 0, 0.0, opts.tolerance, false};
  GradcheckRow resid{"residual_jacobian", 0, 0.0, opts.tolerance, false};
  GradcheckRow agent{"agent_cost_gradient", 0, 0.0, opts.tolerance, false};
  GradcheckRow outer{"outer_gradient", 0, 0.0, opts.tolerance, false};
  const double h = 1e-6;

  for (int t = 0; t < opts.instances; ++t) {
    const RandomGame g = random_game(rng);
    const ResidualSystem sys = build_system(g.scenario, g.params);
    const Eigen::VectorXd x = g.u.vector();

    const Eigen::MatrixXd dense = jacobian_rollout(g.scenario.initial, g.u).dense();
    const Eigen::MatrixXd fd_roll = central_difference(
        [&](const Eigen::VectorXd& v) { return flatten(rollout(g.scenario.initial, sys.as_strategy(v))); }, x, h);
    roll.max_rel_err = std::max(roll.max_rel_err, max_relative_error(dense, fd_roll));
    ++roll.instances;

    Eigen::MatrixXd jac = residuals_and_jacobian(sys, g.u).second;
    if (opts.inject_bug) {
      const auto [start, count] = sys.agent_rows(0);
      jac.middleRows(start, count) *= -1.0;
    }
    const Eigen::MatrixXd fd_res =
        central_difference([&](const Eigen::VectorXd& v) { return sys.residuals(sys.as_strategy(v)); }, x, h);
    resid.max_rel_err = std::max(resid.max_rel_err, max_relative_error(jac, fd_res));
    ++resid.instances;

    for (int i = 0; i < sys.n_agents(); ++i) {
      const Eigen::VectorXd grad = agent_cost_gradient(sys, g.u, i);
      const Eigen::VectorXd xi = g.u.agent_controls(i);
      const Eigen::MatrixXd fd = central_difference(
          [&](const Eigen::VectorXd& v) {
            JointStrategy w = g.u;
            w.agent_controls(i) = v;
            return Eigen::VectorXd::Constant(1, sys.per_agent_cost(w, i));
          },
          xi, h);
      agent.max_rel_err = std::max(agent.max_rel_err, max_relative_error(grad.transpose(), fd));
    }
    ++agent.instances;

    const OuterCheck oc = check_outer_gradient(rng);
    outer.max_rel_err = std::max(outer.max_rel_err, oc.max_rel_err);
    ++outer.instances;
  }
  GradcheckReport rep;
  for (GradcheckRow* r : {&roll, &resid, &agent, &outer}) {
    r->pass = r->max_rel_err < r->tolerance;
    rep.rows.push_back(*r);
  }
  return rep;
}

}  // namespace epg
