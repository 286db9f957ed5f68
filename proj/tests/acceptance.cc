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

// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails.

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <thread>

#include "epg/gradcheck.hpp"
#include "epg/io.hpp"
#include "epg/least_squares.hpp"
#include "epg/metrics.hpp"
#include "epg/scenarios.hpp"
#include "metric_oracle.hpp"

namespace {

using namespace epg;
using Clock = std::chrono::steady_clock;

constexpr double kPi = 3.14159265358979323846;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
  bool pass = false;
  std::string detail;
};

Scenario swap_scenario(int horizon, double speed, double y_offset) {
  Scenario sc;
  sc.initial.agents = {{-2, y_offset, speed, 0}, {2, -y_offset, speed, kPi}};
  sc.histories = {{{-2, y_offset}}, {{2, -y_offset}}};
  sc.radii = Eigen::Vector2d(0.25, 0.25);
  sc.dt = 0.1;
  sc.horizon = horizon;
  sc.features.own_features = {Feature::goal, Feature::vel, Feature::acc, Feature::turnr};
  return sc;
}

// Energy radius 0.3 keeps a margin over the physical 0.25 m.
GameParams swap_params(const Scenario& sc) {
  GameParams p = uniform_params(sc.features, 2, 1.0, 20.0, 0.3);
  p.goals << 2, -2, 0, 0;
  p.own_weights.col(0).setConstant(2.0);
  p.own_weights.col(1).setConstant(0.3);
  p.own_weights.col(2).setConstant(0.5);
  p.own_weights.col(3).setConstant(0.5);
  return p;
}

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

Outcome gradient_suite() {
  const auto t0 = Clock::now();
  GradcheckOptions opts;
  opts.instances = 20;
  const GradcheckReport rep = run_gradcheck(opts);
  const double secs = seconds_since(t0);
  double worst = 0.0;
  for (const auto& r : rep.rows) worst = std::max(worst, r.max_rel_err);
  std::printf("%s", rep.table().c_str());
  return {rep.all_pass() && secs < 60.0,
          "20 instances, max rel err " + fmt("%.2e", worst) + ", " + fmt("%.1f s", secs)};
}

Outcome solver_properties() {
  int monotone = 0;
  std::mt19937_64 rng(2026);
  for (int t = 0; t < 100; ++t) {
    const RandomGame g = random_game(rng);
    const SolveResult r = solve(build_system(g.scenario, g.params), g.u, SolverConfig::adaptive(40));
    bool ok = true;
    for (std::size_t s = 1; s < r.report.energies.size(); ++s) ok = ok && r.report.energies[s] <= r.report.energies[s - 1];
    monotone += ok;
  }
  double worst_grad = 0.0, worst_gap = 0.0;
  std::normal_distribution<double> nd;
  for (int t = 0; t < 20; ++t) {
    Eigen::MatrixXd a(5 + t % 7, 2 + t % 4);
    Eigen::VectorXd b(a.rows());
    for (Eigen::Index k = 0; k < a.size(); ++k) a.data()[k] = nd(rng);
    for (Eigen::Index k = 0; k < b.size(); ++k) b(k) = nd(rng);
    const LinearLeastSquares prob(a, b);
    const VectorSolve res = solve(prob, Eigen::VectorXd::Zero(a.cols()), SolverConfig::adaptive(200, 1.0, 1e-6));
    worst_grad = std::max(worst_grad, res.report.gradient_inf_norm);
    worst_gap = std::max(worst_gap, (res.x - prob.optimum()).lpNorm<Eigen::Infinity>());
  }
  return {monotone == 100 && worst_grad < 1e-8,
          std::to_string(monotone) + "/100 monotone; linear LS grad " + fmt("%.1e", worst_grad) + ", |x-x*| " +
              fmt("%.1e", worst_gap)};
}

Outcome local_nash() {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> offset(0.02, 0.2), speed(0.8, 1.2);
  double worst = 1.0;
  int converged = 0;
  for (int t = 0; t < 20; ++t) {
    const Scenario sc = swap_scenario(30, speed(rng), (t % 2 ? -1.0 : 1.0) * offset(rng));
    const auto sys = build_system(sc, swap_params(sc));
    const SolveResult r = solve(sys, JointStrategy(2, 30, 0.1), SolverConfig::adaptive(300));
    converged += r.report.converged;
    const NashCertificate c = certify_local_nash(sys, r.solution, 200, 1e-2, 1e-6, t);
    worst = std::min(worst, c.pass_fraction);
  }
  return {converged == 20 && worst >= 0.95,
          std::to_string(converged) + "/20 converged, worst pass fraction " + fmt("%.3f", worst)};
}

Outcome mode_parallelism() {
  const Scenario sc = swap_scenario(30, 1.0, 0.0);
  bool identical = true;
  std::string timing;
  for (int m_count : {1, 2, 4, 8}) {
    std::vector<ResidualSystem> systems;
    GameParams p = swap_params(sc);
    for (int m = 0; m < m_count; ++m) {
      p.own_weights(0, 0) = 1.0 + 0.2 * m;
      systems.push_back(build_system(sc, p));
    }
    const auto inits = lateral_inits(sc, m_count);
    const SolverConfig cfg = SolverConfig::adaptive(50);
    const auto t0 = Clock::now();
    const auto par = solve_modes(systems, inits, cfg);
    timing += " M=" + std::to_string(m_count) + ":" + fmt("%.3fs", seconds_since(t0));
    for (int m = 0; m < m_count; ++m) {
      const SolveResult alone = solve(systems[m], inits[m], cfg);
      identical = identical && par[m].ok() && par[m].result->solution == alone.solution &&
                  par[m].result->report.energies == alone.report.energies;
    }
  }
  // Wall-clock scaling is informational and needs >= 4 cores.
  return {identical, std::string(identical ? "bit-identical" : "MISMATCH") + "; timing (" +
                         std::to_string(std::thread::hardware_concurrency()) + " cores):" + timing};
}

double min_sade(const std::vector<Demonstration>& demos, const std::function<ModeSet(const Demonstration&)>& f,
                double* overlap) {
  std::vector<SampleMetrics> s;
  for (const auto& d : demos) s.push_back(sample_metrics(f(d), d.gt_futures, d.scenario.radii));
  const MetricReport r = summarize(std::move(s));
  if (overlap) *overlap = r.overlap_rate;
  return r.min_sade;
}

Outcome rpi_recovery() {
  const auto t0 = Clock::now();
  RPIConfig cfg;
  cfg.configs = 20;
  const RPIDataset ds = generate_rpi(cfg);
  const DatasetSplit split = split_by_source(ds.demos, cfg.seed);
  const double gen_secs = seconds_since(t0);

  // Every 10th training demonstration: consecutive steps of one episode are
  // nearly duplicates.
  std::vector<Demonstration> train;
  for (std::size_t i = 0; i < split.train.size(); i += 10) train.push_back(split.train[i]);

  Model model;
  model.params = rpi_params(cfg, 30.0);
  model.modes = 2;
  // Own weights start off by factors of 0.3 and 3 on goal/vel/acc/turnr.
  Eigen::VectorXd factor = Eigen::VectorXd::Ones(model.params.own_weights.cols());
  factor.head(4) << 0.3, 3.0, 0.3, 3.0;
  for (Eigen::Index i = 0; i < model.params.own_weights.rows(); ++i) {
    model.params.own_weights.row(i) = model.params.own_weights.row(i).cwiseProduct(factor.transpose());
  }
  LearnConfig lc;
  lc.outer_steps = 25;
  lc.batch_size = 16;
  lc.learning_rate = 0.1;
  lc.inner.steps = 2;
  lc.inner.step_size = 1.0;
  lc.inner.damping = 1e-2;

  const double before = min_sade(split.test, [&](const Demonstration& d) { return predict_demo(d, model, lc); }, nullptr);
  const FitResult res = fit(train, model, lc);
  double overlap = 1.0;
  const double after =
      min_sade(split.test, [&](const Demonstration& d) { return predict_demo(d, res.model, lc); }, &overlap);
  const double cv = min_sade(split.test, [](const Demonstration& d) { return cv_baseline(d.scenario); }, nullptr);
  const double secs = seconds_since(t0);
  return {after < 0.05 && after < cv && overlap == 0.0 && secs < 900.0,
          std::to_string(ds.demos.size()) + " demos (gen " + fmt("%.0fs", gen_secs) + "), fit on " +
              std::to_string(train.size()) + "; test minSADE " + fmt("%.4f", before) + " -> " + fmt("%.4f", after) +
              ", CV " + fmt("%.4f", cv) + ", OR " + fmt("%.2f", overlap) + ", " + fmt("%.0f s", secs)};
}

Outcome metric_oracles() {
  std::mt19937_64 rng(6);
  int agree = 0;
  for (int t = 0; t < 200; ++t) {
    const oracle::Instance in = oracle::random_instance(rng);
    const oracle::Values want = oracle::brute_force(in);
    const auto [ade, fde] = min_ade_fde(in.pred, in.gt);
    const auto [sade, sfde] = min_sade_sfde(in.pred, in.gt);
    agree += ade == want.ade && fde == want.fde && sade == want.sade && sfde == want.sfde &&
             overlap_rate(in.pred, in.radii) == want.overlap;
  }
  return {agree == 200, std::to_string(agree) + "/200 exact matches"};
}

Outcome closed_loop() {
  const Scenario sc = swap_scenario(20, 0.0, 0.0);
  MpcSettings s;
  s.mode_params = {swap_params(sc), swap_params(sc)};
  const ClosedLoopResult r =
      simulate_closed_loop(sc, {AgentController::model_predictive(s), AgentController::model_predictive(s)}, 60);
  if (r.aborted) return {false, "aborted: " + r.error};
  double dmin = 1e9;
  int reached = -1;
  for (int k = 0; k <= r.completed_steps; ++k) {
    dmin = std::min(dmin, (r.executed.position(0, k) - r.executed.position(1, k)).norm());
    const double e0 = (r.executed.position(0, k) - Eigen::Vector2d(2, 0)).norm();
    const double e1 = (r.executed.position(1, k) - Eigen::Vector2d(-2, 0)).norm();
    if (reached < 0 && e0 < 0.3 && e1 < 0.3) reached = k;
  }
  const JointState end = r.executed.joint_state(r.completed_steps);
  const double e0 = std::hypot(end.agents[0].x - 2, end.agents[0].y);
  const double e1 = std::hypot(end.agents[1].x + 2, end.agents[1].y);
  return {dmin > 0.5 && e0 < 0.3 && e1 < 0.3 && reached >= 0,
          "goals reached at step " + std::to_string(reached) + ", min distance " + fmt("%.3f m", dmin) +
              ", final errors " + fmt("%.3f", e0) + "/" + fmt("%.3f m", e1)};
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

int run(const std::string& args) {
  const int status = std::system((std::string(EPG_BINARY) + " " + args + " > /dev/null 2>&1").c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

Outcome reproducibility() {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "epg_acceptance_repro";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const std::string d = dir.string();
  {
    std::ofstream(d + "/rpi.json") << R"({"configs": 3, "seed": 17})";
    std::ofstream(d + "/learn.json") << R"({"train_stride": 8, "batch_size": 4, "seed": 3})";
  }
  RPIConfig cfg;
  GameParams p0 = rpi_params(cfg, 30.0);
  p0.own_weights *= 0.5;
  io::write_json(d + "/p0.json", io::to_json(p0, cfg.features));
  bool ok = true;
  for (const char* run_dir : {"a", "b"}) {
    const std::string out = d + "/" + run_dir;
    ok = ok && run("generate --config " + d + "/rpi.json --out " + out) == 0;
    ok = ok && run("learn --data " + out + " --config " + d + "/learn.json --params0 " + d + "/p0.json" +
                   " --outer-steps 3 --modes 2 --out " + out + "/model.json") == 0;
  }
  if (!ok) return {false, "a command failed"};
  int identical = 0, files = 0;
  for (const char* f : {"train.jsonl", "val.jsonl", "test.jsonl", "traces.json", "model.json", "model.json.loss.csv"}) {
    ++files;
    const std::string a = slurp(d + "/a/" + f);
    identical += !a.empty() && a == slurp(d + "/b/" + f);
  }
  return {identical == files, std::to_string(identical) + "/" + std::to_string(files) +
                                  " generate/learn outputs byte-identical (manifests carry wall-clock and are excluded)"};
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    Outcome (*run)();
  };
  const Criterion criteria[] = {
      {1, "gradient suite", gradient_suite},       {2, "solver properties", solver_properties},
      {3, "local Nash certification", local_nash}, {4, "mode parallelism", mode_parallelism},
      {5, "RPI inverse-game recovery", rpi_recovery}, {6, "metric oracles", metric_oracles},
      {7, "closed-loop MPC swap", closed_loop},    {8, "reproducibility", reproducibility},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += !o.pass;
    std::printf("criterion %d %s: %s (%s)\n", c.id, c.name, o.pass ? "PASS" : "FAIL", o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of 8 criteria passed\n", 8 - failures);
  return failures == 0 ? 0 : 1;
}
