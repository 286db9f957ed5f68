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

// Command-line front end.
//
//   epg generate  --config rpi.json --out data/
//   epg solve     --scenario s.json --params p.json --out traj.json
//   epg predict   --scenario s.json --params p.json --modes 2 --out pred.json
//   epg learn     --data data/ --params0 p0.json --out model.json
//   epg evaluate  --data data/ --params model.json --out report.json
//   epg simulate  --scenario s.json --params p.json --ego 0 --steps 60 --out sim.json
//   epg gradcheck --seed 0
//
// Exit codes: 0 ok, 2 configuration error, 3 numerical error, 4 I/O error.

#include <chrono>
#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "epg/gradcheck.hpp"
#include "epg/io.hpp"

namespace {

using epg::io::json;
using Clock = std::chrono::steady_clock;

constexpr int kOk = 0;
constexpr int kConfig = 2;
constexpr int kNumerical = 3;
constexpr int kIo = 4;

struct SolverFlags {
  std::optional<int> steps;
  std::optional<double> alpha;
  std::optional<double> damping;
  bool adaptive = false;

  void add(CLI::App* cmd) {
    cmd->add_option("--steps", steps, "LM steps (accepted steps when adaptive)");
    cmd->add_option("--alpha", alpha, "step size");
    cmd->add_option("--damping", damping, "initial damping");
    cmd->add_flag("--adaptive", adaptive, "accept only energy-decreasing steps");
  }

  epg::SolverConfig config() const {
    epg::SolverConfig c = adaptive ? epg::SolverConfig::adaptive(100) : epg::SolverConfig{};
    if (steps) c.steps = *steps;
    if (alpha) c.step_size = *alpha;
    if (damping) c.damping = *damping;
    c.validate();
    return c;
  }
};

void write_manifest(const std::string& path, const std::string& command, const json& config,
                    std::uint64_t seed, Clock::time_point start, std::vector<std::string> outputs) {
  epg::io::RunManifest m;
  m.command = command;
  m.config_hash = epg::io::hex64(epg::io::fnv1a64(config.dump()));
  m.seed = seed;
  m.wall_clock_seconds = std::chrono::duration<double>(Clock::now() - start).count();
  m.outputs = std::move(outputs);
  epg::io::write_json(path, epg::io::to_json(m));
}

// Per-mode parameters: an array of parameter documents, a model document or
// a single parameter document shared by every mode.
std::vector<epg::GameParams> mode_params(const json& j, const epg::FeatureSpec& spec, int modes) {
  std::vector<epg::GameParams> out;
  if (j.is_array()) {
    for (std::size_t m = 0; m < j.size(); ++m) {
      out.push_back(epg::io::params_from_json(j[m], spec, "[" + std::to_string(m) + "]"));
    }
    if (static_cast<int>(out.size()) != modes) {
      throw epg::ConfigError("params", "expected " + std::to_string(modes) + " parameter sets");
    }
    return out;
  }
  const epg::Model model = epg::io::model_from_json(j, spec);
  return std::vector<epg::GameParams>(modes, model.params);
}

int run_generate(const std::string& config_path, const std::string& out, std::optional<std::uint64_t> seed) {
  const auto start = Clock::now();
  json cj = config_path.empty() ? json::object() : epg::io::read_json(config_path);
  if (seed) cj["seed"] = *seed;
  const epg::RPIConfig cfg = epg::io::rpi_config_from_json(cj);
  const epg::RPIDataset ds = epg::generate_rpi(cfg);
  const epg::DatasetSplit split = epg::split_by_source(ds.demos, cfg.seed);
  epg::io::make_dirs(out);
  epg::io::write_demos(out + "/train.jsonl", split.train);
  epg::io::write_demos(out + "/val.jsonl", split.val);
  epg::io::write_demos(out + "/test.jsonl", split.test);
  json traces = json::array();
  for (const auto& t : ds.traces) {
    traces.push_back({{"config", t.config},
                      {"pedestrian_angle", t.pedestrian_angle},
                      {"collision_weight", t.collision_weight},
                      {"steps", t.steps},
                      {"main_modes", t.main_modes},
                      {"failures", t.failures},
                      {"executed", epg::io::to_json(t.executed)}});
  }
  json tdoc = {{"schema_version", epg::io::kSchemaVersion}, {"kind", "traces"}, {"units", epg::io::units()},
               {"config", epg::io::to_json(cfg)}, {"traces", std::move(traces)}};
  epg::io::write_json(out + "/traces.json", tdoc);
  write_manifest(out + "/manifest.json", "generate", epg::io::to_json(cfg), cfg.seed, start,
                 {out + "/train.jsonl", out + "/val.jsonl", out + "/test.jsonl", out + "/traces.json"});
  std::printf("generated %zu demonstrations (train %zu, val %zu, test %zu) from %d configurations\n",
              ds.demos.size(), split.train.size(), split.val.size(), split.test.size(), cfg.configs);
  return kOk;
}

int run_predict(const std::string& command, const std::string& scenario_path, const std::string& params_path,
                const std::string& init_path, int modes, bool propose, double beta, const SolverFlags& flags,
                const std::string& out, const std::string& plot) {
  const auto start = Clock::now();
  const epg::Scenario scenario = epg::io::scenario_from_json(epg::io::read_json(scenario_path));
  if (modes < 1) throw epg::ConfigError("modes", "must be >= 1");
  const std::vector<epg::GameParams> params = mode_params(epg::io::read_json(params_path), scenario.features, modes);
  const epg::SolverConfig cfg = flags.config();

  std::vector<epg::JointStrategy> inits;
  if (!init_path.empty()) {
    const json ij = epg::io::read_json(init_path);
    if (ij.is_array()) {
      for (std::size_t m = 0; m < ij.size(); ++m) {
        inits.push_back(epg::io::strategy_from_json(ij[m], "[" + std::to_string(m) + "]"));
      }
    } else {
      inits.assign(modes, epg::io::strategy_from_json(ij, ""));
    }
    if (static_cast<int>(inits.size()) != modes) throw epg::ConfigError("init", "expected one strategy per mode");
  } else if (command == "solve" || modes == 1) {
    inits.assign(modes, epg::JointStrategy(scenario.n_agents(), scenario.horizon, scenario.dt));
  } else if (propose) {
    inits = epg::propose_inits(scenario, params.front(), modes);
  } else {
    inits = epg::lateral_inits(scenario, modes);
  }
  const epg::ModeSet ms = epg::predict(scenario, params, inits, cfg, beta);
  epg::io::write_json(out, epg::io::to_json(ms, scenario));
  std::vector<std::string> outputs{out};
  if (!plot.empty()) {
    epg::io::write_text(plot, epg::io::plot_csv(ms, scenario.dt));
    outputs.push_back(plot);
  }
  json config = {{"solver", epg::io::to_json(cfg)}, {"modes", modes}, {"beta", beta}, {"propose", propose}};
  write_manifest(out + ".manifest.json", command, config, 0, start, outputs);
  for (int m = 0; m < ms.size(); ++m) {
    std::printf("mode %d: energy %.6g probability %.6f%s\n", m, ms.modes[m].energy, ms.probabilities(m),
                ms.modes[m].failed ? " (failed)" : "");
  }
  return kOk;
}

epg::LearnConfig learn_config(const std::string& path, json* raw) {
  *raw = path.empty() ? json::object() : epg::io::read_json(path);
  return epg::io::learn_config_from_json(*raw);
}

int run_learn(const std::string& data, const std::string& config_path, const std::string& params0_path,
              const std::string& out, const std::string& curve, std::optional<int> outer_steps,
              std::optional<int> modes_flag, std::optional<int> stride_flag) {
  const auto start = Clock::now();
  json raw;
  epg::LearnConfig cfg = learn_config(config_path, &raw);
  if (outer_steps) cfg.outer_steps = *outer_steps;
  cfg.validate();
  int stride = raw.value("train_stride", 1);
  if (stride_flag) stride = *stride_flag;
  if (stride < 1) throw epg::ConfigError("train_stride", "must be >= 1");
  const std::vector<epg::Demonstration> all = epg::io::read_demos(data + "/train.jsonl");
  if (all.empty()) throw epg::ConfigError("data", "training split is empty");
  std::vector<epg::Demonstration> train;
  for (std::size_t i = 0; i < all.size(); i += stride) train.push_back(all[i]);
  const epg::FeatureSpec& spec = train.front().scenario.features;
  epg::Model model = epg::io::model_from_json(epg::io::read_json(params0_path), spec);
  if (modes_flag) model.modes = *modes_flag;
  else if (raw.contains("modes")) model.modes = raw.at("modes").get<int>();
  if (model.modes < 1) throw epg::ConfigError("modes", "must be >= 1");

  const epg::FitResult res = epg::fit(train, model, cfg);
  epg::io::write_json(out, epg::io::to_json(res.model, spec));
  const std::string curve_path = curve.empty() ? out + ".loss.csv" : curve;
  epg::io::write_text(curve_path, epg::io::loss_curve_csv(res));
  json config = epg::io::to_json(cfg);
  config["train_stride"] = stride;
  config["modes"] = model.modes;
  write_manifest(out + ".manifest.json", "learn", config, cfg.seed, start, {out, curve_path});
  std::printf("fitted on %zu demonstrations over %d epochs", train.size(), res.epochs);
  if (!res.loss_curve.empty()) std::printf(": loss %.6g -> %.6g", res.loss_curve.front(), res.loss_curve.back());
  std::printf("\n");
  return kOk;
}

int run_evaluate(const std::string& data, const std::string& split, const std::string& params_path,
                 const std::string& config_path, bool cv, bool gt, std::optional<int> modes_flag,
                 const std::string& out) {
  const auto start = Clock::now();
  const int sources = int(cv) + int(gt) + int(!params_path.empty());
  if (sources != 1) throw epg::ConfigError("evaluate", "choose exactly one of --params, --cv, --gt");
  const std::vector<epg::Demonstration> demos = epg::io::read_demos(data + "/" + split + ".jsonl");
  if (demos.empty()) throw epg::ConfigError("data", split + " split is empty");
  json raw;
  const epg::LearnConfig cfg = learn_config(config_path, &raw);
  std::optional<epg::Model> model;
  if (!params_path.empty()) {
    model = epg::io::model_from_json(epg::io::read_json(params_path), demos.front().scenario.features);
    if (modes_flag) model->modes = *modes_flag;
  }
  std::vector<epg::SampleMetrics> samples;
  for (const auto& d : demos) {
    epg::ModeSet ms;
    if (cv) {
      ms = epg::cv_baseline(d.scenario);
    } else if (gt) {
      for (std::size_t f = 0; f < d.gt_futures.size(); ++f) {
        epg::Mode mode;
        mode.trajectory = d.gt_futures[f];
        ms.modes.push_back(std::move(mode));
      }
      ms.probabilities = Eigen::VectorXd::Constant(ms.size(), 1.0 / ms.size());
    } else {
      ms = epg::predict_demo(d, *model, cfg);
    }
    samples.push_back(epg::sample_metrics(ms, d.gt_futures, d.scenario.radii));
  }
  const epg::MetricReport rep = epg::summarize(std::move(samples));
  epg::io::write_json(out, epg::io::to_json(rep));
  json config = {{"split", split}, {"source", cv ? "cv" : (gt ? "gt" : "params")}, {"learn", epg::io::to_json(cfg)}};
  write_manifest(out + ".manifest.json", "evaluate", config, cfg.seed, start, {out});
  std::printf("%-8s %-8s %-8s %-8s %-8s\n", "ADE", "FDE", "SADE", "SFDE", "OR");
  std::printf("%-8.4f %-8.4f %-8.4f %-8.4f %-8.4f\n", rep.min_ade, rep.min_fde, rep.min_sade, rep.min_sfde,
              rep.overlap_rate);
  return kOk;
}

int run_simulate(const std::string& scenario_path, const std::string& params_path, int ego, bool all_mpc,
                 int steps, int modes, double beta, const SolverFlags& flags, const std::string& out,
                 const std::string& plot) {
  const auto start = Clock::now();
  const epg::Scenario scenario = epg::io::scenario_from_json(epg::io::read_json(scenario_path));
  if (ego < 0 || ego >= scenario.n_agents()) throw epg::ConfigError("ego", "agent index out of range");
  if (steps < 1) throw epg::ConfigError("steps", "must be >= 1");
  if (modes < 1) throw epg::ConfigError("modes", "must be >= 1");
  epg::MpcSettings mpc;
  mpc.mode_params = mode_params(epg::io::read_json(params_path), scenario.features, modes);
  mpc.beta = beta;
  if (flags.steps || flags.alpha || flags.damping || flags.adaptive) mpc.solver = flags.config();
  std::vector<epg::AgentController> controllers;
  for (int i = 0; i < scenario.n_agents(); ++i) {
    controllers.push_back(i == ego || all_mpc ? epg::AgentController::model_predictive(mpc)
                                              : epg::AgentController::zero());
  }
  const epg::ClosedLoopResult res = epg::simulate_closed_loop(scenario, controllers, steps);
  epg::io::write_json(out, epg::io::to_json(res));
  std::vector<std::string> outputs{out};
  if (!plot.empty()) {
    epg::io::write_text(plot, "t,agent,x,y,mode\n" + epg::io::plot_csv(res.executed, scenario.dt));
    outputs.push_back(plot);
  }
  json config = {{"ego", ego}, {"all_mpc", all_mpc}, {"steps", steps}, {"modes", modes},
                 {"solver", epg::io::to_json(mpc.solver)}};
  write_manifest(out + ".manifest.json", "simulate", config, 0, start, outputs);
  std::printf("completed %d of %d steps%s\n", res.completed_steps, steps, res.aborted ? " (aborted)" : "");
  if (res.aborted) {
    std::fprintf(stderr, "error: %s\n", res.error.c_str());
    return kNumerical;
  }
  return kOk;
}

int run_gradcheck(std::uint64_t seed, int instances, bool inject) {
  epg::GradcheckOptions opts;
  opts.seed = seed;
  opts.instances = instances;
  opts.inject_bug = inject;
  const epg::GradcheckReport rep = epg::run_gradcheck(opts);
  std::printf("%s", rep.table().c_str());
  if (!rep.all_pass()) {
    std::fprintf(stderr, "gradient check FAILED\n");
    return kNumerical;
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Energy-based potential game solver, predictor and learner"};
  app.require_subcommand(1);

  std::string config, out, scenario, params, init, data, params0, curve, split = "test", plot;
  std::optional<std::uint64_t> seed;
  std::optional<int> outer_steps, modes_opt, stride;
  int modes = 1, ego = 0, steps = 60, instances = 20;
  double beta = 1.0;
  bool propose = false, cv = false, gt = false, all_mpc = false, inject = false;
  std::uint64_t gc_seed = 0;
  SolverFlags solve_flags, predict_flags, sim_flags;

  auto* gen = app.add_subcommand("generate", "generate an RPI-style dataset");
  gen->add_option("--config", config, "RPI config (JSON)");
  gen->add_option("--out", out, "output directory")->required();
  gen->add_option("--seed", seed, "override the config seed");

  auto* sol = app.add_subcommand("solve", "solve one game from an initial strategy");
  sol->add_option("--scenario", scenario, "scenario file")->required();
  sol->add_option("--params", params, "parameter file")->required();
  sol->add_option("--init", init, "initial strategy file (default zero controls)");
  sol->add_option("--out", out, "trajectory file")->required();
  sol->add_option("--plot", plot, "columnar plot data");
  solve_flags.add(sol);

  auto* pre = app.add_subcommand("predict", "multi-modal prediction");
  pre->add_option("--scenario", scenario, "scenario file")->required();
  pre->add_option("--params", params, "parameter file (array for per-mode parameters)")->required();
  pre->add_option("--init", init, "initial strategies");
  pre->add_option("--modes", modes, "number of modes M");
  pre->add_flag("--propose", propose, "search-based initial strategies");
  pre->add_option("--beta", beta, "probability temperature");
  pre->add_option("--out", out, "prediction file")->required();
  pre->add_option("--plot", plot, "columnar plot data");
  predict_flags.add(pre);

  auto* lrn = app.add_subcommand("learn", "fit game parameters to demonstrations");
  lrn->add_option("--data", data, "dataset directory")->required();
  lrn->add_option("--config", config, "learn config (JSON)");
  lrn->add_option("--params0", params0, "initial parameters")->required();
  lrn->add_option("--out", out, "fitted model file")->required();
  lrn->add_option("--loss-curve", curve, "loss curve CSV (default <out>.loss.csv)");
  lrn->add_option("--outer-steps", outer_steps, "epochs");
  lrn->add_option("--modes", modes_opt, "number of modes M");
  lrn->add_option("--train-stride", stride, "use every n-th training demonstration");

  auto* ev = app.add_subcommand("evaluate", "metric report on a dataset split");
  ev->add_option("--data", data, "dataset directory")->required();
  ev->add_option("--split", split, "train, val or test");
  ev->add_option("--params", params, "fitted model or parameter file");
  ev->add_option("--config", config, "learn config used for prediction");
  ev->add_option("--modes", modes_opt, "number of modes M");
  ev->add_flag("--cv", cv, "constant-velocity baseline");
  ev->add_flag("--gt", gt, "ground truth as prediction");
  ev->add_option("--out", out, "report file")->required();

  auto* sim = app.add_subcommand("simulate", "closed-loop receding-horizon control");
  sim->add_option("--scenario", scenario, "scenario file")->required();
  sim->add_option("--params", params, "parameter file")->required();
  sim->add_option("--ego", ego, "agent driven by the controller");
  sim->add_flag("--all-mpc", all_mpc, "drive every agent by the controller");
  sim->add_option("--steps", steps, "simulation steps");
  sim->add_option("--modes", modes, "number of modes M");
  sim->add_option("--beta", beta, "probability temperature");
  sim->add_option("--out", out, "result file")->required();
  sim->add_option("--plot", plot, "columnar plot data");
  sim->add_option("--solver-steps", sim_flags.steps, "LM steps per control cycle");
  sim->add_option("--alpha", sim_flags.alpha, "step size");
  sim->add_option("--damping", sim_flags.damping, "initial damping");
  sim->add_flag("--adaptive", sim_flags.adaptive, "accept only energy-decreasing steps");

  auto* gc = app.add_subcommand("gradcheck", "finite-difference verification of all derivatives");
  gc->add_option("--seed", gc_seed, "instance seed");
  gc->add_option("--instances", instances, "instances per check");
  gc->add_flag("--inject-bug", inject, "negate one Jacobian block (harness self-test)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kConfig;
  }

  try {
    if (*gen) return run_generate(config, out, seed);
    if (*sol) return run_predict("solve", scenario, params, init, 1, false, 1.0, solve_flags, out, plot);
    if (*pre) return run_predict("predict", scenario, params, init, modes, propose, beta, predict_flags, out, plot);
    if (*lrn) return run_learn(data, config, params0, out, curve, outer_steps, modes_opt, stride);
    if (*ev) return run_evaluate(data, split, params, config, cv, gt, modes_opt, out);
    if (*sim) return run_simulate(scenario, params, ego, all_mpc, steps, modes, beta, sim_flags, out, plot);
    if (*gc) return run_gradcheck(gc_seed, instances, inject);
  } catch (const epg::ConfigError& e) {
    std::fprintf(stderr, "configuration error: %s\n", e.what());
    return kConfig;
  } catch (const epg::IoError& e) {
    std::fprintf(stderr, "I/O error: %s\n", e.what());
    return kIo;
  } catch (const epg::NumericalError& e) {
    std::fprintf(stderr, "numerical error: %s\n", e.what());
    return kNumerical;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "invalid input: %s\n", e.what());
    return kConfig;
  } catch (const nlohmann::json::exception& e) {
    std::fprintf(stderr, "configuration error: %s\n", e.what());
    return kConfig;
  }
  return kOk;
}
