// rijke4dvar: simulate, twin, sweep, assimilate and grad-check commands.
//
// Exit codes: 0 success, 1 unexpected error, 2 configuration error,
// 3 numerical failure, 4 run completed but a check failed (optimizer not
// converged, gradient check above tolerance).

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "rijke4dvar/rijke4dvar.hpp"

namespace fs = std::filesystem;
using namespace rijke4dvar;

namespace {

enum ExitCode { kOk = 0, kUnexpected = 1, kConfig = 2, kNumerical = 3, kCheckFailed = 4 };

struct Options {
  std::string config_path;
  std::vector<std::string> overrides;
  std::string out_dir;
  std::uint64_t seed = 0;
  bool seed_given = false;
  std::string obs_path;
};

config::RunConfig resolve(const Options& opt) {
  config::RunConfig cfg = opt.config_path.empty() ? config::RunConfig{} : config::load_file(opt.config_path);
  for (const auto& s : opt.overrides) config::apply_override(cfg, s);
  if (opt.seed_given) cfg.seed = opt.seed;
  if (!opt.out_dir.empty()) {
    cfg.output_dir = opt.out_dir;
  } else if (cfg.output_dir.empty()) {
    const char* env = std::getenv("RIJKE4DVAR_OUT");
    cfg.output_dir = env && *env ? env : ".";
  }
  cfg.validate();
  return cfg;
}

std::ofstream open_output(const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

io::Metadata metadata(const std::string& command, const config::RunConfig& cfg) {
  io::Metadata meta{"rijke4dvar " + command};
  for (auto& line : config::metadata_lines(cfg)) meta.push_back(std::move(line));
  return meta;
}

/// run_meta.yaml: the resolved config, loadable with --config, followed by
/// derived values as comments.
void write_run_meta(const fs::path& dir, const std::string& command, const config::RunConfig& cfg,
                    const std::vector<std::string>& derived) {
  auto out = open_output(dir / "run_meta.yaml");
  out << "# rijke4dvar " << command << '\n' << config::to_yaml(cfg);
  for (const auto& line : derived) out << "# " << line << '\n';
}

std::string yes_no(bool b) { return b ? "true" : "false"; }

std::vector<std::string> twin_derived(const TwinResult& r) {
  const auto& s = r.summary;
  return {
      "cost_pairing: J_bg^" + std::string(to_string(r.problem.background.kind)) + " / J_obs^" +
          std::string(to_string(r.problem.observations.kind)),
      "consistent_pairing: " + yes_no(r.consistent_pairing),
      "normalization: " + io::format_number(s.normalization),
      "normalization_fallback: " + yes_no(s.normalization_fallback),
      "converged: " + yes_no(r.optimization.converged),
      "iterations: " + std::to_string(r.optimization.iterations),
      "evaluations: " + std::to_string(r.optimization.evaluations),
      "restarts: " + std::to_string(r.optimization.restarts),
      "relative_grad_norm: " + io::format_number(r.optimization.relative_grad_norm()),
      "optimizer_diagnostic: " + r.optimization.diagnostic,
      "J_background: " + io::format_number(r.background_cost.total),
      "J_analysis: " + io::format_number(r.analysis_cost.total),
  };
}

void write_twin_files(const fs::path& dir, const config::RunConfig& cfg, const TwinResult& r) {
  fs::create_directories(dir);
  io::Metadata meta = metadata("twin", cfg);
  for (const auto& line : twin_derived(r)) meta.push_back(line);
  {
    auto out = open_output(dir / "errors.csv");
    io::write_errors_csv(out, r, meta);
  }
  {
    auto out = open_output(dir / "summary.csv");
    io::write_summary_csv(out, r, meta);
  }
  {
    auto out = open_output(dir / "iterations.csv");
    io::write_iterations_csv(out, r.optimization.log, meta);
  }
  {
    auto out = open_output(dir / "costs.csv");
    io::write_cost_csv(out, r.analysis_cost, r.problem.observations, meta);
  }
  {
    auto out = open_output(dir / "states.csv");
    io::write_states_csv(out, {"truth", "background", "analysis"},
                         {&r.x0_true, &r.x0_bg, &r.x0_analysis}, meta);
  }
  {
    auto out = open_output(dir / "observations.csv");
    io::write_observations_csv(out, r.problem.observations, meta);
  }
  write_run_meta(dir, "twin", cfg, twin_derived(r));
}

void print_log(const std::vector<IterationLog>& log) {
  std::printf("%5s %14s %14s %14s %12s %10s\n", "iter", "J", "J_bg", "J_obs", "|grad|", "step");
  for (const auto& it : log)
    std::printf("%5d %14.6e %14.6e %14.6e %12.4e %10.3e\n", it.iteration, it.j, it.j_bg, it.j_obs,
                it.grad_norm, it.step);
}

int cmd_simulate(const Options& opt) {
  const auto cfg = resolve(opt);
  const fs::path dir = cfg.output_dir;
  fs::create_directories(dir);
  const ModelParams params(cfg.model);
  const Trajectory traj = integrate(cfg.initial_state(), params, cfg.integrator);
  const auto meta = metadata("simulate", cfg);
  {
    auto out = open_output(dir / "trajectory.csv");
    io::write_trajectory_csv(out, traj, cfg.x_m, meta);
  }
  {
    auto out = open_output(dir / "probe.csv");
    io::write_probe_csv(out, traj, cfg.x_m, meta);
  }
  const StateVector last = traj.state(traj.n_steps());
  write_run_meta(dir, "simulate", cfg,
                 {"steps: " + std::to_string(traj.n_steps()),
                  "final_energy: " + io::format_number(acoustic_energy(last))});
  std::printf("simulate: %zu steps to t=%g, final energy %.6e -> %s\n", traj.n_steps(),
              traj.t_end(), acoustic_energy(last), dir.string().c_str());
  return kOk;
}

int cmd_twin(const Options& opt) {
  const auto cfg = resolve(opt);
  const TwinResult r = run_twin(cfg.twin());
  print_log(r.optimization.log);
  write_twin_files(cfg.output_dir, cfg, r);
  const auto& s = r.summary;
  std::printf("assimilation RMS: background %.6e analysis %.6e\n", s.assimilation.background,
              s.assimilation.analysis);
  std::printf("forecast RMS:     background %.6e analysis %.6e\n", s.forecast.background,
              s.forecast.analysis);
  if (!r.consistent_pairing)
    std::printf("note: J_bg^%s with J_obs^%s is not a consistent pairing\n",
                std::string(to_string(cfg.bg_kind)).c_str(), std::string(to_string(cfg.obs_kind)).c_str());
  if (!r.optimization.converged) {
    std::fprintf(stderr, "optimizer did not converge: %s\n", r.optimization.diagnostic.c_str());
    return kCheckFailed;
  }
  return kOk;
}

int cmd_sweep(const Options& opt) {
  const auto cfg = resolve(opt);
  const fs::path dir = cfg.output_dir;
  fs::create_directories(dir);
  const auto results = sweep_n_obs(cfg.twin(), cfg.sweep_n_obs);
  bool all_converged = true;
  io::Metadata meta = metadata("sweep", cfg);
  auto out = open_output(dir / "sweep.csv");
  io::CsvWriter csv(out, meta,
                    {"n_obs", "rms_assim_background", "rms_assim_analysis", "rms_forecast_background",
                     "rms_forecast_analysis", "converged"});
  std::printf("%6s %14s %14s %14s %14s\n", "n_obs", "assim_bg", "assim_an", "fcst_bg", "fcst_an");
  for (std::size_t i = 0; i < results.size(); ++i) {
    const auto& r = results[i];
    config::RunConfig run_cfg = cfg;
    run_cfg.n_obs = cfg.sweep_n_obs[i];
    write_twin_files(dir / ("n_obs_" + std::to_string(run_cfg.n_obs)), run_cfg, r);
    const auto& s = r.summary;
    csv.row({static_cast<double>(run_cfg.n_obs), s.assimilation.background, s.assimilation.analysis,
             s.forecast.background, s.forecast.analysis, r.optimization.converged ? 1.0 : 0.0});
    std::printf("%6d %14.6e %14.6e %14.6e %14.6e%s\n", run_cfg.n_obs, s.assimilation.background,
                s.assimilation.analysis, s.forecast.background, s.forecast.analysis,
                r.optimization.converged ? "" : "  (not converged)");
    all_converged = all_converged && r.optimization.converged;
  }
  write_run_meta(dir, "sweep", cfg, {"all_converged: " + yes_no(all_converged)});
  return all_converged ? kOk : kCheckFailed;
}

int cmd_assimilate(const Options& opt) {
  auto cfg = resolve(opt);
  if (!opt.obs_path.empty()) cfg.observations_file = opt.obs_path;
  if (cfg.observations_file.empty())
    throw ConfigError("assimilate needs an observation file (--obs or observations.file)");
  std::ifstream in(cfg.observations_file);
  if (!in) throw ConfigError("cannot read observation file '" + cfg.observations_file + "'");

  const ModelParams params(cfg.model);
  AssimilationProblem problem{params,
                              cfg.integrator,
                              {cfg.bg_kind, cfg.background_state(), cfg.x_m},
                              io::read_observations_csv(in, cfg.obs_kind, cfg.x_m, cfg.model.n_modes),
                              cfg.covariance};
  locate_observations(problem.observations, TimeGrid::make(cfg.integrator, params), params.n_modes());

  const OptimizationResult opt_result = minimize(problem, cfg.optimizer);
  print_log(opt_result.log);
  const CostBreakdown cost = eval_total(opt_result.x0_analysis, problem).cost;

  const fs::path dir = cfg.output_dir;
  fs::create_directories(dir);
  std::vector<std::string> derived{
      "converged: " + yes_no(opt_result.converged),
      "iterations: " + std::to_string(opt_result.iterations),
      "relative_grad_norm: " + io::format_number(opt_result.relative_grad_norm()),
      "optimizer_diagnostic: " + opt_result.diagnostic,
      "consistent_pairing: " + yes_no(pairing_is_consistent(cfg.bg_kind, cfg.obs_kind)),
      "J_analysis: " + io::format_number(cost.total)};
  io::Metadata meta = metadata("assimilate", cfg);
  meta.insert(meta.end(), derived.begin(), derived.end());
  {
    auto out = open_output(dir / "states.csv");
    io::write_states_csv(out, {"background", "analysis"},
                         {&problem.background.x0_bg, &opt_result.x0_analysis}, meta);
  }
  {
    auto out = open_output(dir / "iterations.csv");
    io::write_iterations_csv(out, opt_result.log, meta);
  }
  {
    auto out = open_output(dir / "costs.csv");
    io::write_cost_csv(out, cost, problem.observations, meta);
  }
  {
    auto out = open_output(dir / "trajectory.csv");
    io::write_trajectory_csv(out, integrate(opt_result.x0_analysis, params, cfg.integrator), cfg.x_m, meta);
  }
  write_run_meta(dir, "assimilate", cfg, derived);
  if (!opt_result.converged) {
    std::fprintf(stderr, "optimizer did not converge: %s\n", opt_result.diagnostic.c_str());
    return kCheckFailed;
  }
  return kOk;
}

int cmd_grad_check(const Options& opt) {
  const auto cfg = resolve(opt);
  const TwinSetup setup = make_twin_setup(cfg.twin());
  // Evaluate away from the background so both cost terms contribute.
  const StateVector x0 = setup.x0_true;
  const GradientReport adj = gradient(x0, setup.problem);
  const Eigen::VectorXd fd = fd_gradient(x0, setup.problem, cfg.grad_check_step);
  const Eigen::VectorXd err = gradient_relative_error(adj.grad, fd);

  const fs::path dir = cfg.output_dir;
  fs::create_directories(dir);
  io::Metadata meta = metadata("grad-check", cfg);
  meta.push_back("J: " + io::format_number(adj.j_value));
  auto out = open_output(dir / "grad_check.csv");
  io::CsvWriter csv(out, meta, {"index", "adjoint", "finite_difference", "relative_error"});
  std::printf("J = %.10e\n%5s %22s %22s %12s\n", adj.j_value, "index", "adjoint", "fd", "rel_err");
  for (Eigen::Index i = 0; i < err.size(); ++i) {
    csv.row({static_cast<double>(i), adj.grad[i], fd[i], err[i]});
    std::printf("%5ld %22.14e %22.14e %12.3e\n", static_cast<long>(i), adj.grad[i], fd[i], err[i]);
  }
  const double worst = err.maxCoeff();
  std::printf("max relative error %.3e (tolerance %.1e)\n", worst, cfg.grad_check_tolerance);
  return worst <= cfg.grad_check_tolerance ? kOk : kCheckFailed;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"4D-Var state estimation for a time-delayed Rijke tube model"};
  app.require_subcommand(1);
  app.fallthrough();

  Options opt;
  app.add_option("-c,--config", opt.config_path, "YAML run configuration")->check(CLI::ExistingFile);
  app.add_option("--set", opt.overrides, "Override a config key: section.key=value (repeatable)");
  app.add_option("-o,--out", opt.out_dir, "Output directory (default $RIJKE4DVAR_OUT, then .)");
  auto* seed = app.add_option("--seed", opt.seed, "RNG seed for twin, sweep and grad-check");

  auto* simulate = app.add_subcommand("simulate", "Forward run: trajectory.csv, probe.csv");
  auto* twin = app.add_subcommand("twin", "Twin experiment: errors, summary, iterations, costs, states");
  auto* sweep = app.add_subcommand("sweep", "Twin experiments over sweep.n_obs");
  auto* assimilate = app.add_subcommand("assimilate", "Assimilate observations from a CSV file");
  assimilate->add_option("--obs", opt.obs_path, "Observation CSV (t,p or t,eta_dot_1..N)");
  auto* grad_check = app.add_subcommand("grad-check", "Compare adjoint and finite-difference gradients");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }
  opt.seed_given = seed->count() > 0;

  try {
    if (*simulate) return cmd_simulate(opt);
    if (*twin) return cmd_twin(opt);
    if (*sweep) return cmd_sweep(opt);
    if (*assimilate) return cmd_assimilate(opt);
    if (*grad_check) return cmd_grad_check(opt);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const IntegrationDiverged& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kNumerical;
  } catch (const NumericalFailure& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUnexpected;
  }
  return kUnexpected;
}
