// smpc: distributed stochastic MPC traffic signal control.
//
// Subcommands:
//   solve     assemble one horizon from a network + scenario and run the
//             distributed solver, writing solutions, stats and traces
//   simulate  closed-loop evaluation of a controller against the plant
//   bench     iteration/time table over horizons on randomized instances
//
// Exit codes: 0 success, 2 configuration error, 3 solver non-convergence,
// 4 infeasible problem.

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "smpc/admm.hpp"
#include "smpc/experiment.hpp"
#include "smpc/oracle.hpp"

using namespace smpc;
namespace fs = std::filesystem;

namespace {

int log_level() {
  const char* env = std::getenv("SMPC_LOG");
  if (!env) return 1;
  const std::string v = env;
  if (v == "debug") return 2;
  if (v == "quiet") return 0;
  return 1;
}

struct CommonArgs {
  std::string network_path;
  std::string scenario_path;
  std::string controller = "stochastic-mpc";
  std::string partition = "file";  // per-junction | file
  std::string out_dir = "out";
  double rho = 0.01;
  double tol = 1e-6;
  long max_iter = 20000;
  int horizon = 3;
  double epsilon = 0.2;
  uint64_t seed = 1;
  bool trace = false;
  bool parallel = false;
};

void add_common(CLI::App* cmd, CommonArgs& a, bool need_scenario) {
  cmd->add_option("--network", a.network_path, "network JSON file")->required();
  auto* sopt = cmd->add_option("--scenario", a.scenario_path, "scenario JSON file");
  if (need_scenario) sopt->required();
  cmd->add_option("--controller", a.controller,
                  "pretimed | backpressure | nominal-mpc | stochastic-mpc");
  cmd->add_option("--partition", a.partition, "per-junction or file (use the file's block)");
  cmd->add_option("--out", a.out_dir, "output directory");
  cmd->add_option("--rho", a.rho, "ADMM penalty");
  cmd->add_option("--tol", a.tol, "termination tolerance");
  cmd->add_option("--max-iter", a.max_iter, "iteration cap");
  cmd->add_option("--horizon", a.horizon, "prediction horizon K");
  cmd->add_option("--epsilon", a.epsilon, "chance-constraint level");
  cmd->add_option("--seed", a.seed, "random seed");
  cmd->add_flag("--trace", a.trace, "write per-iteration JSONL traces");
  cmd->add_flag("--parallel", a.parallel, "one worker thread per agent");
}

Partition make_partition(const NetworkFile& file, const std::string& mode) {
  if (mode == "per-junction") return per_junction_partition(file.network);
  if (mode == "file") {
    if (file.partition.empty())
      throw std::invalid_argument(
          "network file has no partition block; use --partition per-junction");
    return partition_network(file.network, file.partition);
  }
  throw std::invalid_argument("unknown partition mode " + mode);
}

int cmd_solve(const CommonArgs& a) {
  NetworkFile file = load_network_file(a.network_path);
  ScenarioConfig sc = load_scenario(a.scenario_path);
  Partition part = make_partition(file, a.partition);

  const bool stochastic = a.controller != "nominal-mpc";
  HorizonInputs in;
  for (const auto& z : file.network.links()) in.measured[z.id] = z.initial_count;
  in.params = scenario_moments(file.network, sc, 0, a.horizon, stochastic);
  in.epsilon = a.epsilon;
  in.horizon = a.horizon;

  auto diagnostics = infeasibility_precheck(file.network, in);
  if (!diagnostics.empty()) {
    for (const auto& d : diagnostics) std::cerr << "infeasible: " << d << "\n";
    return 4;
  }

  std::vector<AgentProblem> problems = build_all_agents(file.network, part, in);
  fs::create_directories(a.out_dir);

  std::ofstream trace_file;
  SolveOptions opts;
  opts.rho = a.rho;
  opts.tol = a.tol;
  opts.max_iter = a.max_iter;
  opts.parallel = a.parallel;
  if (a.trace) {
    trace_file.open(fs::path(a.out_dir) / "trace.jsonl");
    opts.trace_every = 1;
    opts.trace_sink = [&](const std::string& line) { trace_file << line << "\n"; };
  }

  const auto t0 = std::chrono::steady_clock::now();
  SolveResult res = solve(problems, opts);
  const double wall =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  nlohmann::json stats;
  stats["converged"] = res.stats.converged;
  stats["iterations"] = res.stats.iterations;
  stats["final_primal_residual"] = res.stats.final_residual;
  stats["final_coupling_residual"] = res.stats.final_coupling_residual;
  stats["objective"] = total_objective(problems, res.x);
  stats["wall_seconds"] = wall;
  stats["config"] = {{"network", a.network_path}, {"scenario", a.scenario_path},
                     {"controller", a.controller}, {"rho", a.rho},   {"tol", a.tol},
                     {"max_iter", a.max_iter},     {"horizon", a.horizon},
                     {"epsilon", a.epsilon},       {"seed", a.seed},
                     {"partition", a.partition}};
  if (!res.stats.converged) stats["diagnosis"] = res.stats.diagnosis;
  std::ofstream(fs::path(a.out_dir) / "stats.json") << stats.dump(2) << "\n";

  for (size_t i = 0; i < problems.size(); ++i) {
    nlohmann::json sol;
    sol["agent"] = problems[i].id;
    sol["objective"] = objective_value(problems[i], res.x[i]);
    nlohmann::json vars = nlohmann::json::object();
    for (int c = 0; c < problems[i].layout.dim(); ++c)
      vars[problems[i].layout.describe(c)] = res.x[i][c];
    sol["x"] = std::move(vars);
    std::ofstream(fs::path(a.out_dir) / ("solution_" + problems[i].id + ".json"))
        << sol.dump(2) << "\n";
  }
  if (log_level() > 0)
    std::cerr << "solve: " << (res.stats.converged ? "converged" : "NOT converged")
              << " after " << res.stats.iterations << " iterations (" << wall << " s)\n";
  return res.stats.converged ? 0 : 3;
}

int cmd_simulate(const CommonArgs& a) {
  NetworkFile file = load_network_file(a.network_path);
  ScenarioConfig sc = load_scenario(a.scenario_path);
  Partition part = make_partition(file, a.partition);

  ExperimentConfig cfg;
  cfg.controller = controller_from_name(a.controller);
  cfg.mpc.horizon = a.horizon;
  cfg.mpc.epsilon = a.epsilon;
  cfg.mpc.rho = a.rho;
  cfg.mpc.tol = a.tol;
  cfg.mpc.max_iter = a.max_iter;
  cfg.mpc.parallel = a.parallel;
  cfg.seed = a.seed;

  ExperimentResult result = run_experiment(file.network, part, sc, cfg);

  fs::create_directories(a.out_dir);
  const std::string stem = sc.name + "_" + a.controller;
  std::ofstream csv(fs::path(a.out_dir) / (stem + "_metrics.csv"));
  write_metrics_csv(csv, result);
  std::ofstream(fs::path(a.out_dir) / (stem + "_summary.json"))
      << summary_json(result, sc, cfg, a.network_path, a.scenario_path) << "\n";

  if (log_level() > 0)
    std::cerr << "simulate[" << stem << "]: entered " << result.metrics.entered
              << " exited " << result.metrics.exited << " mean wait "
              << result.metrics.mean_wait_seconds << " s, fallbacks "
              << result.metrics.fallback_steps << "\n";
  return 0;
}

int cmd_bench(const CommonArgs& a, const std::vector<int>& horizons, int repeats) {
  NetworkFile file = load_network_file(a.network_path);
  ScenarioConfig sc = load_scenario(a.scenario_path);
  Partition part = make_partition(file, a.partition);
  const bool stochastic = a.controller != "nominal-mpc";

  fs::create_directories(a.out_dir);
  std::ofstream csv(fs::path(a.out_dir) / "bench.csv");
  csv << "horizon,mode,avg_iterations,max_iterations,avg_wall_s,max_wall_s\n";
  Rng rng(a.seed);
  for (int K : horizons) {
    long iter_sum = 0, iter_max = 0;
    double time_sum = 0, time_max = 0;
    for (int r = 0; r < repeats; ++r) {
      HorizonInputs in;
      for (const auto& z : file.network.links())
        in.measured[z.id] = rng.uniform(0.1, 0.6) * z.capacity;
      in.params = scenario_moments(file.network, sc,
                                   static_cast<int>(rng.uniform(0, sc.control_steps)), K,
                                   stochastic);
      in.epsilon = a.epsilon;
      in.horizon = K;
      std::vector<AgentProblem> problems = build_all_agents(file.network, part, in);
      SolveOptions opts;
      opts.rho = a.rho;
      opts.tol = a.tol;
      opts.max_iter = a.max_iter;
      opts.parallel = a.parallel;
      const auto t0 = std::chrono::steady_clock::now();
      SolveResult res = solve(problems, opts);
      const double wall =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      iter_sum += res.stats.iterations;
      iter_max = std::max(iter_max, res.stats.iterations);
      time_sum += wall;
      time_max = std::max(time_max, wall);
    }
    csv << K << ',' << (stochastic ? "stochastic" : "nominal") << ','
        << iter_sum / std::max(1, repeats) << ',' << iter_max << ','
        << time_sum / std::max(1, repeats) << ',' << time_max << "\n";
    if (log_level() > 0)
      std::cerr << "bench K=" << K << ": avg " << iter_sum / std::max(1, repeats)
                << " iterations\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Distributed stochastic MPC traffic signal control"};
  app.require_subcommand(1);

  CommonArgs solve_args, sim_args, bench_args;
  std::vector<int> horizons{1, 2, 3};
  int repeats = 5;

  CLI::App* solve_cmd = app.add_subcommand("solve", "solve one control horizon");
  add_common(solve_cmd, solve_args, true);
  CLI::App* sim_cmd = app.add_subcommand("simulate", "closed-loop simulation");
  add_common(sim_cmd, sim_args, true);
  CLI::App* bench_cmd = app.add_subcommand("bench", "iteration/time benchmark");
  add_common(bench_cmd, bench_args, true);
  bench_cmd->add_option("--horizons", horizons, "list of K values");
  bench_cmd->add_option("--repeats", repeats, "instances per K");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (solve_cmd->parsed()) return cmd_solve(solve_args);
    if (sim_cmd->parsed()) return cmd_simulate(sim_args);
    if (bench_cmd->parsed()) return cmd_bench(bench_args, horizons, repeats);
  } catch (const std::invalid_argument& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
