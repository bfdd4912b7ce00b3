#pragma once

#include <iosfwd>
#include <string>

#include "smpc/controllers.hpp"

namespace smpc {

enum class ControllerKind { Pretimed, Backpressure, NominalMpc, StochasticMpc };
ControllerKind controller_from_name(const std::string& name);
std::string controller_name(ControllerKind kind);

/// Closed-loop evaluation counters (criteria 1-4) plus the congestion-mode
/// histogram binned at 0.45 / 0.75 / 0.95 of capacity.
struct Metrics {
  double entered = 0.0;
  double exited = 0.0;
  double crossed = 0.0;
  double mean_wait_seconds = 0.0;
  bool wait_defined = true;
  std::array<long, 4> mode_bins{};  // low, medium, high, congested (link-bins)
  long fallback_steps = 0;
  long total_mpc_iterations = 0;
  double arrivals = 0.0;
  double dropped_side = 0.0;
};

struct ExperimentConfig {
  ControllerKind controller = ControllerKind::StochasticMpc;
  MpcOptions mpc;
  double substep_seconds = 10.0;
  uint64_t seed = 1;  // overrides the scenario seed when nonzero
};

struct BinRow {
  double time_seconds = 0.0;
  double entered_cum = 0.0;
  double exited_cum = 0.0;
  double crossed_cum = 0.0;
  double waiting_veh = 0.0;
  double total_count = 0.0;
  double queue_outside = 0.0;
  std::array<int, 4> modes{};
};

struct ExperimentResult {
  Metrics metrics;
  std::vector<BinRow> rows;
};

ExperimentResult run_experiment(const Network& net, const Partition& part,
                                const ScenarioConfig& sc, const ExperimentConfig& cfg);

/// One row per plant substep; byte-identical for identical configs and seeds.
void write_metrics_csv(std::ostream& os, const ExperimentResult& result);
std::string summary_json(const ExperimentResult& result, const ScenarioConfig& sc,
                         const ExperimentConfig& cfg, const std::string& network_path,
                         const std::string& scenario_path);

}  // namespace smpc
