#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "smpc/network.hpp"
#include "smpc/stochastic.hpp"

namespace smpc {

/// Deterministic uniform generator; a fixed stream independent of standard
/// library distribution internals so runs are reproducible byte for byte.
class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(seed ? seed : 0x9e3779b97f4a7c15ull) {}
  double uniform(double lo, double hi) {
    return lo + next01() * (hi - lo);
  }

 private:
  double next01() {
    // splitmix64 stream mapped to [0, 1).
    state_ += 0x9e3779b97f4a7c15ull;
    uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    z ^= z >> 31;
    return static_cast<double>(z >> 11) * 0x1.0p-53;
  }
  uint64_t state_;
};

/// Demand bands, turning table and perturbation ranges driving one experiment.
struct ScenarioConfig {
  std::string name;
  std::vector<double> demand_bands_vph;  // nominal 3-lane source demand per band
  int band_minutes = 20;
  double demand_scaling = 1.0;
  double five_lane_factor = 1.25;
  std::vector<LinkId> side_inflow_links;
  double side_inflow_lo_vph = 0.0;
  double side_inflow_hi_vph = 0.0;
  // Rows keyed by (upstream index + downstream index) mod 4: left, right, straight.
  std::array<std::array<double, 3>, 4> turning_rows{};
  double delta_turn = 0.1;             // half-width of the turning-ratio noise
  double delta_source_vph = 350.0;     // half-width of source demand noise
  double delta_other_vph = 50.0;       // half-width of other exogenous noise
  int control_steps = 120;
  uint64_t seed = 1;

  double band_demand_vph(int minute) const;
};

ScenarioConfig load_scenario(const std::string& path);
ScenarioConfig parse_scenario_json(const std::string& text);

/// How one link's outflow splits into movements: movement m covers a run of
/// targets with fixed lane shares; one movement absorbs the rest of the mass.
struct LinkTurnModel {
  struct Target {
    LinkId link;
    int movement = 0;     // position in the movement list
    double share = 1.0;   // lane share within the movement's road
  };
  std::vector<Target> targets;
  int movements = 1;
  int absorber = 0;                    // movement index absorbing 1 - others
  std::vector<double> nominal_weight;  // per movement, sums to 1
  std::vector<int> delta_kind;         // per movement: 0 none, 1 left, 2 right
};

LinkTurnModel build_turn_model(const Network& net, const ScenarioConfig& sc, const LinkId& z);

/// Ground-truth parameters for one minute.
struct RealizedParams {
  std::map<LinkId, double> exo_veh;  // vehicles per control step
  std::map<std::pair<LinkId, LinkId>, double> turn;
  std::map<LinkId, std::array<double, 3>> movement_weights;  // realized per link
};

/// Draws delta terms per link in id order; deterministic given the generator
/// state. Realized ratios are clamped at zero and renormalized.
RealizedParams sample_parameters(const Network& net, const ScenarioConfig& sc, int minute,
                                 Rng& rng);

/// Controller-visible moments for the horizon starting at `minute`; nominal
/// mode zeroes every variance.
ParamSet scenario_moments(const Network& net, const ScenarioConfig& sc, int minute,
                          int horizon, bool stochastic);

/// First-cycle control decisions: per-phase splits and per-link green seconds.
struct SignalPlan {
  std::map<PhaseId, double> splits;
  std::map<LinkId, double> greens;
  bool fallback = false;  // true when a solver failure reused the previous plan
};

struct PlantState {
  std::map<LinkId, double> count;
  std::map<LinkId, double> source_queue;
  double entered = 0.0;
  double exited = 0.0;
  double crossed = 0.0;
  double waiting_veh_seconds = 0.0;
  double arrivals = 0.0;        // demand offered at the sources
  double dropped_side = 0.0;    // side inflow lost to full links
};

PlantState initial_plant(const Network& net);

struct FlowRecord {
  std::map<LinkId, double> outflow;
  double entered = 0.0;
  double exited = 0.0;
  double crossed = 0.0;
};

/// Advances the plant by dt seconds under the plan and the realized
/// parameters: outflow = min(saturation * green * dt/T, queue, prorated
/// downstream space); conservation is exact and counts never exceed capacity.
FlowRecord step_plant(PlantState& state, const Network& net, const SignalPlan& plan,
                      const RealizedParams& realized, double dt_seconds);

}  // namespace smpc
