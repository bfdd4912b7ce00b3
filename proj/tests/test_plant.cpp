#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "fixtures.hpp"
#include "smpc/plant.hpp"

using namespace smpc;
using namespace smpc::testing;

namespace {

ScenarioConfig test_scenario(double scaling = 1.0) {
  ScenarioConfig sc;
  sc.name = "test";
  sc.demand_bands_vph = {1000, 1250, 1150, 1000, 900, 800};
  sc.band_minutes = 20;
  sc.demand_scaling = scaling;
  sc.turning_rows = {{{0.2, 0.2, 0.6}, {0.15, 0.15, 0.7}, {0.15, 0.2, 0.65}, {0.2, 0.15, 0.65}}};
  sc.control_steps = 120;
  sc.seed = 11;
  return sc;
}

ScenarioConfig zero_noise_scenario() {
  ScenarioConfig sc = test_scenario();
  sc.delta_turn = 0.0;
  sc.delta_source_vph = 0.0;
  sc.delta_other_vph = 0.0;
  return sc;
}

}  // namespace

TEST_CASE("demand bands") {
  ScenarioConfig sc = test_scenario();
  CHECK(sc.band_demand_vph(0) == 1000);
  CHECK(sc.band_demand_vph(25) == 1250);  // minutes 21-40 band
  CHECK(sc.band_demand_vph(119) == 800);
  CHECK(sc.band_demand_vph(500) == 800);  // clamped past the horizon
}

TEST_CASE("zero perturbation reproduces the nominal turning row") {
  NetworkFile file = load_fig();
  ScenarioConfig sc = zero_noise_scenario();
  Rng rng(1);
  RealizedParams p = sample_parameters(file.network, sc, 0, rng);

  // Link 1 runs O2(0) -> J2(2): row (0+2) mod 4 = 2 -> (0.15, 0.2, 0.65).
  const auto& w = p.movement_weights.at("1");
  CHECK(w[0] == doctest::Approx(0.15));  // left
  CHECK(w[1] == doctest::Approx(0.65));  // straight (absorber)
  CHECK(w[2] == doctest::Approx(0.2));   // right

  // Per-target ratios split two-link roads by lane share and sum to one.
  double sum = 0.0;
  for (const auto& z : file.network.downstream_neighbors("1")) sum += p.turn.at({"1", z});
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
  // Road J2->J4 is links 13 (4 lanes) and 14 (1 lane): straight split 4:1.
  CHECK(p.turn.at({"1", "13"}) == doctest::Approx(0.65 * 0.8));
  CHECK(p.turn.at({"1", "14"}) == doctest::Approx(0.65 * 0.2));
}

TEST_CASE("perturbed ratios stay normalized and the absorber soaks the noise") {
  NetworkFile file = load_fig();
  ScenarioConfig sc = test_scenario();
  Rng rng(77);
  for (int minute = 0; minute < 50; ++minute) {
    RealizedParams p = sample_parameters(file.network, sc, minute, rng);
    for (const auto& link : file.network.links()) {
      if (link.turns_to.empty()) continue;
      double sum = 0.0;
      for (const auto& z : link.turns_to) {
        CHECK(p.turn.at({link.id, z}) >= 0.0);
        sum += p.turn.at({link.id, z});
      }
      CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
    }
    const auto& w = p.movement_weights.at("1");
    CHECK(w[0] >= 0.05 - 1e-12);
    CHECK(w[0] <= 0.25 + 1e-12);
    CHECK(w[0] + w[1] + w[2] == doctest::Approx(1.0));
  }
}

TEST_CASE("controller moments match the sampling model") {
  // Empirical means/variances over many draws against scenario_moments.
  NetworkFile file = load_fig();
  ScenarioConfig sc = test_scenario();
  ParamSet moments = scenario_moments(file.network, sc, 30, 1, true);

  Rng rng(5);
  const int draws = 20000;
  std::map<LinkId, std::pair<double, double>> exo_acc;   // sum, sumsq
  std::map<std::pair<LinkId, LinkId>, std::pair<double, double>> turn_acc;
  for (int s = 0; s < draws; ++s) {
    RealizedParams p = sample_parameters(file.network, sc, 30, rng);
    for (const auto& [z, v] : p.exo_veh) {
      exo_acc[z].first += v;
      exo_acc[z].second += v * v;
    }
    for (const auto& [key, v] : p.turn) {
      turn_acc[key].first += v;
      turn_acc[key].second += v * v;
    }
  }
  for (const auto& [z, acc] : exo_acc) {
    const double mean = acc.first / draws;
    const double var = acc.second / draws - mean * mean;
    const auto& rs = moments.exo(z, 0);
    CHECK(mean == doctest::Approx(rs.mean).epsilon(0.05).scale(1.0));
    CHECK(var == doctest::Approx(rs.variance).epsilon(0.1).scale(0.01));
  }
  for (const auto& [key, acc] : turn_acc) {
    const double mean = acc.first / draws;
    const double var = acc.second / draws - mean * mean;
    const auto& rs = moments.turn(key.first, key.second, 0);
    CHECK(mean == doctest::Approx(rs.mean).epsilon(0.03).scale(0.1));
    CHECK(var == doctest::Approx(rs.variance).epsilon(0.15).scale(0.001));
  }
}

TEST_CASE("plant outflow arithmetic") {
  Network net = make_single_junction();
  ScenarioConfig sc = zero_noise_scenario();
  PlantState state = initial_plant(net);
  state.count["in1"] = 100.0;
  RealizedParams realized;
  for (const auto& z : net.links()) realized.exo_veh[z.id] = 0.0;
  realized.turn[{"in1", "out"}] = 1.0;
  realized.turn[{"in2", "out"}] = 1.0;

  SignalPlan plan;
  plan.greens["in1"] = 60.0;  // S * g * dt/T = 1.65 * 60 / 6 = 16.5 in 10 s
  plan.greens["in2"] = 0.0;
  FlowRecord rec = step_plant(state, net, plan, realized, 10.0);
  CHECK(rec.outflow["in1"] == doctest::Approx(16.5));
  CHECK(rec.outflow["in2"] == 0.0);
  CHECK(state.count["in1"] == doctest::Approx(83.5));

  // Empty link: zero outflow regardless of green.
  state.count["in1"] = 0.0;
  rec = step_plant(state, net, plan, realized, 10.0);
  CHECK(rec.outflow["in1"] == 0.0);
}

TEST_CASE("full downstream link blocks its inflows") {
  Network net = make_single_junction();
  PlantState state = initial_plant(net);
  state.count["in1"] = 50.0;
  state.count["out"] = net.link("out").capacity;  // full
  RealizedParams realized;
  for (const auto& z : net.links()) realized.exo_veh[z.id] = 0.0;
  realized.turn[{"in1", "out"}] = 1.0;
  realized.turn[{"in2", "out"}] = 1.0;
  SignalPlan plan;
  plan.greens["in1"] = 60.0;
  plan.greens["in2"] = 0.0;
  FlowRecord rec = step_plant(state, net, plan, realized, 10.0);
  CHECK(rec.outflow["in1"] == 0.0);
  CHECK(state.count["in1"] == 50.0);
  for (const auto& link : net.links())
    CHECK(state.count[link.id] <= link.capacity + 1e-12);
}

TEST_CASE("conservation is exact over a run") {
  NetworkFile file = load_fig();
  ScenarioConfig sc = test_scenario(1.4);
  Rng rng(123);
  PlantState state = initial_plant(file.network);
  double initial_total = 0.0;
  for (const auto& [z, c] : state.count) initial_total += c;

  SignalPlan plan;  // modest fixed greens
  for (const auto& link : file.network.links())
    if (file.network.internal(link.downstream)) plan.greens[link.id] = 14.0;

  for (int t = 0; t < 40; ++t) {
    RealizedParams realized = sample_parameters(file.network, sc, t, rng);
    for (int sub = 0; sub < 6; ++sub) {
      step_plant(state, file.network, plan, realized, 10.0);
      double total = 0.0;
      for (const auto& [z, c] : state.count) {
        total += c;
        CHECK(c <= file.network.link(z).capacity + 1e-9);
        CHECK(c >= -1e-9);
      }
      CHECK(state.entered - state.exited ==
            doctest::Approx(total - initial_total).epsilon(1e-9).scale(1000));
    }
  }
}

TEST_CASE("fixed seed reproduces the draws bitwise") {
  NetworkFile file = load_fig();
  ScenarioConfig sc = test_scenario();
  Rng a(42), b(42);
  for (int minute = 0; minute < 5; ++minute) {
    RealizedParams pa = sample_parameters(file.network, sc, minute, a);
    RealizedParams pb = sample_parameters(file.network, sc, minute, b);
    CHECK(pa.exo_veh == pb.exo_veh);
    CHECK(pa.turn == pb.turn);
  }
}

TEST_CASE("scenario JSON round trip") {
  ScenarioConfig sc = load_scenario(std::string(SMPC_DATA_DIR) + "/scenario_high.json");
  CHECK(sc.demand_scaling == doctest::Approx(1.40));
  CHECK(sc.band_demand_vph(25) == doctest::Approx(1250 * 1.40));
  CHECK(sc.side_inflow_lo_vph == 900);
  CHECK(sc.turning_rows[0][0] == doctest::Approx(0.2));
  CHECK(sc.delta_source_vph == 350.0);
}
