#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "islanding/error.hpp"
#include "islanding/executor.hpp"
#include "islanding/harness.hpp"
#include "support.hpp"

using namespace islanding;
using testing_support::data_path;
using testing_support::ieee39;

namespace {

const coh::PartitionOverride& paper_partition() {
  static const auto p = coh::load_partition_override(data_path("partitions/ieee39_paper.json"));
  return p;
}

// Thresholds low enough that the stressed analogs always raise the signal;
// these tests exercise the executor, not the calibration.
const psi::Thresholds kEager{1.0, 10.0, 0.0};

void check_conservation(const exec::IslandOutcome& o) {
  CHECK(o.served_mw + o.lost_mw + o.deenergized_mw == doctest::Approx(o.total_mw).epsilon(1e-12));
  CHECK(o.served_mw <= o.total_mw + 1e-9);
}

struct Run {
  harness::StudyCase sc;
  dyn::MachineModel model;
  exec::ExecutionInputs in;
  Run(const harness::ScenarioSpec& spec, const psi::Thresholds& th)
      : sc(ieee39(), spec.load_scale), model(dyn::make_machine_model(sc.network, sc.init)),
        in{.network = sc.network,
           .init = sc.init,
           .model = model,
           .events = spec.events,
           .cfg = {1e-3, spec.t_end, 10},
           .distance = prot::default_distance_settings(sc.network),
           .evaluator = {},
           .thresholds = th,
           .confirm = 0.04,
           .plan = exec::derive_plan(paper_partition().partition, sc.network, paper_partition().bus_regions),
           .rrdot_t_slope = 0.05,
           .rrdot_threshold_fraction = 0.5} {
    const auto epoch = build_epoch(sc.network, Topology::from_case(sc.network), sc.init.load_admittance);
    in.evaluator = psi::make_evaluator(paper_partition().partition, epoch, sc.init.emf, sc.init.delta0);
  }
};

}  // namespace

TEST_CASE("plan on the paper's three-group partition is the four tie lines") {
  const auto plan = exec::derive_plan(paper_partition().partition, ieee39(), paper_partition().bus_regions);
  auto b = plan.boundary_branches;
  std::sort(b.begin(), b.end());
  CHECK(b == std::vector<std::string>{"1-39", "14-15", "16-17", "3-4"});
}

TEST_CASE("plan on a two-bus system with two singleton groups") {
  const auto c = testing_support::smib();
  const auto plan = exec::derive_plan(GeneratorPartition{{{"G1"}, {"G2"}}}, c);
  CHECK(plan.boundary_branches == std::vector<std::string>{"1-2"});
  CHECK(plan.bus_group == std::vector<std::size_t>{0, 1});
}

TEST_CASE("plan preconditions") {
  const auto& c = ieee39();
  GeneratorPartition all{{{"G30", "G31", "G32", "G33", "G34", "G35", "G36", "G37", "G38", "G39"}}};
  CHECK_THROWS_AS(exec::derive_plan(all, c), InputError);
  GeneratorPartition missing{{{"G30"}, {"G31"}}};
  CHECK_THROWS_AS(exec::derive_plan(missing, c), InputError);
  auto regions = *paper_partition().bus_regions;
  regions[0].pop_back();
  CHECK_THROWS_AS(exec::derive_plan(paper_partition().partition, c, regions), InputError);
}

TEST_CASE("nearest-machine regions give a cutset separating every group") {
  const auto& c = ieee39();
  const auto plan = exec::derive_plan(paper_partition().partition, c);
  auto topo = Topology::from_case(c);
  for (const auto& b : plan.boundary_branches) topo.branch_in[c.branch_index(b)] = false;
  const auto comp = topology_components(c, topo);
  const auto group = paper_partition().partition.assignment({"G30", "G31", "G32", "G33", "G34", "G35", "G36", "G37",
                                                             "G38", "G39"});
  for (std::size_t i = 0; i < c.machines.size(); ++i) {
    for (std::size_t j = 0; j < c.machines.size(); ++j) {
      if (group[i] == group[j]) continue;
      CHECK(comp[c.bus_index(c.machines[i].bus)] != comp[c.bus_index(c.machines[j].bus)]);
    }
  }
}

TEST_CASE("controlled islanding on the scenario B analog") {
  const auto spec = harness::load_scenario_file(data_path("scenarios/analogs/scenario_b.json"));
  Run run(spec, kEager);
  const auto res = exec::execute_islanding(run.in, true);
  REQUIRE(res.signal.fired);
  REQUIRE(res.split_time);
  CHECK(res.armed.size() == 4);

  // Every armed relay operated within 5 s of arming.
  for (const auto& b : res.armed) {
    const auto& log = res.trajectory.event_log;
    auto it = std::find_if(log.begin(), log.end(), [&](const auto& e) { return e.target == b; });
    REQUIRE(it != log.end());
    CHECK(it->time - res.signal.time <= 5.0);
  }
  CHECK(std::any_of(res.outcome.islands.begin(), res.outcome.islands.end(), [](const auto& i) { return i.survived; }));
  check_conservation(res.outcome);

  // Islands are block-disjoint: no closed branch spans two islands.
  const auto& c = run.sc.network;
  const auto& epoch = res.trajectory.epoch_of(res.trajectory.samples.back());
  for (std::size_t b = 0; b < c.branches.size(); ++b) {
    if (!epoch.topology.branch_in[b]) continue;
    CHECK(epoch.island[c.bus_index(c.branches[b].from_bus)] == epoch.island[c.bus_index(c.branches[b].to_bus)]);
  }
  // Merged trajectory keeps the tick grid to t_end.
  CHECK(res.trajectory.samples.back().t == doctest::Approx(spec.t_end));
  for (std::size_t k = 1; k < res.trajectory.samples.size(); ++k) {
    CHECK(res.trajectory.samples[k].t - res.trajectory.samples[k - 1].t == doctest::Approx(0.01));
  }

  // Serial continuation is the reference for the parallel one.
  const auto serial = exec::execute_islanding(run.in, false);
  REQUIRE(serial.trajectory.samples.size() == res.trajectory.samples.size());
  for (std::size_t k = 0; k < serial.trajectory.samples.size(); ++k) {
    CHECK(serial.trajectory.samples[k].delta == res.trajectory.samples[k].delta);
  }
  CHECK(serial.trajectory.event_log == res.trajectory.event_log);
}

TEST_CASE("a boundary line already open at the signal is not armed") {
  const auto spec = harness::load_scenario_file(data_path("scenarios/analogs/scenario_a_13-14.json"));
  Run run(spec, kEager);
  const auto res = exec::execute_islanding(run.in, true);
  REQUIRE(res.signal.fired);
  CHECK(std::find(res.armed.begin(), res.armed.end(), "3-4") == res.armed.end());
  CHECK(res.armed.size() == 3);
  check_conservation(res.outcome);
}

TEST_CASE("without a signal the executor changes nothing") {
  const auto spec = harness::load_scenario_file(data_path("scenarios/table1/s01.json"));
  Run run(spec, {1e9, 1e9, 1e9});
  const auto res = exec::execute_islanding(run.in, true);
  CHECK_FALSE(res.signal.fired);
  CHECK_FALSE(res.split_time);
  prot::DistanceProtection dist(run.sc.network, run.in.distance);
  const auto plain = dyn::simulate(run.sc.network, run.sc.init, run.model, spec.events, run.in.cfg, {&dist});
  REQUIRE(plain.samples.size() == res.trajectory.samples.size());
  for (std::size_t k = 0; k < plain.samples.size(); ++k) {
    CHECK(plain.samples[k].delta == res.trajectory.samples[k].delta);
    CHECK(plain.samples[k].omega == res.trajectory.samples[k].omega);
  }
  CHECK(plain.event_log == res.trajectory.event_log);
  CHECK(res.outcome.served_mw == doctest::Approx(res.outcome.total_mw));
}

TEST_CASE("outcome accounting") {
  const auto& c = ieee39();
  harness::StudyCase sc(c, 1.0);
  const auto model = dyn::make_machine_model(sc.network, sc.init);
  dyn::SimConfig cfg;
  cfg.t_end = 0.2;
  // G30's radial tie opened: G30 runs alone on bus 30; bus 4's load is shed.
  const auto traj = dyn::simulate(sc.network, sc.init, model,
                                  {dyn::Event::trip_branch(0.1, "2-30"), dyn::Event::trip_load(0.1, 4)}, cfg);
  const auto o = exec::assess_outcome(sc.network, model, traj);
  CHECK(o.islands.size() == 2);
  CHECK(o.lost_mw == doctest::Approx(c.buses[c.bus_index(4)].load_p * c.base_mva));
  check_conservation(o);

  const auto diverged = exec::assess_outcome(sc.network, model, traj, {"G31"});
  CHECK(diverged.served_mw == 0.0);
  CHECK(diverged.islands[0].diverged);
  CHECK_FALSE(diverged.islands[1].diverged);
}

TEST_CASE("load-loss comparison") {
  exec::IslandOutcome a;
  a.case_name = "x";
  a.total_mw = 1000;
  a.served_mw = 600;
  a.lost_mw = 400;
  exec::IslandOutcome b = a;
  b.served_mw = 0;
  b.lost_mw = 1000;
  const auto same = exec::compare_load_loss(a, a);
  CHECK(same.saving_mw == 0.0);
  const auto r = exec::compare_load_loss(a, b);
  CHECK(r.saving_mw == doctest::Approx(600));
  CHECK(r.saving_fraction == doctest::Approx(0.6));
  b.case_name = "y";
  CHECK_THROWS_AS(exec::compare_load_loss(a, b), InputError);
  b.case_name = "x";
  b.total_mw = 900;
  CHECK_THROWS_AS(exec::compare_load_loss(a, b), InputError);
}
