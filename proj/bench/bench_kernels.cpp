// Serial reference vs OpenMP kernels: per-tick PSI series and the scenario batch.

#include <benchmark/benchmark.h>

#include <string>

#include "islanding/coherency.hpp"
#include "islanding/harness.hpp"
#include "islanding/psi_series.hpp"

using namespace islanding;

namespace {

const std::string kData = ISLANDING_DATA_DIR;

const grid::NetworkCase& ieee39() {
  static const auto c = grid::load_case_file(kData + "/cases/ieee39.json");
  return c;
}

struct PsiFixture {
  harness::StudyCase sc{ieee39(), 1.0};
  dyn::MachineModel model = dyn::make_machine_model(sc.network, sc.init);
  dyn::SystemTrajectory traj;
  psi::PsiEvaluator ev;

  PsiFixture() {
    const auto spec = harness::load_scenario_file(kData + "/scenarios/table1/s16.json");
    dyn::SimConfig cfg;
    cfg.t_end = spec.t_end;
    traj = dyn::simulate(sc.network, sc.init, model, spec.events, cfg);
    const auto epoch = build_epoch(sc.network, Topology::from_case(sc.network), sc.init.load_admittance);
    ev = psi::make_evaluator(spec.partition->partition, epoch, sc.init.emf, sc.init.delta0);
  }
};

const PsiFixture& psi_fixture() {
  static const PsiFixture f;
  return f;
}

void BM_psi_series_serial(benchmark::State& state) {
  const auto& f = psi_fixture();
  for (auto _ : state) benchmark::DoNotOptimize(psi::psi_series_serial(f.traj, f.model, f.ev));
  state.SetItemsProcessed(state.iterations() * static_cast<long>(f.traj.samples.size()));
}

void BM_psi_series_parallel(benchmark::State& state) {
  const auto& f = psi_fixture();
  for (auto _ : state) benchmark::DoNotOptimize(psi::psi_series_parallel(f.traj, f.model, f.ev));
  state.SetItemsProcessed(state.iterations() * static_cast<long>(f.traj.samples.size()));
}

void run_batch(benchmark::State& state, bool parallel) {
  const auto specs = harness::load_scenario_dir(kData + "/scenarios/table1");
  harness::RunConfig cfg;
  cfg.parallel = parallel;
  for (auto _ : state) benchmark::DoNotOptimize(harness::run_calibration(ieee39(), specs, cfg));
  state.SetItemsProcessed(state.iterations() * static_cast<long>(specs.size()));
}

void BM_calibration_batch_serial(benchmark::State& state) { run_batch(state, false); }
void BM_calibration_batch_parallel(benchmark::State& state) { run_batch(state, true); }

}  // namespace

BENCHMARK(BM_psi_series_serial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_psi_series_parallel)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_calibration_batch_serial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_calibration_batch_parallel)->Unit(benchmark::kMillisecond)->UseRealTime();

BENCHMARK_MAIN();
