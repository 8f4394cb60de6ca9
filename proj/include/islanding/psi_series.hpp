#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "islanding/dynamics.hpp"
#include "islanding/psi.hpp"

namespace islanding::psi {

/// Per-tick PSI evaluation with a frozen partition and normalization scale.
struct PsiEvaluator {
  GeneratorPartition partition;
  double ref_scale = 1.0;

  /// delta is in case order; only the epoch's running machines take part.
  PsiSample evaluate(const NetworkEpoch& epoch, const std::vector<double>& emf_case,
                     const std::vector<double>& delta_case, double time) const;
};

/// Evaluator whose scale is the largest |k_pq| at the given (baseline) state.
PsiEvaluator make_evaluator(GeneratorPartition partition, const NetworkEpoch& epoch,
                            const std::vector<double>& emf_case, const std::vector<double>& delta_case);

/// Reference implementation: one tick after another.
std::vector<PsiSample> psi_series_serial(const dyn::SystemTrajectory& traj, const dyn::MachineModel& model,
                                         const PsiEvaluator& ev);
/// Same result, ticks evaluated concurrently (each tick is independent).
std::vector<PsiSample> psi_series_parallel(const dyn::SystemTrajectory& traj, const dyn::MachineModel& model,
                                           const PsiEvaluator& ev);

/// Growth of every sample against the first one.
std::vector<GrowthPercent> growth_series(const std::vector<PsiSample>& series);

/// Online PSI + detector, evaluated at every monitoring tick. The first tick
/// it sees is the baseline.
class PsiMonitor : public dyn::Monitor {
 public:
  PsiMonitor(PsiEvaluator ev, Thresholds th, double confirm);
  std::vector<dyn::Event> on_tick(const dyn::TickView& tick) override;

  /// Called once, at the tick where the signal fires; may return events.
  std::function<std::vector<dyn::Event>(const IslandingSignal&, const dyn::TickView&)> on_signal;

  const std::vector<PsiSample>& samples() const { return samples_; }
  const IslandingSignal& signal() const { return detector_.signal(); }

 private:
  PsiEvaluator ev_;
  Detector detector_;
  std::vector<PsiSample> samples_;
};

}  // namespace islanding::psi
