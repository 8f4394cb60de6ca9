#include "islanding/psi_series.hpp"

#include "islanding/error.hpp"

namespace islanding::psi {

namespace {

void gather(const NetworkEpoch& epoch, const std::vector<double>& emf_case, const std::vector<double>& delta_case,
            std::vector<double>& emf, std::vector<double>& delta) {
  emf.clear();
  delta.clear();
  for (auto k : epoch.machine_index) {
    emf.push_back(emf_case[k]);
    delta.push_back(delta_case[k]);
  }
}

}  // namespace

PsiSample PsiEvaluator::evaluate(const NetworkEpoch& epoch, const std::vector<double>& emf_case,
                                 const std::vector<double>& delta_case, double time) const {
  std::vector<double> emf, delta;
  gather(epoch, emf_case, delta_case, emf, delta);
  const auto ks = coh::sync_coefficients(epoch.reduced, emf, delta, time);
  const auto c = coh::normalize_coherency(ks, ref_scale);
  return psi::evaluate(coh::build_ksgm(c, ks.machine_ids, partition), time);
}

PsiEvaluator make_evaluator(GeneratorPartition partition, const NetworkEpoch& epoch,
                            const std::vector<double>& emf_case, const std::vector<double>& delta_case) {
  std::vector<double> emf, delta;
  gather(epoch, emf_case, delta_case, emf, delta);
  const double scale = coh::baseline_scale(coh::sync_coefficients(epoch.reduced, emf, delta));
  if (!(scale > 0.0)) throw InputError("baseline synchronizing coefficients are all zero");
  return {std::move(partition), scale};
}

std::vector<PsiSample> psi_series_serial(const dyn::SystemTrajectory& traj, const dyn::MachineModel& model,
                                         const PsiEvaluator& ev) {
  std::vector<PsiSample> out;
  out.reserve(traj.samples.size());
  for (const auto& s : traj.samples) out.push_back(ev.evaluate(traj.epoch_of(s), model.emf, s.delta, s.t));
  return out;
}

std::vector<PsiSample> psi_series_parallel(const dyn::SystemTrajectory& traj, const dyn::MachineModel& model,
                                           const PsiEvaluator& ev) {
  const auto n = static_cast<long>(traj.samples.size());
  std::vector<PsiSample> out(traj.samples.size());
  // Exceptions may not leave an OpenMP region; capture the first and rethrow.
  std::exception_ptr err;
#pragma omp parallel for schedule(static)
  for (long i = 0; i < n; ++i) {
    try {
      const auto& s = traj.samples[static_cast<std::size_t>(i)];
      out[static_cast<std::size_t>(i)] = ev.evaluate(traj.epoch_of(s), model.emf, s.delta, s.t);
    } catch (...) {
#pragma omp critical
      if (!err) err = std::current_exception();
    }
  }
  if (err) std::rethrow_exception(err);
  return out;
}

std::vector<GrowthPercent> growth_series(const std::vector<PsiSample>& series) {
  std::vector<GrowthPercent> out;
  if (series.empty()) return out;
  out.reserve(series.size());
  for (const auto& s : series) out.push_back(growth_percent(s, series.front()));
  return out;
}

PsiMonitor::PsiMonitor(PsiEvaluator ev, Thresholds th, double confirm)
    : ev_(std::move(ev)), detector_(th, confirm) {}

std::vector<dyn::Event> PsiMonitor::on_tick(const dyn::TickView& tick) {
  samples_.push_back(ev_.evaluate(tick.epoch, tick.model.emf, tick.delta, tick.time));
  if (detector_.signal().fired) return {};
  const auto g = growth_percent(samples_.back(), samples_.front());
  if (auto sig = detector_.push(g); sig && on_signal) return on_signal(*sig, tick);
  return {};
}

}  // namespace islanding::psi
