#include "islanding/executor.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <map>
#include <numbers>
#include <queue>
#include <tuple>

#include "islanding/error.hpp"

namespace islanding::exec {

namespace {

constexpr std::size_t kNoGroup = std::numeric_limits<std::size_t>::max();

std::vector<std::size_t> regions_from_lists(const grid::NetworkCase& c, const std::vector<std::vector<int>>& lists,
                                            std::size_t u) {
  if (lists.size() != u) throw InputError("bus regions: one list per group expected");
  std::vector<std::size_t> group(c.buses.size(), kNoGroup);
  for (std::size_t g = 0; g < u; ++g) {
    for (int bus : lists[g]) {
      const auto i = c.find_bus(bus);
      if (!i) throw InputError("bus regions: unknown bus " + std::to_string(bus));
      if (group[*i] != kNoGroup) throw InputError("bus regions: bus " + std::to_string(bus) + " listed twice");
      group[*i] = g;
    }
  }
  for (std::size_t i = 0; i < group.size(); ++i) {
    if (group[i] == kNoGroup) throw InputError("bus regions: bus " + std::to_string(c.buses[i].id) + " unassigned");
  }
  return group;
}

// Multi-source Dijkstra on |z|; the heap key (distance, group, bus) makes ties
// resolve towards the lower group deterministically.
std::vector<std::size_t> nearest_machine_regions(const grid::NetworkCase& c, const GeneratorPartition& part) {
  const std::size_t n = c.buses.size();
  std::vector<std::vector<std::pair<std::size_t, double>>> adj(n);
  for (const auto& br : c.branches) {
    if (br.status != grid::BranchStatus::in_service) continue;
    const auto f = c.bus_index(br.from_bus), t = c.bus_index(br.to_bus);
    const double w = std::abs(br.series_impedance());
    adj[f].push_back({t, w});
    adj[t].push_back({f, w});
  }
  using Key = std::tuple<double, std::size_t, std::size_t>;
  std::priority_queue<Key, std::vector<Key>, std::greater<>> heap;
  for (std::size_t g = 0; g < part.u(); ++g) {
    for (const auto& id : part.groups[g]) heap.push({0.0, g, c.bus_index(c.machines[c.machine_index(id)].bus)});
  }
  std::vector<std::size_t> group(n, kNoGroup);
  while (!heap.empty()) {
    const auto [d, g, i] = heap.top();
    heap.pop();
    if (group[i] != kNoGroup) continue;
    group[i] = g;
    for (const auto& [j, w] : adj[i]) {
      if (group[j] == kNoGroup) heap.push({d + w, g, j});
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (group[i] == kNoGroup) {
      throw InputError("partition leaves bus " + std::to_string(c.buses[i].id) + " unreachable from every group");
    }
  }
  return group;
}

std::vector<std::string> case_machine_ids(const grid::NetworkCase& c) {
  std::vector<std::string> ids;
  for (const auto& m : c.machines) ids.push_back(m.id);
  return ids;
}

// Bus whose island owns an event target, or nothing for an unknown target.
std::optional<std::size_t> event_bus(const grid::NetworkCase& c, const dyn::Event& e) {
  switch (e.kind) {
    case dyn::EventKind::apply_fault:
    case dyn::EventKind::clear_fault:
    case dyn::EventKind::trip_branch:
      if (auto b = c.find_branch(e.target)) return c.bus_index(c.branches[*b].from_bus);
      return std::nullopt;
    case dyn::EventKind::trip_machine:
      if (auto k = c.find_machine(e.target)) return c.bus_index(c.machines[*k].bus);
      return std::nullopt;
    case dyn::EventKind::trip_load:
      try {
        return c.find_bus(std::stoi(e.target));
      } catch (const std::exception&) {
        return std::nullopt;
      }
  }
  return std::nullopt;
}

// PSI detection arms the boundary R-Rdot relays,
// and the run stops once every armed relay has operated.
class Controller : public dyn::Monitor {
 public:
  Controller(const grid::NetworkCase& c, psi::PsiMonitor psi_mon, std::vector<prot::RRdotRelaySetting> rr)
      : case_(c), psi_(std::move(psi_mon)), rr_(c, std::move(rr)) {
    psi_.on_signal = [this](const psi::IslandingSignal&, const dyn::TickView& tick) {
      for (const auto& s : rr_.settings()) {
        if (tick.epoch.topology.branch_in[case_.branch_index(s.branch)]) armed_.push_back(s.branch);
      }
      rr_.arm_all();  // relays on open branches count as done immediately
      return std::vector<dyn::Event>{};
    };
  }

  std::vector<dyn::Event> on_tick(const dyn::TickView& tick) override {
    auto out = psi_.on_tick(tick);
    auto trips = rr_.on_tick(tick);
    out.insert(out.end(), trips.begin(), trips.end());
    return out;
  }

  bool stop_requested() const override { return psi_.signal().fired && rr_.all_done(); }

  const psi::PsiMonitor& psi() const { return psi_; }
  const std::vector<std::string>& armed() const { return armed_; }

 private:
  const grid::NetworkCase& case_;
  psi::PsiMonitor psi_;
  prot::RRdotProtection rr_;
  std::vector<std::string> armed_;
};

struct IslandRun {
  std::vector<std::size_t> machines;  // case indices
  std::vector<bool> bus_in;
  dyn::SystemTrajectory traj;
  bool diverged = false;
};

void run_island(const ExecutionInputs& in, const dyn::Sample& last, const Topology& topo, double ts,
                IslandRun& island) {
  const auto& c = in.network;
  Topology t = topo;
  for (std::size_t k = 0; k < c.machines.size(); ++k) {
    if (std::find(island.machines.begin(), island.machines.end(), k) == island.machines.end()) {
      t.machine_in[k] = false;
    }
  }
  std::erase_if(t.faults, [&](const ActiveFault& f) {
    return !island.bus_in[c.bus_index(c.branches[f.branch].from_bus)];
  });

  std::vector<dyn::MachineState> state(c.machines.size());
  for (std::size_t k = 0; k < state.size(); ++k) state[k] = {last.delta[k], last.omega[k]};

  dyn::Simulator sim(c, in.init, in.model, in.cfg, dyn::InitialCondition{ts, std::move(state), std::move(t)});
  for (const auto& e : in.events) {
    if (e.time <= ts + 1e-9 * in.cfg.dt) continue;
    const auto bus = event_bus(c, e);
    if (bus && island.bus_in[*bus]) sim.schedule(e);
  }
  // Distance timers restart at the split; island-internal trips are still modelled.
  prot::DistanceProtection dist(c, in.distance);
  sim.add_monitor(&dist);
  try {
    island.traj = sim.run();
  } catch (const DivergenceError&) {
    island.traj = sim.recorded();
    island.diverged = true;
  }
}

// Replays the per-island histories onto one trajectory over the full case.
dyn::SystemTrajectory merge_islands(const ExecutionInputs& in, dyn::SystemTrajectory phase1, const Topology& topo_ts,
                                    const std::vector<IslandRun>& islands) {
  const auto& c = in.network;
  auto out = std::move(phase1);
  const dyn::Sample held = out.samples.back();

  std::size_t longest = 0;
  for (const auto& isl : islands) longest = std::max(longest, isl.traj.samples.size());

  std::map<std::vector<std::size_t>, std::size_t> epoch_cache;
  std::vector<std::size_t> key(islands.size());
  // Index 0 of every island run duplicates the phase-1 sample at the split.
  for (std::size_t s = 1; s < longest; ++s) {
    dyn::Sample merged = held;
    for (std::size_t k = 0; k < islands.size(); ++k) {
      const auto& tr = islands[k].traj;
      const auto& src = tr.samples[std::min(s, tr.samples.size() - 1)];
      key[k] = src.epoch;
      if (s < tr.samples.size()) merged.t = src.t;
      for (auto m : islands[k].machines) {
        merged.delta[m] = src.delta[m];
        merged.omega[m] = src.omega[m];
      }
    }
    auto it = epoch_cache.find(key);
    if (it == epoch_cache.end()) {
      Topology t = topo_ts;
      t.faults.clear();
      for (std::size_t k = 0; k < islands.size(); ++k) {
        const auto& it_topo = islands[k].traj.epochs[key[k]].epoch->topology;
        for (std::size_t b = 0; b < c.branches.size(); ++b) t.branch_in[b] = t.branch_in[b] && it_topo.branch_in[b];
        for (std::size_t i = 0; i < c.buses.size(); ++i) t.load_in[i] = t.load_in[i] && it_topo.load_in[i];
        for (auto m : islands[k].machines) t.machine_in[m] = it_topo.machine_in[m];
        for (const auto& f : it_topo.faults) t.faults.push_back(f);
      }
      auto epoch = std::make_shared<const NetworkEpoch>(build_epoch(c, t, in.init.load_admittance));
      out.epochs.push_back({merged.t, std::move(epoch)});
      it = epoch_cache.emplace(key, out.epochs.size() - 1).first;
    }
    merged.epoch = it->second;
    out.samples.push_back(std::move(merged));
  }

  std::vector<dyn::Event> later;
  for (const auto& isl : islands) later.insert(later.end(), isl.traj.event_log.begin(), isl.traj.event_log.end());
  std::stable_sort(later.begin(), later.end(), [](const auto& a, const auto& b) { return a.time < b.time; });
  out.event_log.insert(out.event_log.end(), later.begin(), later.end());
  out.stopped_early = false;
  return out;
}

}  // namespace

IslandingPlan derive_plan(const GeneratorPartition& partition, const grid::NetworkCase& c,
                          const std::optional<std::vector<std::vector<int>>>& bus_regions) {
  if (partition.u() < 2) throw InputError("islanding plan needs at least two coherent groups");
  partition.assignment(case_machine_ids(c));  // validates the cover

  IslandingPlan plan;
  plan.bus_group = bus_regions ? regions_from_lists(c, *bus_regions, partition.u())
                               : nearest_machine_regions(c, partition);
  for (const auto& br : c.branches) {
    if (br.status != grid::BranchStatus::in_service) continue;
    if (plan.bus_group[c.bus_index(br.from_bus)] != plan.bus_group[c.bus_index(br.to_bus)]) {
      plan.boundary_branches.push_back(br.id);
    }
  }
  return plan;
}

IslandOutcome assess_outcome(const grid::NetworkCase& c, const dyn::MachineModel& model,
                             const dyn::SystemTrajectory& traj, const std::vector<std::string>& diverged) {
  if (traj.samples.empty()) throw InputError("assess_outcome: empty trajectory");
  const auto& last = traj.samples.back();
  const auto& epoch = traj.epoch_of(last);
  const auto& topo = epoch.topology;

  IslandOutcome out;
  out.case_name = c.name;
  out.total_mw = c.total_load_p() * c.base_mva;

  // Islands numbered by their lowest bus (case order).
  std::map<int, std::size_t> label_to_island;
  std::vector<std::size_t> island_of_bus(c.buses.size(), kNoGroup);
  for (std::size_t i = 0; i < c.buses.size(); ++i) {
    if (!epoch.energized[i]) continue;
    auto [it, fresh] = label_to_island.emplace(epoch.island[i], out.islands.size());
    if (fresh) {
      Island isl;
      isl.id = static_cast<int>(out.islands.size()) + 1;
      out.islands.push_back(isl);
    }
    island_of_bus[i] = it->second;
    auto& isl = out.islands[it->second];
    isl.buses.push_back(c.buses[i].id);
    if (topo.load_in[i]) isl.load_mw += c.buses[i].load_p * c.base_mva;
  }

  for (auto& isl : out.islands) {
    double m_sum = 0.0, w_sum = 0.0, d_sum = 0.0;
    std::vector<std::size_t> members;
    for (std::size_t k = 0; k < c.machines.size(); ++k) {
      if (!topo.machine_in[k]) continue;
      if (island_of_bus[c.bus_index(c.machines[k].bus)] != static_cast<std::size_t>(isl.id - 1)) continue;
      members.push_back(k);
      isl.machines.push_back(c.machines[k].id);
      if (std::find(diverged.begin(), diverged.end(), c.machines[k].id) != diverged.end()) isl.diverged = true;
      m_sum += model.inertia[k];
      w_sum += model.inertia[k] * last.omega[k];
      d_sum += model.inertia[k] * last.delta[k];
    }
    const double w_coi = w_sum / m_sum, d_coi = d_sum / m_sum;
    bool slipped = false;
    for (auto k : members) slipped = slipped || std::abs(last.delta[k] - d_coi) > std::numbers::pi;
    isl.survived = !isl.diverged && std::isfinite(w_coi) && std::abs(w_coi) <= kSurvivalBand && !slipped;
  }

  for (std::size_t i = 0; i < c.buses.size(); ++i) {
    const double mw = c.buses[i].load_p * c.base_mva;
    if (!topo.load_in[i]) {
      out.lost_mw += mw;
    } else if (island_of_bus[i] == kNoGroup) {
      out.deenergized_mw += mw;
    } else if (out.islands[island_of_bus[i]].survived) {
      out.served_mw += mw;
    } else {
      out.lost_mw += mw;
    }
  }
  return out;
}

LoadLossComparison compare_load_loss(const IslandOutcome& with, const IslandOutcome& without) {
  if (with.case_name != without.case_name ||
      std::abs(with.total_mw - without.total_mw) > 1e-9 * std::max(1.0, std::abs(with.total_mw))) {
    throw InputError("load-loss comparison across different cases");
  }
  LoadLossComparison r;
  r.total_mw = with.total_mw;
  r.served_with = with.served_mw;
  r.served_without = without.served_mw;
  r.lost_with = with.lost_mw;
  r.lost_without = without.lost_mw;
  r.deenergized_with = with.deenergized_mw;
  r.deenergized_without = without.deenergized_mw;
  r.saving_mw = with.served_mw - without.served_mw;
  r.saving_fraction = r.total_mw > 0.0 ? r.saving_mw / r.total_mw : 0.0;
  return r;
}

ExecutionResult execute_islanding(const ExecutionInputs& in, bool parallel) {
  const auto& c = in.network;
  auto rr = prot::default_rrdot_settings(c, in.init, in.plan.boundary_branches, in.rrdot_t_slope,
                                         in.rrdot_threshold_fraction);
  Controller ctl(c, psi::PsiMonitor(in.evaluator, in.thresholds, in.confirm), std::move(rr));
  prot::DistanceProtection dist(c, in.distance);

  dyn::Simulator sim(c, in.init, in.model, in.cfg);
  for (const auto& e : in.events) sim.schedule(e);
  sim.add_monitor(&ctl);
  sim.add_monitor(&dist);

  ExecutionResult res;
  res.trajectory = sim.run();
  res.signal = ctl.psi().signal();
  res.armed = ctl.armed();

  if (res.trajectory.stopped_early) {
    const double ts = res.trajectory.samples.back().t;
    res.split_time = ts;
    const Topology topo_ts = res.trajectory.epochs.back().epoch->topology;
    const auto comp = topology_components(c, topo_ts);

    // One continuation per component that still has a running machine.
    std::map<int, std::size_t> by_label;
    std::vector<IslandRun> islands;
    for (std::size_t k = 0; k < c.machines.size(); ++k) {
      if (!topo_ts.machine_in[k]) continue;
      const int label = comp[c.bus_index(c.machines[k].bus)];
      auto [it, fresh] = by_label.emplace(label, islands.size());
      if (fresh) {
        IslandRun isl;
        isl.bus_in.resize(c.buses.size());
        for (std::size_t i = 0; i < c.buses.size(); ++i) isl.bus_in[i] = comp[i] == label;
        islands.push_back(std::move(isl));
      }
      islands[it->second].machines.push_back(k);
    }

    const auto& last = res.trajectory.samples.back();
    const auto n = static_cast<long>(islands.size());
    std::exception_ptr err;
#pragma omp parallel for schedule(dynamic) if (parallel)
    for (long k = 0; k < n; ++k) {
      try {
        run_island(in, last, topo_ts, ts, islands[static_cast<std::size_t>(k)]);
      } catch (...) {
#pragma omp critical
        if (!err) err = std::current_exception();
      }
    }
    if (err) std::rethrow_exception(err);

    for (const auto& isl : islands) {
      if (!isl.diverged) continue;
      for (auto m : isl.machines) res.diverged.push_back(c.machines[m].id);
    }
    res.trajectory = merge_islands(in, std::move(res.trajectory), topo_ts, islands);
  }
  res.outcome = assess_outcome(c, in.model, res.trajectory, res.diverged);
  return res;
}

}  // namespace islanding::exec
