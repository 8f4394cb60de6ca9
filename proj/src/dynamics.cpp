#include "islanding/dynamics.hpp"

#include <algorithm>
#include <cmath>

#include "islanding/error.hpp"

namespace islanding::dyn {

const char* to_string(EventKind k) {
  switch (k) {
    case EventKind::apply_fault: return "apply_fault";
    case EventKind::clear_fault: return "clear_fault";
    case EventKind::trip_branch: return "trip_branch";
    case EventKind::trip_machine: return "trip_machine";
    case EventKind::trip_load: return "trip_load";
  }
  return "?";
}

const char* to_string(EventOrigin o) {
  switch (o) {
    case EventOrigin::scenario: return "scenario";
    case EventOrigin::distance_relay: return "distance_relay";
    case EventOrigin::rrdot_relay: return "rrdot_relay";
    case EventOrigin::executor: return "executor";
  }
  return "?";
}

EventKind parse_event_kind(const std::string& s) {
  for (auto k : {EventKind::apply_fault, EventKind::clear_fault, EventKind::trip_branch, EventKind::trip_machine,
                 EventKind::trip_load}) {
    if (s == to_string(k)) return k;
  }
  throw InputError("unknown event kind '" + s + "'");
}

EventOrigin parse_event_origin(const std::string& s) {
  for (auto o : {EventOrigin::scenario, EventOrigin::distance_relay, EventOrigin::rrdot_relay,
                 EventOrigin::executor}) {
    if (s == to_string(o)) return o;
  }
  throw InputError("unknown event origin '" + s + "'");
}

Event Event::fault(double t, std::string branch, double position) {
  return {t, EventKind::apply_fault, std::move(branch), position, false, EventOrigin::scenario};
}
Event Event::clear(double t, std::string branch, bool open) {
  return {t, EventKind::clear_fault, std::move(branch), 0.5, open, EventOrigin::scenario};
}
Event Event::trip_branch(double t, std::string branch, EventOrigin origin) {
  return {t, EventKind::trip_branch, std::move(branch), 0.5, true, origin};
}
Event Event::trip_machine(double t, std::string machine, EventOrigin origin) {
  return {t, EventKind::trip_machine, std::move(machine), 0.5, false, origin};
}
Event Event::trip_load(double t, int bus, EventOrigin origin) {
  return {t, EventKind::trip_load, std::to_string(bus), 0.5, false, origin};
}

MachineModel make_machine_model(const grid::NetworkCase& c, const steady::DynamicInit& init,
                                std::optional<double> damping_override) {
  MachineModel m;
  m.emf = init.emf;
  m.p_mech = init.p_mech;
  for (const auto& mr : c.machines) {
    m.inertia.push_back(2.0 * mr.h_sys(c.base_mva));
    const double d = damping_override ? *damping_override : mr.d;
    m.damping.push_back(d * mr.mva_base / c.base_mva);
  }
  return m;
}

std::vector<double> electrical_power(const grid::ReducedNetwork& red, const std::vector<double>& emf,
                                     const std::vector<double>& delta) {
  const auto m = static_cast<Eigen::Index>(red.order());
  if (static_cast<Eigen::Index>(emf.size()) != m || static_cast<Eigen::Index>(delta.size()) != m) {
    throw InputError("electrical_power: dimension mismatch");
  }
  // Re(E_i conj(sum_j Y_ij E_j)) expands to the classical power equation.
  ComplexVector e(m);
  for (Eigen::Index i = 0; i < m; ++i) e(i) = std::polar(emf[i], delta[i]);
  const ComplexVector cur = red.y_red * e;
  std::vector<double> p(static_cast<std::size_t>(m));
  for (Eigen::Index i = 0; i < m; ++i) p[i] = (e(i) * std::conj(cur(i))).real();
  return p;
}

std::vector<MachineState> derivatives(const std::vector<MachineState>& x, const grid::ReducedNetwork& red,
                                      const SwingParams& p) {
  std::vector<double> delta(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) delta[i] = x[i].delta;
  const auto pe = electrical_power(red, p.emf, delta);
  std::vector<MachineState> dx(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    dx[i].delta = p.omega_s * x[i].omega;
    dx[i].omega = (p.p_mech[i] - pe[i] - p.damping[i] * x[i].omega) / p.inertia[i];
  }
  return dx;
}

std::vector<MachineState> step(const std::vector<MachineState>& x, double dt, const grid::ReducedNetwork& red,
                               const SwingParams& p, double time) {
  if (!(dt > 0)) throw InputError("step: dt must be positive");
  const std::size_t n = x.size();
  auto axpy = [n](const std::vector<MachineState>& a, const std::vector<MachineState>& k, double h) {
    std::vector<MachineState> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = {a[i].delta + h * k[i].delta, a[i].omega + h * k[i].omega};
    return out;
  };
  const auto k1 = derivatives(x, red, p);
  const auto k2 = derivatives(axpy(x, k1, dt / 2), red, p);
  const auto k3 = derivatives(axpy(x, k2, dt / 2), red, p);
  const auto k4 = derivatives(axpy(x, k3, dt), red, p);
  std::vector<MachineState> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    out[i].delta = x[i].delta + dt / 6.0 * (k1[i].delta + 2 * k2[i].delta + 2 * k3[i].delta + k4[i].delta);
    out[i].omega = x[i].omega + dt / 6.0 * (k1[i].omega + 2 * k2[i].omega + 2 * k3[i].omega + k4[i].omega);
    if (!std::isfinite(out[i].delta) || !std::isfinite(out[i].omega)) {
      throw DivergenceError("machine state diverged at t=" + std::to_string(time + dt), time + dt);
    }
  }
  return out;
}

std::vector<double> SystemTrajectory::times() const {
  std::vector<double> t;
  t.reserve(samples.size());
  for (const auto& s : samples) t.push_back(s.t);
  return t;
}

std::vector<Complex> TickView::emf_phasors() const {
  std::vector<Complex> e;
  e.reserve(epoch.machine_index.size());
  for (auto k : epoch.machine_index) e.push_back(std::polar(model.emf[k], delta[k]));
  return e;
}

std::vector<MachineState> equilibrium_state(const steady::DynamicInit& init) {
  std::vector<MachineState> x(init.delta0.size());
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = {init.delta0[i], 0.0};
  return x;
}

Simulator::Simulator(const grid::NetworkCase& c, const steady::DynamicInit& init, MachineModel model, SimConfig cfg)
    : Simulator(c, init, std::move(model), cfg, InitialCondition{0.0, equilibrium_state(init), Topology::from_case(c)}) {}

Simulator::Simulator(const grid::NetworkCase& c, const steady::DynamicInit& init, MachineModel model, SimConfig cfg,
                     InitialCondition ic)
    : case_(c), init_(init), model_(std::move(model)), cfg_(cfg), t0_(ic.t0), topo_(std::move(ic.topology)),
      state_(std::move(ic.state)) {
  if (!(cfg_.dt > 0)) throw InputError("dt must be positive");
  if (!(cfg_.t_end > 0)) throw InputError("t_end must be positive");
  if (cfg_.record_stride < 1) throw InputError("record_stride must be at least 1");
  if (state_.size() != c.machines.size()) throw InputError("initial state does not match the machine count");
  for (const auto& m : c.machines) traj_.machine_ids.push_back(m.id);
  rebuild(t0_);
}

void Simulator::schedule(Event e) {
  if (!(e.time >= 0)) throw InputError("event time must be non-negative");
  if (e.kind == EventKind::apply_fault && !(e.position >= 0.0 && e.position <= 1.0)) {
    throw InputError("fault position must lie in [0, 1]");
  }
  pending_.push_back(std::move(e));
  std::stable_sort(pending_.begin(), pending_.end(),
                   [](const Event& a, const Event& b) { return a.time < b.time; });
}

void Simulator::rebuild(double now) {
  epoch_ = std::make_shared<const NetworkEpoch>(build_epoch(case_, topo_, init_.load_admittance));
  traj_.epochs.push_back({now, epoch_});
}

SwingParams Simulator::gather() const {
  SwingParams p;
  for (auto k : epoch_->machine_index) {
    p.emf.push_back(model_.emf[k]);
    p.p_mech.push_back(model_.p_mech[k]);
    p.inertia.push_back(model_.inertia[k]);
    p.damping.push_back(model_.damping[k]);
  }
  return p;
}

void Simulator::apply(const Event& e, double now) {
  const bool from_relay = e.origin != EventOrigin::scenario;
  switch (e.kind) {
    case EventKind::apply_fault: {
      const auto b = case_.branch_index(e.target);
      if (!topo_.branch_in[b]) throw InputError("fault on out-of-service branch '" + e.target + "'");
      if (topo_.fault_on(b)) throw InputError("branch '" + e.target + "' is already faulted");
      topo_.faults.push_back({b, e.position});
      break;
    }
    case EventKind::clear_fault: {
      const auto b = case_.branch_index(e.target);
      auto it = std::find_if(topo_.faults.begin(), topo_.faults.end(),
                             [b](const ActiveFault& f) { return f.branch == b; });
      if (it == topo_.faults.end()) {
        // Already cleared by opening the branch.
        if (!topo_.branch_in[b] && e.open_branch) return;
        throw InputError("clear_fault on branch '" + e.target + "' without an active fault");
      }
      topo_.faults.erase(it);
      if (e.open_branch) topo_.branch_in[b] = false;
      break;
    }
    case EventKind::trip_branch: {
      const auto b = case_.branch_index(e.target);
      if (!topo_.branch_in[b]) {
        if (from_relay) return;
        throw InputError("trip of out-of-service branch '" + e.target + "'");
      }
      topo_.branch_in[b] = false;
      std::erase_if(topo_.faults, [b](const ActiveFault& f) { return f.branch == b; });
      break;
    }
    case EventKind::trip_machine: {
      const auto k = case_.machine_index(e.target);
      if (!topo_.machine_in[k]) {
        if (from_relay) return;
        throw InputError("trip of out-of-service machine '" + e.target + "'");
      }
      topo_.machine_in[k] = false;
      break;
    }
    case EventKind::trip_load: {
      int bus = 0;
      try {
        bus = std::stoi(e.target);
      } catch (const std::exception&) {
        throw InputError("trip_load target must be a bus id, got '" + e.target + "'");
      }
      const auto i = case_.bus_index(bus);
      if (!topo_.load_in[i]) {
        if (from_relay) return;
        throw InputError("trip of already-shed load at bus " + e.target);
      }
      topo_.load_in[i] = false;
      break;
    }
  }
  Event logged = e;
  logged.time = now;
  traj_.event_log.push_back(logged);
  rebuild(now);
}

void Simulator::record(double now) {
  Sample s;
  s.t = now;
  s.delta.resize(state_.size());
  s.omega.resize(state_.size());
  for (std::size_t i = 0; i < state_.size(); ++i) {
    s.delta[i] = state_[i].delta;
    s.omega[i] = state_[i].omega;
  }
  s.epoch = traj_.epochs.size() - 1;
  if (!traj_.samples.empty() && traj_.samples.back().t >= now) {
    traj_.samples.back() = std::move(s);
  } else {
    traj_.samples.push_back(std::move(s));
  }
}

SystemTrajectory Simulator::run() {
  const double dt = cfg_.dt;
  const auto total_steps = static_cast<long long>(std::llround((cfg_.t_end - t0_) / dt));
  SwingParams params = gather();
  const auto* params_epoch = epoch_.get();
  std::size_t next_event = 0;
  std::vector<MachineState> reduced(epoch_->machine_index.size());

  for (long long k = 0;; ++k) {
    const double now = t0_ + static_cast<double>(k) * dt;
    while (next_event < pending_.size() && pending_[next_event].time <= now + 1e-9 * dt) {
      apply(pending_[next_event], now);
      ++next_event;
    }
    const bool tick = k % cfg_.record_stride == 0 || k == total_steps;
    if (tick) {
      record(now);
      for (auto* m : monitors_) {
        TickView view{now, case_, *epoch_, model_, traj_.samples.back().delta, traj_.samples.back().omega};
        auto fired = m->on_tick(view);
        for (auto& e : fired) {
          e.time = now;
          apply(e, now);
        }
      }
      if (std::any_of(monitors_.begin(), monitors_.end(), [](const Monitor* m) { return m->stop_requested(); })) {
        traj_.stopped_early = k < total_steps;
        break;
      }
    }
    if (k >= total_steps) break;

    if (params_epoch != epoch_.get()) {
      params = gather();
      params_epoch = epoch_.get();
    }
    const auto& idx = epoch_->machine_index;
    reduced.resize(idx.size());
    for (std::size_t q = 0; q < idx.size(); ++q) reduced[q] = state_[idx[q]];
    reduced = step(reduced, dt, epoch_->reduced, params, now);
    for (std::size_t q = 0; q < idx.size(); ++q) state_[idx[q]] = reduced[q];
  }
  return traj_;
}

SystemTrajectory simulate(const grid::NetworkCase& c, const steady::DynamicInit& init, const MachineModel& model,
                          std::vector<Event> events, const SimConfig& cfg, const std::vector<Monitor*>& monitors) {
  Simulator sim(c, init, model, cfg);
  for (auto& e : events) sim.schedule(std::move(e));
  for (auto* m : monitors) sim.add_monitor(m);
  return sim.run();
}

}  // namespace islanding::dyn
