#include "islanding/protection.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "islanding/error.hpp"

namespace islanding::prot {

std::optional<Complex> apparent_impedance(Complex v_end, Complex i_line) {
  if (std::abs(i_line) <= kMinRelayCurrent) return std::nullopt;
  return v_end / i_line;
}

bool inside_mho(Complex z, Complex reach) {
  const double radius = std::abs(reach) / 2.0;
  return std::abs(z - reach / 2.0) < radius;
}

void DistanceRelaySetting::validate() const {
  if (!(zone1_reach > 0.0 && zone1_reach < zone2_reach)) {
    throw InputError("distance relay on '" + branch + "': need 0 < zone1_reach < zone2_reach");
  }
  if (!(zone2_delay >= 0.0)) throw InputError("distance relay on '" + branch + "': negative zone2_delay");
}

std::vector<DistanceRelaySetting> default_distance_settings(const grid::NetworkCase& c) {
  // Transformers and radial generator connections are left to their own
  // (unit/differential) protection; only transmission lines get distance relays.
  std::vector<int> degree(c.buses.size(), 0);
  for (const auto& br : c.branches) {
    ++degree[c.bus_index(br.from_bus)];
    ++degree[c.bus_index(br.to_bus)];
  }
  std::vector<bool> machine_bus(c.buses.size(), false);
  for (const auto& m : c.machines) machine_bus[c.bus_index(m.bus)] = true;
  auto radial_unit = [&](int bus) {
    const auto i = c.bus_index(bus);
    return machine_bus[i] && degree[i] == 1;
  };
  std::vector<DistanceRelaySetting> out;
  for (const auto& br : c.branches) {
    if (br.status != grid::BranchStatus::in_service) continue;
    if (br.tap != 1.0 || radial_unit(br.from_bus) || radial_unit(br.to_bus)) continue;
    out.push_back({br.id});
  }
  return out;
}

Zone classify(std::optional<Complex> z, Complex z_line, const DistanceRelaySetting& s) {
  if (!z) return Zone::none;
  if (inside_mho(*z, s.zone1_reach * z_line)) return Zone::zone1;
  if (inside_mho(*z, s.zone2_reach * z_line)) return Zone::zone2;
  return Zone::none;
}

DistanceScan distance_scan(const dyn::TickView& tick, const std::vector<DistanceRelaySetting>& settings,
                           DistanceRelayState& state) {
  DistanceScan out;
  state.zone2_since.resize(2 * settings.size());
  const auto emf = tick.emf_phasors();
  const auto bus_v = tick.epoch.bus_voltages(emf);
  const auto fault_v = tick.epoch.fault_voltages(emf);
  const auto& topo = tick.epoch.topology;

  for (std::size_t r = 0; r < settings.size(); ++r) {
    const auto& s = settings[r];
    const auto b = tick.network.branch_index(s.branch);
    if (!topo.branch_in[b]) {
      state.zone2_since[2 * r].reset();
      state.zone2_since[2 * r + 1].reset();
      continue;
    }
    const bool faulted = topo.fault_on(b) != nullptr;
    const auto& br = tick.network.branches[b];
    const auto term = branch_terminals(tick.network, tick.epoch, b, bus_v, fault_v);
    const Complex z_line = br.series_impedance();
    bool trip = false;
    for (int end = 0; end < 2; ++end) {
      const auto z = end == 0 ? apparent_impedance(term.v_from, term.i_from)
                              : apparent_impedance(term.v_to, term.i_to);
      const Zone zone = classify(z, z_line, s);
      auto& since = state.zone2_since[2 * r + end];
      if (zone != Zone::none) out.pickups.push_back({s.branch, end == 0, zone});
      if (zone == Zone::zone1) {
        trip = true;
      } else if (zone == Zone::zone2) {
        if (!since) since = tick.time;
        // Ticks are floating multiples of dt; allow for round-off in the delay.
        if (tick.time - *since >= s.zone2_delay - 1e-9) trip = true;
      } else {
        since.reset();
      }
    }
    if (trip && !faulted) {
      out.trips.push_back(dyn::Event::trip_branch(tick.time, s.branch, dyn::EventOrigin::distance_relay));
      state.zone2_since[2 * r].reset();
      state.zone2_since[2 * r + 1].reset();
    }
  }
  return out;
}

DistanceProtection::DistanceProtection(const grid::NetworkCase& c, std::vector<DistanceRelaySetting> settings)
    : settings_(std::move(settings)) {
  for (const auto& s : settings_) {
    s.validate();
    c.branch_index(s.branch);
  }
}

std::vector<dyn::Event> DistanceProtection::on_tick(const dyn::TickView& tick) {
  return distance_scan(tick, settings_, state_).trips;
}

void RRdotRelaySetting::validate() const {
  if (!(t_slope > 0.0)) throw InputError("R-Rdot relay on '" + branch + "': t_slope must be positive");
  if (!std::isfinite(u_threshold)) throw InputError("R-Rdot relay on '" + branch + "': non-finite threshold");
}

std::optional<double> rrdot_evaluate(const std::vector<RSample>& r_series, const RRdotRelaySetting& s) {
  if (!s.armed) return std::nullopt;
  for (std::size_t k = 1; k < r_series.size(); ++k) {
    const double h = r_series[k].t - r_series[k - 1].t;
    if (!(h > 0.0)) continue;
    const double rdot = (r_series[k].r - r_series[k - 1].r) / h;
    if (r_series[k].r + s.t_slope * rdot < s.u_threshold) return r_series[k].t;
  }
  return std::nullopt;
}

namespace {

std::optional<double> measured_r(const BranchTerminals& term, BranchEnd end) {
  const auto z = end == BranchEnd::from ? apparent_impedance(term.v_from, term.i_from)
                                        : apparent_impedance(term.v_to, term.i_to);
  if (!z) return std::nullopt;
  return z->real();
}

}  // namespace

std::vector<RRdotRelaySetting> default_rrdot_settings(const grid::NetworkCase& c, const steady::DynamicInit& init,
                                                      const std::vector<std::string>& branches, double t_slope,
                                                      double threshold_fraction) {
  const auto topo = Topology::from_case(c);
  const auto epoch = build_epoch(c, topo, init.load_admittance);
  std::vector<Complex> emf;
  for (auto k : epoch.machine_index) emf.push_back(std::polar(init.emf[k], init.delta0[k]));
  const auto bus_v = epoch.bus_voltages(emf);
  const auto fault_v = epoch.fault_voltages(emf);

  std::vector<RRdotRelaySetting> out;
  for (const auto& id : branches) {
    const auto b = c.branch_index(id);
    const auto term = branch_terminals(c, epoch, b, bus_v, fault_v);
    RRdotRelaySetting s;
    s.branch = id;
    s.t_slope = t_slope;
    const double p_from = (term.v_from * std::conj(term.i_from)).real();
    s.end = p_from >= 0.0 ? BranchEnd::from : BranchEnd::to;
    const auto r = measured_r(term, s.end);
    if (!r) throw InputError("R-Rdot relay on '" + id + "': no base-case current to set the threshold");
    s.u_threshold = threshold_fraction * *r;
    out.push_back(s);
  }
  return out;
}

RRdotProtection::RRdotProtection(const grid::NetworkCase& c, std::vector<RRdotRelaySetting> settings)
    : case_(c), settings_(std::move(settings)) {
  for (const auto& s : settings_) {
    s.validate();
    branch_.push_back(c.branch_index(s.branch));
  }
  last_.resize(settings_.size());
  done_.assign(settings_.size(), false);
}

void RRdotProtection::arm_all() {
  for (auto& s : settings_) s.armed = true;
}

bool RRdotProtection::all_done() const {
  return std::all_of(done_.begin(), done_.end(), [](bool d) { return d; });
}

std::vector<dyn::Event> RRdotProtection::on_tick(const dyn::TickView& tick) {
  std::vector<dyn::Event> out;
  const auto emf = tick.emf_phasors();
  const auto bus_v = tick.epoch.bus_voltages(emf);
  const auto fault_v = tick.epoch.fault_voltages(emf);
  for (std::size_t r = 0; r < settings_.size(); ++r) {
    if (done_[r]) continue;
    const auto b = branch_[r];
    if (!tick.epoch.topology.branch_in[b]) {
      if (settings_[r].armed) done_[r] = true;
      last_[r].reset();
      continue;
    }
    const auto term = branch_terminals(case_, tick.epoch, b, bus_v, fault_v);
    const auto rv = measured_r(term, settings_[r].end);
    if (!rv) {
      last_[r].reset();
      continue;
    }
    const RSample now{tick.time, *rv};
    if (last_[r] && settings_[r].armed) {
      if (rrdot_evaluate({*last_[r], now}, settings_[r])) {
        out.push_back(dyn::Event::trip_branch(tick.time, settings_[r].branch, dyn::EventOrigin::rrdot_relay));
        done_[r] = true;
      }
    }
    last_[r] = now;
  }
  return out;
}

const char* to_string(StabilityClass s) {
  switch (s) {
    case StabilityClass::stable_low_swing: return "stable_low_swing";
    case StabilityClass::machine_instability: return "machine_instability";
    case StabilityClass::island_formation: return "island_formation";
  }
  return "?";
}

StabilityClass parse_stability_class(const std::string& s) {
  for (auto v : {StabilityClass::stable_low_swing, StabilityClass::machine_instability,
                 StabilityClass::island_formation}) {
    if (s == to_string(v)) return v;
  }
  throw InputError("unknown stability label '" + s + "'");
}

StabilityLabel label_stability(const dyn::SystemTrajectory& traj, const GeneratorPartition& partition,
                               const std::vector<double>& inertia) {
  const auto group_of = partition.assignment(traj.machine_ids);
  const std::size_t u = partition.u();
  const std::size_t m = traj.machine_ids.size();
  if (inertia.size() != m) throw InputError("label_stability: inertia does not match the machines");

  StabilityLabel out;
  std::optional<double> unstable_at;
  std::vector<bool> tight(u, true);  // intra-group spread below the limit at every sample so far
  std::vector<double> wsum(u), mean(u), lo(u), hi(u);
  std::vector<bool> live(u);

  for (const auto& s : traj.samples) {
    const auto& on = traj.epoch_of(s).topology.machine_in;
    std::fill(wsum.begin(), wsum.end(), 0.0);
    std::fill(mean.begin(), mean.end(), 0.0);
    std::fill(live.begin(), live.end(), false);
    for (std::size_t i = 0; i < m; ++i) {
      if (!on[i]) continue;
      const auto g = group_of[i];
      if (!live[g]) {
        lo[g] = hi[g] = s.delta[i];
        live[g] = true;
      }
      lo[g] = std::min(lo[g], s.delta[i]);
      hi[g] = std::max(hi[g], s.delta[i]);
      wsum[g] += inertia[i];
      mean[g] += inertia[i] * s.delta[i];
    }
    for (std::size_t g = 0; g < u; ++g) {
      if (!live[g]) continue;
      mean[g] /= wsum[g];
      if (hi[g] - lo[g] >= kIntraSpread) tight[g] = false;
    }

    if (!unstable_at) {
      for (std::size_t i = 0; i < m; ++i) {
        if (on[i] && std::abs(s.delta[i] - mean[group_of[i]]) > kGroupGap) unstable_at = s.t;
      }
    }

    // Widest-separated pair of groups that have both stayed coherent.
    std::optional<std::pair<std::size_t, std::size_t>> pair;
    double widest = kGroupGap;
    for (std::size_t a = 0; a < u; ++a) {
      if (!live[a] || !tight[a]) continue;
      for (std::size_t b = a + 1; b < u; ++b) {
        if (!live[b] || !tight[b]) continue;
        const double gap = std::abs(mean[a] - mean[b]);
        if (gap > widest) {
          widest = gap;
          pair = {a, b};
        }
      }
    }
    if (!pair) continue;

    // Witness: every live group joins the side whose anchor mean is closer.
    const auto [a, b] = *pair;
    std::vector<std::size_t> side_a, side_b;
    for (std::size_t g = 0; g < u; ++g) {
      if (!live[g]) continue;
      (std::abs(mean[g] - mean[a]) <= std::abs(mean[g] - mean[b]) ? side_a : side_b).push_back(g);
    }
    if (side_b.size() < side_a.size() || (side_b.size() == side_a.size() && side_b.front() < side_a.front())) {
      std::swap(side_a, side_b);
    }
    out.value = StabilityClass::island_formation;
    out.separated_groups = {std::move(side_a), std::move(side_b)};
    out.time = s.t;
    return out;
  }

  if (unstable_at) {
    out.value = StabilityClass::machine_instability;
    out.time = unstable_at;
  }
  return out;
}

}  // namespace islanding::prot
