#include "islanding/network_state.hpp"

#include <numeric>

#include "islanding/error.hpp"

namespace islanding {

Topology Topology::from_case(const grid::NetworkCase& c) {
  Topology t;
  t.branch_in.resize(c.branches.size());
  for (std::size_t k = 0; k < c.branches.size(); ++k) {
    t.branch_in[k] = c.branches[k].status == grid::BranchStatus::in_service;
  }
  t.machine_in.assign(c.machines.size(), true);
  t.load_in.assign(c.buses.size(), true);
  return t;
}

const ActiveFault* Topology::fault_on(std::size_t branch) const {
  for (const auto& f : faults) {
    if (f.branch == branch) return &f;
  }
  return nullptr;
}

std::vector<int> topology_components(const grid::NetworkCase& c, const Topology& topo) {
  return grid::bus_components(c, topo.branch_in);
}

AugmentedNetwork build_augmented(const grid::NetworkCase& c, const Topology& topo,
                                 const std::vector<Complex>& load_admittance) {
  AugmentedNetwork aug;
  const std::size_t nb = c.buses.size();
  aug.island = topology_components(c, topo);

  std::vector<bool> live_island(nb, false);
  for (std::size_t k = 0; k < c.machines.size(); ++k) {
    if (topo.machine_in[k]) live_island[aug.island[c.bus_index(c.machines[k].bus)]] = true;
  }
  aug.energized.resize(nb);
  aug.bus_node.assign(nb, -1);
  std::ptrdiff_t next = 0;
  for (std::size_t i = 0; i < nb; ++i) {
    aug.energized[i] = live_island[aug.island[i]];
    if (aug.energized[i]) aug.bus_node[i] = next++;
  }

  aug.fault_node.assign(topo.faults.size(), -1);
  for (std::size_t f = 0; f < topo.faults.size(); ++f) {
    const auto& flt = topo.faults[f];
    const auto& br = c.branches[flt.branch];
    if (!topo.branch_in[flt.branch]) throw InputError("fault on out-of-service branch '" + br.id + "'");
    const bool interior = flt.position > 0.0 && flt.position < 1.0;
    if (interior && aug.energized[c.bus_index(br.from_bus)]) aug.fault_node[f] = next++;
  }

  for (std::size_t k = 0; k < c.machines.size(); ++k) {
    if (!topo.machine_in[k]) continue;
    aug.machine_index.push_back(k);
    aug.internal_node.push_back(static_cast<std::size_t>(next++));
  }

  const auto n = static_cast<Eigen::Index>(next);
  aug.y.entries = ComplexMatrix::Zero(n, n);
  auto& y = aug.y.entries;

  for (std::size_t k = 0; k < c.branches.size(); ++k) {
    if (!topo.branch_in[k]) continue;
    const auto& br = c.branches[k];
    const auto fb = c.bus_index(br.from_bus);
    const auto tb = c.bus_index(br.to_bus);
    if (!aug.energized[fb]) continue;
    const auto f = static_cast<std::size_t>(aug.bus_node[fb]);
    const auto t = static_cast<std::size_t>(aug.bus_node[tb]);

    std::ptrdiff_t fault_slot = -1;
    for (std::size_t q = 0; q < topo.faults.size(); ++q) {
      if (topo.faults[q].branch == k) fault_slot = static_cast<std::ptrdiff_t>(q);
    }
    if (fault_slot < 0) {
      grid::stamp_branch(y, f, t, grid::branch_stamp(br));
      continue;
    }
    const double pos = topo.faults[fault_slot].position;
    if (pos <= 0.0 || pos >= 1.0) {
      grid::stamp_branch(y, f, t, grid::branch_stamp(br));
      const auto at = static_cast<Eigen::Index>(pos <= 0.0 ? f : t);
      y(at, at) += kFaultAdmittance;
      continue;
    }
    const auto node = static_cast<std::size_t>(aug.fault_node[fault_slot]);
    const Complex z = br.series_impedance();
    grid::stamp_branch(y, f, node, grid::section_stamp(z * pos, br.b_charging * pos, br.tap));
    grid::stamp_branch(y, node, t, grid::section_stamp(z * (1.0 - pos), br.b_charging * (1.0 - pos), 1.0));
    y(static_cast<Eigen::Index>(node), static_cast<Eigen::Index>(node)) += kFaultAdmittance;
  }

  for (std::size_t i = 0; i < nb; ++i) {
    if (!aug.energized[i]) continue;
    const auto ii = static_cast<Eigen::Index>(aug.bus_node[i]);
    y(ii, ii) += Complex{c.buses[i].shunt_g, c.buses[i].shunt_b};
    if (topo.load_in[i]) y(ii, ii) += load_admittance[i];
  }

  for (std::size_t q = 0; q < aug.machine_index.size(); ++q) {
    const auto& m = c.machines[aug.machine_index[q]];
    const Complex ym = 1.0 / Complex{0.0, m.xdp_sys(c.base_mva)};
    const auto b = static_cast<std::size_t>(aug.bus_node[c.bus_index(m.bus)]);
    grid::stamp_branch(y, aug.internal_node[q], b, {ym, -ym, -ym, ym});
  }
  return aug;
}

NetworkEpoch build_epoch(const grid::NetworkCase& c, const Topology& topo,
                         const std::vector<Complex>& load_admittance) {
  auto aug = build_augmented(c, topo, load_admittance);
  NetworkEpoch ep;
  ep.topology = topo;
  ep.machine_index = aug.machine_index;
  ep.island = std::move(aug.island);
  ep.energized = std::move(aug.energized);

  std::vector<std::string> ids;
  ids.reserve(ep.machine_index.size());
  for (auto k : ep.machine_index) ids.push_back(c.machines[k].id);

  auto kron = grid::kron_reduce(aug.y.entries, aug.internal_node);
  ep.reduced = {std::move(ids), std::move(kron.y_red)};
  ep.recovery = std::move(kron.recovery);

  // Eliminated nodes come out in ascending order, which is the bus/fault node
  // numbering used above, so node id == recovery row.
  ep.bus_row = aug.bus_node;
  ep.fault_row = aug.fault_node;
  return ep;
}

std::vector<Complex> NetworkEpoch::bus_voltages(const std::vector<Complex>& emf_reduced) const {
  ComplexVector e(static_cast<Eigen::Index>(emf_reduced.size()));
  for (std::size_t k = 0; k < emf_reduced.size(); ++k) e(static_cast<Eigen::Index>(k)) = emf_reduced[k];
  ComplexVector ve = recovery.rows() > 0 ? ComplexVector(recovery * e) : ComplexVector();
  std::vector<Complex> v(bus_row.size());
  for (std::size_t i = 0; i < bus_row.size(); ++i) {
    if (bus_row[i] >= 0) v[i] = ve(bus_row[i]);
  }
  return v;
}

std::vector<Complex> NetworkEpoch::fault_voltages(const std::vector<Complex>& emf_reduced) const {
  std::vector<Complex> v(fault_row.size());
  if (fault_row.empty()) return v;
  ComplexVector e(static_cast<Eigen::Index>(emf_reduced.size()));
  for (std::size_t k = 0; k < emf_reduced.size(); ++k) e(static_cast<Eigen::Index>(k)) = emf_reduced[k];
  for (std::size_t f = 0; f < fault_row.size(); ++f) {
    if (fault_row[f] >= 0) v[f] = recovery.row(fault_row[f]).transpose().cwiseProduct(e).sum();
  }
  return v;
}

BranchTerminals branch_terminals(const grid::NetworkCase& c, const NetworkEpoch& epoch, std::size_t branch,
                                 const std::vector<Complex>& bus_v, const std::vector<Complex>& fault_v) {
  const auto& br = c.branches[branch];
  BranchTerminals out;
  if (!epoch.topology.branch_in[branch]) return out;
  const auto fb = c.bus_index(br.from_bus);
  const auto tb = c.bus_index(br.to_bus);
  out.v_from = bus_v[fb];
  out.v_to = bus_v[tb];

  std::ptrdiff_t slot = -1;
  for (std::size_t q = 0; q < epoch.topology.faults.size(); ++q) {
    if (epoch.topology.faults[q].branch == branch) slot = static_cast<std::ptrdiff_t>(q);
  }
  const double pos = slot >= 0 ? epoch.topology.faults[slot].position : -1.0;
  if (slot < 0 || pos <= 0.0 || pos >= 1.0) {
    const auto s = grid::branch_stamp(br);
    out.i_from = s.yff * out.v_from + s.yft * out.v_to;
    out.i_to = s.ytf * out.v_from + s.ytt * out.v_to;
    return out;
  }
  const Complex vf = fault_v[slot];
  const Complex z = br.series_impedance();
  const auto s1 = grid::section_stamp(z * pos, br.b_charging * pos, br.tap);
  const auto s2 = grid::section_stamp(z * (1.0 - pos), br.b_charging * (1.0 - pos), 1.0);
  out.i_from = s1.yff * out.v_from + s1.yft * vf;
  out.i_to = s2.ytf * vf + s2.ytt * out.v_to;
  return out;
}

}  // namespace islanding
