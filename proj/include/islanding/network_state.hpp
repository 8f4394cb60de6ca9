#pragma once

#include <cstddef>
#include <vector>

#include "islanding/grid.hpp"

namespace islanding {

/// Shunt admittance used to ground a faulted node.
inline const Complex kFaultAdmittance = 1.0 / Complex{1e-6, 1e-6};

struct ActiveFault {
  std::size_t branch = 0;
  double position = 0.5;  // fraction of the line measured from the from bus
};

/// Switching status layered over an immutable NetworkCase.
struct Topology {
  std::vector<bool> branch_in;
  std::vector<bool> machine_in;
  std::vector<bool> load_in;
  std::vector<ActiveFault> faults;

  static Topology from_case(const grid::NetworkCase& c);
  const ActiveFault* fault_on(std::size_t branch) const;
  bool operator==(const Topology&) const = default;
};

/// Terminal quantities of one branch, per-unit.
struct BranchTerminals {
  Complex v_from, i_from, v_to, i_to;
};

/// Reduced network for one topology, plus what is needed to recover every
/// bus voltage from the internal EMFs.
struct NetworkEpoch {
  Topology topology;
  grid::ReducedNetwork reduced;
  std::vector<std::size_t> machine_index;  // case index of each reduced-network machine
  ComplexMatrix recovery;                  // eliminated-node voltages = recovery * E
  std::vector<std::ptrdiff_t> bus_row;     // recovery row per bus, -1 when de-energized
  std::vector<std::ptrdiff_t> fault_row;   // recovery row per active fault (-1 at a bus end)
  std::vector<int> island;                 // component label per bus
  std::vector<bool> energized;             // bus belongs to a component with a running machine

  /// Bus voltages (0 for de-energized buses) and fault-node voltages.
  std::vector<Complex> bus_voltages(const std::vector<Complex>& emf_reduced) const;
  std::vector<Complex> fault_voltages(const std::vector<Complex>& emf_reduced) const;
};

/// Assembles the augmented admittance matrix (buses, fault nodes, machine
/// internal nodes, constant-impedance loads) and Kron-reduces it to the
/// internal nodes of running machines. De-energized components are excluded.
NetworkEpoch build_epoch(const grid::NetworkCase& c, const Topology& topo,
                         const std::vector<Complex>& load_admittance);

/// Augmented matrix and node bookkeeping, exposed for tests.
struct AugmentedNetwork {
  grid::AdmittanceMatrix y;
  std::vector<std::ptrdiff_t> bus_node;    // -1 when de-energized
  std::vector<std::ptrdiff_t> fault_node;  // per active fault, -1 when at a bus end
  std::vector<std::size_t> internal_node;  // per reduced machine
  std::vector<std::size_t> machine_index;
  std::vector<int> island;
  std::vector<bool> energized;
};
AugmentedNetwork build_augmented(const grid::NetworkCase& c, const Topology& topo,
                                 const std::vector<Complex>& load_admittance);

BranchTerminals branch_terminals(const grid::NetworkCase& c, const NetworkEpoch& epoch, std::size_t branch,
                                 const std::vector<Complex>& bus_v, const std::vector<Complex>& fault_v);

/// Connected components of the current topology (faulted branches stay connected).
std::vector<int> topology_components(const grid::NetworkCase& c, const Topology& topo);

}  // namespace islanding
